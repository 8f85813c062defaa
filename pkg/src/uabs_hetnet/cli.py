"""Command-line front end.

Every subcommand reads an optional YAML config (``--config``), applies an
optional preset and the command-line overrides, validates the result and
only then starts computing.  Outputs are plot-ready CSV/JSON files.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from pydantic import ValidationError

from .config import OUTPUT_ENV_VAR, RunConfig, dump_config, load_config
from .gaopt import GaBounds, encode, ga_optimize
from .harness import (
    GA,
    HEX,
    STREAM_FADING,
    STREAM_GA,
    derive_seed,
    drop_layout,
    run_experiment,
    sweep_cre,
)
from .hexopt import IcicGrid, grid_search_icic
from .propagation import path_loss_cdf
from .radio import MODE_EICIC, MODE_FEICIC, MODES, IcicParams, evaluate_5pse
from .scenario import NetworkLayout

log = logging.getLogger("uabs_hetnet")


class CliError(Exception):
    """User-facing failure: reported on stderr with a nonzero exit code."""


def _frac_tag(f: float) -> str:
    return f"{f:g}".replace(".", "p")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML run configuration")
    p.add_argument("--preset", choices=("desk", "full"), help="start from a preset before applying --config")
    p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV_VAR} or ./uabs_out)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    p.add_argument("--model", choices=("splm", "ohplm"), help="path-loss model")
    p.add_argument("--mode", choices=MODES, help="ICIC mode")
    p.add_argument("--n-uabs", type=int, nargs="+", help="UABS counts")
    p.add_argument("--destroy", type=float, nargs="+", help="fractions of MBSs destroyed")
    p.add_argument("--drops", type=int, help="Monte-Carlo drops per cell")
    p.add_argument("-v", "--verbose", action="count", default=None, help="more logging")


def _overrides(args) -> dict:
    o: dict = {}
    exp: dict = {}
    if args.out is not None:
        o["output_dir"] = args.out
    if args.seed is not None:
        o["seed"] = args.seed
    if args.jobs is not None:
        o["jobs"] = args.jobs
    if args.verbose is not None:
        o["verbosity"] = args.verbose
    if args.model is not None:
        o["propagation"] = {"model": args.model}
    if args.mode is not None:
        exp["icic_mode"] = args.mode
    if args.n_uabs is not None:
        exp["n_uabs"] = args.n_uabs
    if args.destroy is not None:
        exp["destroy_fractions"] = args.destroy
    if args.drops is not None:
        exp["n_drops"] = args.drops
    if getattr(args, "generations", None) is not None:
        o["ga"] = {"generations": args.generations}
    if getattr(args, "population", None) is not None:
        o.setdefault("ga", {})["population_size"] = args.population
    if exp:
        o["experiment"] = exp
    return o


def _prepare(args) -> tuple[RunConfig, Path]:
    cfg = load_config(args.config, args.preset, _overrides(args))
    logging.basicConfig(level=(logging.WARNING, logging.INFO, logging.DEBUG, logging.DEBUG)[cfg.verbosity], force=True)
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config_used.yaml")
    return cfg, out


def cmd_scenario(args) -> None:
    cfg, out = _prepare(args)
    spec = cfg.to_spec()
    for n, f in spec.cells():
        for d in range(spec.n_drops):
            layout = drop_layout(spec, n, f, d)
            stem = f"layout_n{n}_f{_frac_tag(f)}_d{d}"
            layout.to_csv(out / f"{stem}.csv")
            if args.cdf:
                path_loss_cdf(layout, spec.model).to_csv(out / f"{stem}_plcdf.csv")
            log.info("%s: %d MBS, %d UABS, %d UE", stem, layout.n_mbs, layout.n_uabs, layout.n_ue)


def cmd_sweep(args) -> None:
    cfg, out = _prepare(args)
    spec = replace(cfg.to_spec(), deployment=HEX)
    modes = (args.mode,) if args.mode else MODES
    for curve in sweep_cre(spec, modes=modes):
        name = f"cre_{curve.mode}_{cfg.propagation.model}_n{curve.n_uabs}_f{_frac_tag(curve.destroy_fraction)}.csv"
        curve.to_csv(out / name)
        log.info("%s: peak at %g dB", name, curve.peak_tau_db)


def _single_drop_args(cfg: RunConfig, args):
    spec = cfg.to_spec()
    n = spec.n_uabs_list[0]
    f = spec.destroy_fractions[0]
    return spec, n, f, args.drop


def cmd_optimize(args) -> None:
    cfg, out = _prepare(args)
    spec, n, f, d = _single_drop_args(cfg, args)
    mode = spec.icic_mode
    if mode not in (MODE_EICIC, MODE_FEICIC):
        raise CliError("optimize needs --mode eicic or feicic")
    base = drop_layout(spec, n, f, d)
    fading_seed = derive_seed(spec.master_seed, d, STREAM_FADING)
    ga_seed = derive_seed(spec.master_seed, d, STREAM_GA)
    result = ga_optimize(
        base, spec.model, replace(spec.ga, rng_seed=ga_seed), GaBounds.for_mode(mode, spec.region, **spec.ga_bounds),
        spec.beta, fading_rng=fading_seed, altitude_m=spec.scenario.uabs_height_m, se_ceiling=spec.se_ceiling,
    )
    best_layout = base.with_uabs(
        [[x, y, spec.scenario.uabs_height_m] for x, y in result.best.uabs_xy]
    )
    best_layout.to_csv(out / "ga_layout.csv")
    result.history_to_csv(out / "ga_history.csv")
    result.best_to_json(
        out / "ga_best.json",
        fading_seed=fading_seed,
        ga_seed=ga_seed,
        drop_id=d,
        n_uabs=n,
        destroy_fraction=f,
        mode=mode,
        layout_csv="ga_layout.csv",
    )
    print(f"best 5pSE {result.best_fitness:.6g} bps/Hz after {len(result.history)} generations")


def cmd_hexsearch(args) -> None:
    cfg, out = _prepare(args)
    spec, n, f, d = _single_drop_args(cfg, args)
    layout = drop_layout(spec, n, f, d)
    fading_seed = derive_seed(spec.master_seed, d, STREAM_FADING)
    grid = IcicGrid.for_mode(spec.icic_mode, spec.grid)
    result = grid_search_icic(layout, spec.model, grid, spec.beta, fading_seed, spec.se_ceiling)
    layout.to_csv(out / "hex_layout.csv")
    result.to_csv(out / "hex_grid.csv")
    payload = {
        "fifth_pse": result.best_report.fifth_percentile_se,
        "params": result.best_params.as_dict(),
        "fading_seed": fading_seed,
        "drop_id": d,
        "n_uabs": n,
        "destroy_fraction": f,
        "mode": spec.icic_mode,
        "elapsed_s": result.elapsed_s,
        "layout_csv": "hex_layout.csv",
    }
    with open(out / "hex_best.json", "w") as fh:
        json.dump(payload, fh, indent=2)
    print(f"best 5pSE {payload['fifth_pse']:.6g} bps/Hz at {result.best_params.as_dict()}")


def _read_params(path: Path, beta_default: float) -> IcicParams:
    with open(path) as fh:
        data = json.load(fh)
    p = data.get("params", data)
    try:
        return IcicParams(
            tau_db=float(p["tau_db"]),
            alpha=float(p["alpha"]),
            rho_db=float(p["rho_db"]),
            rho_prime_db=float(p["rho_prime_db"]),
            beta=float(p.get("beta", beta_default)),
        )
    except KeyError as exc:
        raise CliError(f"{path}: missing ICIC parameter {exc}") from exc


def cmd_evaluate(args) -> None:
    cfg, out = _prepare(args)
    spec = cfg.to_spec()
    layout = NetworkLayout.from_csv(
        args.layout, spec.scenario.mbs_eff_power_dbm, spec.scenario.uabs_eff_power_dbm
    )
    if layout.n_ue == 0:
        raise CliError(f"{args.layout}: no UE rows")
    params = _read_params(args.params, spec.beta)
    seed = args.fading_seed
    if seed is None:
        with open(args.params) as fh:
            seed = json.load(fh).get("fading_seed")
    if seed is None:
        raise CliError("no fading seed: pass --fading-seed or use a params file that records one")
    report = evaluate_5pse(layout, spec.model, params, rng=seed, se_ceiling=spec.se_ceiling)
    report.meta["fading_seed"] = seed
    report.to_json(out / "evaluate_report.json")
    report.to_csv(out / "evaluate_per_ue.csv")
    print(f"5pSE {report.fifth_percentile_se!r} bps/Hz")


def cmd_experiment(args) -> None:
    cfg, out = _prepare(args)
    spec = cfg.to_spec()
    res = run_experiment(spec)
    tag = f"{spec.deployment}_{spec.icic_mode}_{cfg.propagation.model}"
    res.records_to_csv(out / f"drops_{tag}.csv")
    res.to_json(out / f"aggregate_{tag}.json")
    for c in res.cells:
        print(f"n_uabs={c.n_uabs} destroyed={c.destroy_fraction:g}: mean 5pSE {c.mean_fifth_pse:.6g} bps/Hz")


def cmd_bench(args) -> None:
    cfg, out = _prepare(args)
    base = cfg.to_spec()
    modes = (args.mode,) if args.mode else (MODE_EICIC, MODE_FEICIC)
    rows = []
    for deployment in (HEX, GA):
        for mode in modes:
            res = run_experiment(replace(base, deployment=deployment, icic_mode=mode))
            for c in res.cells:
                rows.append([deployment, mode, c.n_uabs, c.destroy_fraction, c.n_drops, c.mean_elapsed_s, c.mean_fifth_pse])
    with open(out / "bench_runtime.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["deployment", "mode", "n_uabs", "destroy_fraction", "n_drops", "mean_elapsed_s", "mean_fifth_pse_bpshz"])
        writer.writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uabs-hetnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", help="write drop layouts as CSV")
    _add_common(p)
    p.add_argument("--cdf", action="store_true", help="also write the path-loss CDF of each layout")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("sweep", help="mean 5pSE versus CRE bias on the hex deployment")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    for name, func, text in (
        ("optimize", cmd_optimize, "GA over UABS positions and ICIC parameters for one drop"),
        ("hexsearch", cmd_hexsearch, "ICIC grid search on the hex deployment for one drop"),
    ):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        p.add_argument("--drop", type=int, default=0, help="drop index (first n_uabs/destroy cell is used)")
        if name == "optimize":
            p.add_argument("--generations", type=int)
            p.add_argument("--population", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("evaluate", help="re-score a layout CSV with given ICIC parameters")
    _add_common(p)
    p.add_argument("--layout", type=Path, required=True)
    p.add_argument("--params", type=Path, required=True, help="JSON with tau_db, alpha, rho_db, rho_prime_db")
    p.add_argument("--fading-seed", type=int, help="defaults to the fading_seed recorded in --params")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run the n_uabs x destroy matrix and aggregate")
    _add_common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bench", help="runtime of hex search versus GA")
    _add_common(p)
    p.add_argument("--generations", type=int)
    p.add_argument("--population", type=int)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"invalid configuration:\n{exc}", file=sys.stderr)
        return 2
    except (CliError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
