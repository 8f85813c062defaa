"""Monte-Carlo experiment orchestration.

Every drop gets its own seeds, derived from ``(master_seed, drop_id, stream)``
only, so a cell of the experiment matrix gives the same numbers whatever
order the matrix is walked in and whichever other cells are run.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .gaopt import GaBounds, GaConfig, ga_optimize
from .hexopt import IcicGrid, grid_search_icic, search_links
from .propagation import PathLossModel
from .radio import DEFAULT_SE_CEILING, MODE_FEICIC, MODE_NONE, MODES, compute_link_budget, draw_layout_fading
from .scenario import NetworkLayout, ScenarioConfig, SimRegion, destroy_mbs, generate_ppp_layout, hex_grid_positions

log = logging.getLogger(__name__)

HEX = "hex"
GA = "ga"
DEPLOYMENTS = (HEX, GA)

STREAM_LAYOUT, STREAM_DESTROY, STREAM_FADING, STREAM_GA = range(4)

DROP_FIELDS = (
    "drop_id", "deployment", "n_uabs", "destroy_fraction", "mode",
    "tau_db", "alpha", "rho_db", "rho_prime_db", "fifth_pse", "elapsed_s", "n_mbs", "n_ue",
)


def derive_seed(master_seed: int, drop_id: int, stream: int) -> int:
    return int(np.random.SeedSequence([master_seed, drop_id, stream]).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    model: PathLossModel = field(default_factory=PathLossModel)
    deployment: str = HEX
    icic_mode: str = MODE_FEICIC
    n_uabs_list: tuple = (4, 16)
    destroy_fractions: tuple = (0.5, 0.975)
    n_drops: int = 20
    grid: IcicGrid = field(default_factory=IcicGrid)
    ga: GaConfig = field(default_factory=GaConfig)
    ga_bounds: dict = field(default_factory=dict)  # overrides of GaBounds ICIC ranges
    beta: float = 0.5
    master_seed: int = 0
    jobs: int = 1
    se_ceiling: float = DEFAULT_SE_CEILING

    def __post_init__(self):
        if self.deployment not in DEPLOYMENTS:
            raise ValueError(f"deployment must be one of {DEPLOYMENTS}")
        if self.icic_mode not in MODES:
            raise ValueError(f"icic_mode must be one of {MODES}")
        if self.deployment == GA and self.icic_mode == MODE_NONE:
            raise ValueError("GA deployment optimizes ICIC genes; use mode eicic or feicic")
        if self.n_drops < 1:
            raise ValueError("n_drops must be >= 1")
        if not self.n_uabs_list or not self.destroy_fractions:
            raise ValueError("n_uabs_list and destroy_fractions must be non-empty")
        if any(n < 0 for n in self.n_uabs_list):
            raise ValueError("n_uabs values must be >= 0")
        if any(not 0 <= f <= 1 for f in self.destroy_fractions):
            raise ValueError("destroy fractions must be in [0, 1]")
        object.__setattr__(self, "n_uabs_list", tuple(int(n) for n in self.n_uabs_list))
        object.__setattr__(self, "destroy_fractions", tuple(float(f) for f in self.destroy_fractions))

    @property
    def region(self) -> SimRegion:
        return self.scenario.region

    def bounds(self) -> GaBounds:
        return GaBounds.for_mode(self.icic_mode, self.region, **self.ga_bounds)

    def cells(self):
        return [(n, f) for n in self.n_uabs_list for f in self.destroy_fractions]


def desk_preset(**kw) -> ExperimentSpec:
    """5x5 km, 20 drops, 4 and 16 UABSs."""
    scenario = kw.pop("scenario", ScenarioConfig(region=SimRegion(5.0, 5.0)))
    return ExperimentSpec(scenario=scenario, **kw)


def full_preset(**kw) -> ExperimentSpec:
    """Full 10x10 km setting with 100 drops. Slow."""
    scenario = kw.pop("scenario", ScenarioConfig(region=SimRegion(10.0, 10.0)))
    kw.setdefault("n_uabs_list", (4, 16, 36, 60))
    kw.setdefault("n_drops", 100)
    return ExperimentSpec(scenario=scenario, **kw)


def drop_layout(spec: ExperimentSpec, n_uabs: int, destroy_fraction: float, drop_id: int) -> NetworkLayout:
    """MBS/UE realization of one drop, already damaged, UABSs on the hex grid.

    GA runs start from the same layout and only move the UABSs, so hex and
    GA results of a drop are directly comparable.
    """
    cfg = replace(spec.scenario, n_uabs=n_uabs, rng_seed=derive_seed(spec.master_seed, drop_id, STREAM_LAYOUT))
    hexp = hex_grid_positions(n_uabs, spec.region, cfg.uabs_height_m) if n_uabs else None
    layout = generate_ppp_layout(cfg, hexp)
    return destroy_mbs(layout, destroy_fraction, derive_seed(spec.master_seed, drop_id, STREAM_DESTROY))


@dataclass
class DropRecord:
    drop_id: int
    deployment: str
    n_uabs: int
    destroy_fraction: float
    mode: str
    tau_db: float
    alpha: float
    rho_db: float
    rho_prime_db: float
    fifth_pse: float
    elapsed_s: float
    n_mbs: int
    n_ue: int

    def row(self) -> list:
        return [getattr(self, k) for k in DROP_FIELDS]


def run_drop(spec: ExperimentSpec, n_uabs: int, destroy_fraction: float, drop_id: int, mode: str | None = None) -> DropRecord:
    mode = mode or spec.icic_mode
    layout = drop_layout(spec, n_uabs, destroy_fraction, drop_id)
    fading_seed = derive_seed(spec.master_seed, drop_id, STREAM_FADING)
    if spec.deployment == HEX:
        grid = IcicGrid.for_mode(mode, spec.grid)
        start = time.perf_counter()
        result = grid_search_icic(layout, spec.model, grid, spec.beta, fading_seed, spec.se_ceiling)
        elapsed = time.perf_counter() - start
        params, value = result.best_params, result.best_report.fifth_percentile_se
    else:
        ga_cfg = replace(spec.ga, rng_seed=derive_seed(spec.master_seed, drop_id, STREAM_GA))
        bounds = GaBounds.for_mode(mode, spec.region, **spec.ga_bounds)
        start = time.perf_counter()
        result = ga_optimize(
            layout, spec.model, ga_cfg, bounds, spec.beta,
            fading_rng=fading_seed, altitude_m=spec.scenario.uabs_height_m, se_ceiling=spec.se_ceiling,
        )
        elapsed = time.perf_counter() - start
        params, value = result.best_report.params_used, result.best_fitness
    return DropRecord(
        drop_id=drop_id,
        deployment=spec.deployment,
        n_uabs=n_uabs,
        destroy_fraction=destroy_fraction,
        mode=mode,
        tau_db=params.tau_db,
        alpha=params.alpha,
        rho_db=params.rho_db,
        rho_prime_db=params.rho_prime_db,
        fifth_pse=value,
        elapsed_s=elapsed,
        n_mbs=layout.n_mbs,
        n_ue=layout.n_ue,
    )


class DropFailed(RuntimeError):
    def __init__(self, drop_id, n_uabs, destroy_fraction, cause):
        super().__init__(f"drop {drop_id} (n_uabs={n_uabs}, destroy_fraction={destroy_fraction}) failed: {cause!r}")
        self.drop_id = drop_id


def _run_task(task):
    spec, n_uabs, frac, drop_id = task
    try:
        return run_drop(spec, n_uabs, frac, drop_id)
    except Exception as exc:
        raise DropFailed(drop_id, n_uabs, frac, exc) from exc


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


@dataclass
class CellAggregate:
    deployment: str
    mode: str
    n_uabs: int
    destroy_fraction: float
    n_drops: int
    mean_fifth_pse: float
    std_fifth_pse: float
    best_params_mode: tuple
    mean_elapsed_s: float


@dataclass
class AggregateResult:
    records: list
    cells: list

    def cell(self, n_uabs: int, destroy_fraction: float, mode: str | None = None) -> CellAggregate:
        for c in self.cells:
            if c.n_uabs == n_uabs and c.destroy_fraction == destroy_fraction and (mode is None or c.mode == mode):
                return c
        raise KeyError((n_uabs, destroy_fraction, mode))

    def records_to_csv(self, path) -> None:
        write_drop_csv(self.records, path)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"cells": [asdict(c) for c in self.cells]}, fh, indent=2)


def write_drop_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DROP_FIELDS)
        for r in records:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in r.row()])


def read_drop_csv(path) -> list[DropRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(DropRecord(
                drop_id=int(row["drop_id"]),
                deployment=row["deployment"],
                n_uabs=int(row["n_uabs"]),
                destroy_fraction=float(row["destroy_fraction"]),
                mode=row["mode"],
                tau_db=float(row["tau_db"]),
                alpha=float(row["alpha"]),
                rho_db=float(row["rho_db"]),
                rho_prime_db=float(row["rho_prime_db"]),
                fifth_pse=float(row["fifth_pse"]),
                elapsed_s=float(row["elapsed_s"]),
                n_mbs=int(row["n_mbs"]),
                n_ue=int(row["n_ue"]),
            ))
    return out


def aggregate(records) -> list[CellAggregate]:
    """Per-cell mean/std of the 5pSE, most common best parameters, mean runtime."""
    groups: dict[tuple, list] = {}
    for r in records:
        groups.setdefault((r.deployment, r.mode, r.n_uabs, r.destroy_fraction), []).append(r)
    cells = []
    for (dep, mode, n, f), rs in groups.items():
        values = np.array([r.fifth_pse for r in rs])
        params = Counter(tuple(round(v, 2) for v in (r.tau_db, r.alpha, r.rho_db, r.rho_prime_db)) for r in rs)
        cells.append(CellAggregate(
            deployment=dep,
            mode=mode,
            n_uabs=n,
            destroy_fraction=f,
            n_drops=len(rs),
            mean_fifth_pse=float(values.mean()),
            std_fifth_pse=float(values.std()),
            best_params_mode=params.most_common(1)[0][0],
            mean_elapsed_s=float(np.mean([r.elapsed_s for r in rs])),
        ))
    return cells


def run_experiment(spec: ExperimentSpec) -> AggregateResult:
    tasks = [(spec, n, f, d) for n, f in spec.cells() for d in range(spec.n_drops)]
    log.info("running %d drops (%s, %s)", len(tasks), spec.deployment, spec.icic_mode)
    records = _map(_run_task, tasks, spec.jobs)
    return AggregateResult(records=records, cells=aggregate(records))


@dataclass
class CreCurve:
    mode: str
    n_uabs: int
    destroy_fraction: float
    tau_db: list
    per_drop: np.ndarray  # (n_drops, len(tau_db))

    @property
    def mean(self) -> np.ndarray:
        return self.per_drop.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.per_drop.std(axis=0)

    @property
    def peak_tau_db(self) -> float:
        return self.tau_db[int(np.argmax(self.mean))]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tau_db", "mean_fifth_pse_bpshz", "std_fifth_pse_bpshz", "n_drops"])
            for t, m, s in zip(self.tau_db, self.mean, self.std):
                writer.writerow([repr(float(t)), repr(float(m)), repr(float(s)), len(self.per_drop)])


def _sweep_task(task):
    spec, n_uabs, frac, drop_id, taus, modes = task
    try:
        layout = drop_layout(spec, n_uabs, frac, drop_id)
        fading = draw_layout_fading(layout, derive_seed(spec.master_seed, drop_id, STREAM_FADING))
        link = compute_link_budget(layout, spec.model, fading)
        out = {}
        for mode in modes:
            grid = IcicGrid.for_mode(mode, replace(spec.grid, tau_values_db=taus))
            best = search_links(link, grid, spec.beta, spec.se_ceiling).best_for_tau()
            out[mode] = [best[float(t)] for t in taus]
        return out
    except Exception as exc:
        raise DropFailed(drop_id, n_uabs, frac, exc) from exc


def sweep_cre(spec: ExperimentSpec, tau_values_db=None, modes=MODES) -> list[CreCurve]:
    """Mean 5pSE versus CRE bias, the other ICIC parameters optimized on the grid
    separately for each bias. All modes share the drops and fading draws."""
    if spec.deployment != HEX:
        raise ValueError("CRE sweeps run on the hexagonal deployment")
    taus = tuple(float(t) for t in (tau_values_db if tau_values_db is not None else spec.grid.tau_values_db))
    if not taus:
        raise ValueError("need at least one tau value")
    curves = []
    for n_uabs, frac in spec.cells():
        tasks = [(spec, n_uabs, frac, d, taus, tuple(modes)) for d in range(spec.n_drops)]
        per_drop = _map(_sweep_task, tasks, spec.jobs)
        for mode in modes:
            curves.append(CreCurve(mode, n_uabs, frac, list(taus), np.array([p[mode] for p in per_drop])))
    return curves
