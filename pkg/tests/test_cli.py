import csv
import json

import pytest
import yaml

from uabs_hetnet.cli import main
from uabs_hetnet.config import OUTPUT_ENV_VAR, RunConfig, load_config
from uabs_hetnet.scenario import NetworkLayout

TINY = {
    "schema_version": 1,
    "verbosity": 0,
    "jobs": 1,
    "scenario": {"width_km": 1.5, "height_km": 1.5, "lambda_ue": 40.0},
    "experiment": {"n_uabs": [2], "destroy_fractions": [0.5], "n_drops": 2},
    "ga": {"population_size": 6, "generations": 3},
}


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return path


def run(*argv):
    return main([str(a) for a in argv])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_defaults_and_presets():
    cfg = RunConfig()
    assert cfg.schema_version == 1 and cfg.experiment.n_drops == 20
    full = load_config(preset="full")
    assert full.scenario.width_km == 10.0 and full.experiment.n_uabs == [4, 16, 36, 60]


def test_overrides_beat_file(cfg_file):
    cfg = load_config(cfg_file, overrides={"seed": 5, "experiment": {"n_drops": 7}})
    assert cfg.seed == 5 and cfg.experiment.n_drops == 7
    assert cfg.experiment.n_uabs == [2]


@pytest.mark.parametrize("bad", [{"bogus": 1}, {"schema_version": 2}, {"scenario": {"lambda_mbs": -1}},
                                 {"experiment": {"destroy_fractions": [1.5]}}, {"scenario": {"typo": 3}}])
def test_validation_errors_exit_nonzero(tmp_path, bad):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump({**TINY, **bad}))
    assert run("scenario", "--config", path, "--out", tmp_path / "o") != 0


def test_scenario_writes_layouts(cfg_file, tmp_path):
    out = tmp_path / "o"
    assert run("scenario", "--config", cfg_file, "--out", out, "--cdf") == 0
    for d in range(2):
        path = out / f"layout_n2_f0p5_d{d}.csv"
        lay = NetworkLayout.from_csv(path)
        assert len(rows(path)) - 1 == lay.n_mbs + lay.n_uabs + lay.n_ue
        assert (out / f"layout_n2_f0p5_d{d}_plcdf.csv").exists()


def test_scenario_destruction_count(cfg_file, tmp_path):
    intact, damaged = tmp_path / "a", tmp_path / "b"
    assert run("scenario", "--config", cfg_file, "--out", intact, "--destroy", 0.0, "--preset", "desk",
               "--n-uabs", 1, "--drops", 1) == 0
    assert run("scenario", "--config", cfg_file, "--out", damaged, "--destroy", 0.975, "--preset", "desk",
               "--n-uabs", 1, "--drops", 1) == 0
    n = NetworkLayout.from_csv(intact / "layout_n1_f0_d0.csv").n_mbs
    m = NetworkLayout.from_csv(damaged / "layout_n1_f0p975_d0.csv").n_mbs
    assert m == n - int(0.975 * n + 1e-9)


def test_output_dir_from_env(cfg_file, tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV_VAR, str(tmp_path / "env_out"))
    assert run("scenario", "--config", cfg_file) == 0
    assert (tmp_path / "env_out" / "config_used.yaml").exists()


@pytest.mark.parametrize("model", ["splm", "ohplm"])
def test_sweep_outputs_and_determinism(cfg_file, tmp_path, model):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("sweep", "--config", cfg_file, "--out", a, "--model", model) == 0
    assert run("sweep", "--config", cfg_file, "--out", b, "--model", model) == 0
    files = sorted(p.name for p in a.glob("cre_*.csv"))
    assert files == [f"cre_{m}_{model}_n2_f0p5.csv" for m in ("eicic", "feicic", "none")]
    for name in files:
        table = rows(a / name)
        assert table[0] == ["tau_db", "mean_fifth_pse_bpshz", "std_fifth_pse_bpshz", "n_drops"]
        assert len(table) == 7
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_optimize_then_evaluate_reproduces(cfg_file, tmp_path):
    out, ev = tmp_path / "o", tmp_path / "e"
    assert run("optimize", "--config", cfg_file, "--out", out, "--mode", "feicic") == 0
    history = rows(out / "ga_history.csv")
    assert history[0] == ["generation", "best_fifth_pse", "mean_fifth_pse"]
    best_col = [float(r[1]) for r in history[1:]]
    assert len(best_col) == 3 and best_col == sorted(best_col)
    best = json.loads((out / "ga_best.json").read_text())
    assert "fading_seed" in best
    assert run("evaluate", "--config", cfg_file, "--out", ev, "--layout", out / "ga_layout.csv",
               "--params", out / "ga_best.json") == 0
    report = json.loads((ev / "evaluate_report.json").read_text())
    assert report["fifth_percentile_se"] == best["fifth_pse"]
    assert sum(report["class_counts"].values()) == report["n_ue"]


def test_optimize_single_generation(cfg_file, tmp_path):
    out = tmp_path / "o"
    assert run("optimize", "--config", cfg_file, "--out", out, "--mode", "eicic", "--generations", 1) == 0
    assert len(rows(out / "ga_history.csv")) == 2


def test_optimize_rejects_none_mode(cfg_file, tmp_path):
    assert run("optimize", "--config", cfg_file, "--out", tmp_path, "--mode", "none") != 0


def test_hexsearch_then_evaluate_reproduces(cfg_file, tmp_path):
    out, ev = tmp_path / "o", tmp_path / "e"
    assert run("hexsearch", "--config", cfg_file, "--out", out, "--drop", 1) == 0
    best = json.loads((out / "hex_best.json").read_text())
    assert len(rows(out / "hex_grid.csv")) == 601
    assert run("evaluate", "--config", cfg_file, "--out", ev, "--layout", out / "hex_layout.csv",
               "--params", out / "hex_best.json") == 0
    report = json.loads((ev / "evaluate_report.json").read_text())
    assert report["fifth_percentile_se"] == best["fifth_pse"]


def test_evaluate_empty_ue_file_fails(cfg_file, tmp_path):
    layout = tmp_path / "layout.csv"
    layout.write_text("node_type,x_km,y_km,z_m\nmbs,0.5,0.5,30.0\nuabs,1.0,1.0,100.0\n")
    params = tmp_path / "p.json"
    params.write_text(json.dumps({"tau_db": 0, "alpha": 0, "rho_db": 30, "rho_prime_db": -10, "fading_seed": 1}))
    assert run("evaluate", "--config", cfg_file, "--out", tmp_path / "o", "--layout", layout, "--params", params) != 0


def test_evaluate_needs_a_seed(cfg_file, tmp_path):
    layout = tmp_path / "layout.csv"
    layout.write_text("node_type,x_km,y_km,z_m\nmbs,0.5,0.5,30.0\nue,1.0,1.0,3.0\n")
    params = tmp_path / "p.json"
    params.write_text(json.dumps({"tau_db": 0, "alpha": 0, "rho_db": 30, "rho_prime_db": -10}))
    assert run("evaluate", "--config", cfg_file, "--out", tmp_path / "o", "--layout", layout, "--params", params) != 0
    assert run("evaluate", "--config", cfg_file, "--out", tmp_path / "o", "--layout", layout, "--params", params,
               "--fading-seed", 3) == 0


def test_experiment_and_bench(cfg_file, tmp_path):
    out = tmp_path / "o"
    assert run("experiment", "--config", cfg_file, "--out", out, "--mode", "eicic") == 0
    drops = rows(out / "drops_hex_eicic_splm.csv")
    assert drops[0][:4] == ["drop_id", "deployment", "n_uabs", "destroy_fraction"]
    assert len(drops) == 3
    assert json.loads((out / "aggregate_hex_eicic_splm.json").read_text())["cells"][0]["n_drops"] == 2
    assert run("bench", "--config", cfg_file, "--out", out, "--drops", 1) == 0
    bench = rows(out / "bench_runtime.csv")
    assert [r[:2] for r in bench[1:]] == [["hex", "eicic"], ["hex", "feicic"], ["ga", "eicic"], ["ga", "feicic"]]
