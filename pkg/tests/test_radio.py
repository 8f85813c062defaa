import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_se, nth_smallest_5pct
from uabs_hetnet.propagation import PathLossModel
from uabs_hetnet.radio import (
    CLASS_NAMES,
    CSF_MUE,
    CSF_UUE,
    USF_MUE,
    USF_UUE,
    IcicParams,
    SirSet,
    associate_and_schedule,
    compute_link_budget,
    evaluate_5pse,
    evaluate_links,
    fifth_percentile_se,
    per_ue_se,
    sir_set,
)
from uabs_hetnet.scenario import NetworkLayout, ScenarioConfig, SimRegion, generate_ppp_layout, hex_grid_positions

SPLM = PathLossModel.splm()


def random_layout(seed, n_mbs=5, n_uabs=3, n_ue=60, size=2.0):
    rng = np.random.default_rng(seed)
    mbs = np.column_stack([rng.uniform(0, size, (n_mbs, 2)), np.full(n_mbs, 30.0)])
    uabs = np.column_stack([rng.uniform(0, size, (n_uabs, 2)), np.full(n_uabs, 100.0)])
    ue = np.column_stack([rng.uniform(0, size, (n_ue, 2)), np.full(n_ue, 3.0)])
    return NetworkLayout(mbs, uabs, ue)


def sirs_of(g, gc, gp, gpc):
    return SirSet(*(np.atleast_1d(np.asarray(x, dtype=float)) for x in (g, gc, gp, gpc)))


# --- parameters -------------------------------------------------------------

def test_params_validation():
    with pytest.raises(ValueError):
        IcicParams(alpha=1.5)
    with pytest.raises(ValueError):
        IcicParams(beta=1.0)
    with pytest.raises(ValueError):
        IcicParams(rho_db=float("nan"))


def test_no_icic_puts_everyone_in_usf():
    p = IcicParams.no_icic(tau_db=6)
    assert p.alpha == 1.0 and p.rho == math.inf and p.rho_prime == 0.0
    rng = np.random.default_rng(0)
    s = sirs_of(*rng.exponential(1, (4, 1000)) * 1e3)
    cls = associate_and_schedule(s, p)
    assert set(np.unique(cls)) <= {USF_MUE, USF_UUE}


# --- interference and SIR ----------------------------------------------------

def test_three_station_interference_by_hand():
    # UE at the origin, MBS A at 100 m, MBS B at 200 m, UABS at 300 m (horizontal);
    # unit fading, so the sums are plain 3-D path-loss arithmetic
    ue = [[0, 0, 3.0]]
    lay = NetworkLayout([[0.1, 0, 30.0], [0.2, 0, 30.0]], [[0.3, 0, 100.0]], ue)
    link = compute_link_budget(lay, SPLM, np.ones((1, 3)))

    def rx(p_dbm, dx_m, h):
        return 10 ** (p_dbm / 10) / math.hypot(dx_m, h - 3.0) ** 4

    a, b, u = rx(46, 100, 30), rx(46, 200, 30), rx(30, 300, 100)
    assert link.moi_index[0] == 0 and link.uoi_index[0] == 0
    assert link.s_mbs_mw[0] == pytest.approx(a, rel=1e-12)
    assert link.z_usf_mw[0] == pytest.approx(b, rel=1e-12)
    assert link.z_csf_mw(0.25)[0] == pytest.approx(0.25 * b, rel=1e-12)
    s = sir_set(link, 0.25)
    assert s.gamma[0] == pytest.approx(a / (u + b))
    assert s.gamma_csf[0] == pytest.approx(0.25 * a / (u + 0.25 * b))
    assert s.gamma_prime[0] == pytest.approx(u / (a + b))
    assert s.gamma_prime_csf[0] == pytest.approx(u / (0.25 * a + 0.25 * b))


def test_alpha_one_csf_equals_usf():
    link = compute_link_budget(random_layout(1), SPLM, np.random.default_rng(1).exponential(1, (60, 8)))
    s = sir_set(link, 1.0)
    assert np.allclose(s.gamma_csf, s.gamma)
    assert np.allclose(s.gamma_prime_csf, s.gamma_prime)


def test_alpha_zero_blanks_mbs_in_csf():
    link = compute_link_budget(random_layout(2), SPLM, np.ones((60, 8)))
    s = sir_set(link, 0.0)
    assert np.all(s.gamma_csf == 0.0)
    assert np.allclose(s.gamma_prime_csf, link.s_uabs_mw / link.z_uabs_mw)


def test_single_station_gives_infinite_sir():
    lay = NetworkLayout([], [[0, 0, 100.0]], [[0.1, 0.1, 3.0]])
    rep = evaluate_5pse(lay, SPLM, IcicParams(), rng=0)
    assert rep.classes[0] == USF_UUE
    assert rep.per_ue_se[0] == pytest.approx(0.5 * 10.0)


def test_capped_link_carries_no_power():
    # 20 km away: 10*4*log10(2e4) ~ 172 dB > 160 dB cap
    lay = NetworkLayout([[0, 0, 30.0], [20, 0, 30.0]], [], [[0.05, 0, 3.0]])
    link = compute_link_budget(lay, SPLM, np.ones((1, 2)))
    assert link.z_mbs_mw[0] == 0.0
    assert sir_set(link, 0.0).gamma[0] == math.inf


# --- association and scheduling --------------------------------------------

@pytest.mark.parametrize(
    "g, gp, tau_db, expected",
    [
        (10.0, 1.0, 0.0, USF_MUE),     # 10 > 1
        (10.0, 1.0, 12.0, USF_UUE),    # 10 < 15.85
        (1.0, 1.0, 0.0, USF_UUE),      # tie goes to the UABS
        (1e4, 0.5, 0.0, CSF_MUE),      # 40 dB > rho = 30 dB
        (0.01, 0.05, 0.0, CSF_UUE),    # -13 dB <= rho' = -10 dB
    ],
)
def test_association_examples(g, gp, tau_db, expected):
    p = IcicParams(tau_db=tau_db, alpha=0.5, rho_db=30, rho_prime_db=-10)
    assert associate_and_schedule(sirs_of(g, 0, gp, 0), p)[0] == expected


def test_forced_tier_when_one_is_missing():
    p = IcicParams()
    s = sirs_of([0.0, 5.0], [0, 0], [5.0, 0.0], [0, 0])
    cls = associate_and_schedule(s, p, has_moi=[True, False], has_uoi=[False, True])
    assert cls[0] in (USF_MUE, CSF_MUE)
    assert cls[1] in (USF_UUE, CSF_UUE)


def test_classification_is_total_and_exclusive():
    rng = np.random.default_rng(5)
    n = 100_000
    raw = 10 ** rng.uniform(-5, 5, (4, n))
    raw[:, rng.random(n) < 0.01] = 0.0
    raw[0, rng.random(n) < 0.01] = np.inf
    p = IcicParams(tau_db=6, alpha=0.3, rho_db=25, rho_prime_db=-15)
    cls = associate_and_schedule(sirs_of(*raw), p)
    assert cls.shape == (n,)
    assert set(np.unique(cls)) <= {0, 1, 2, 3}


def test_more_bias_never_adds_mues():
    link = compute_link_budget(random_layout(3, n_ue=300), SPLM, np.random.default_rng(3).exponential(1, (300, 8)))
    counts = []
    for tau in (0, 3, 6, 9, 12, 15):
        rep = evaluate_links(link, IcicParams(tau_db=tau, alpha=0.5))
        counts.append(int(np.sum(rep.classes <= CSF_MUE)))
    assert counts == sorted(counts, reverse=True)


# --- SE ---------------------------------------------------------------------

def test_se_examples():
    s = sirs_of([3.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 7.0, 0], [0, 0, 0, 1e9])
    cls = np.array([USF_MUE, CSF_MUE, USF_UUE, CSF_UUE])
    se = per_ue_se(cls, s, 0.5, np.array([2, 1, 1, 4]))
    assert se == pytest.approx([0.5 * 2 / 2, 0.5 * 1, 0.5 * 3, 0.5 * 10 / 4])
    se = per_ue_se(cls, s, 0.25, np.array([1, 1, 1, 1]))
    assert se == pytest.approx([0.25 * 2, 0.75 * 1, 0.25 * 3, 0.75 * 10])


def test_se_rejects_zero_load():
    with pytest.raises(ValueError):
        per_ue_se(np.array([USF_MUE]), sirs_of(1, 1, 1, 1), 0.5, np.array([0]))


def test_loads_sum_to_ue_count_and_match_classes():
    lay = random_layout(4, n_ue=200)
    rep = evaluate_5pse(lay, SPLM, IcicParams(tau_db=6, alpha=0.25), rng=4)
    assert rep.cell_loads.sum() == 200
    for j in range(lay.n_stations):
        for c in range(4):
            assert rep.cell_loads[j, c] == np.sum((rep.serving_station == j) & (rep.classes == c))
    # MUEs are served by MBSs, UUEs by UABSs
    assert np.all(rep.serving_station[rep.classes <= CSF_MUE] < lay.n_mbs)
    assert np.all(rep.serving_station[rep.classes >= USF_UUE] >= lay.n_mbs)


# --- 5th percentile ---------------------------------------------------------

def test_fifth_percentile_examples():
    assert fifth_percentile_se(np.arange(1, 101)) == 5
    vals = np.random.default_rng(0).random(20)
    assert fifth_percentile_se(vals) == vals.min()
    assert fifth_percentile_se([7.0]) == 7.0
    assert fifth_percentile_se(np.arange(21)) == 1
    with pytest.raises(ValueError):
        fifth_percentile_se([])


@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=8))
def test_fifth_percentile_short_lists(values):
    assert fifth_percentile_se(values) == nth_smallest_5pct(values)


@given(st.lists(st.floats(0, 1e3, allow_nan=False), min_size=1, max_size=400))
def test_fifth_percentile_matches_oracle(values):
    assert fifth_percentile_se(values) == nth_smallest_5pct(values)


# --- full pipeline against the loop oracle ---------------------------------

@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize(
    "params",
    [
        dict(tau_db=0, alpha=1.0, rho_db=30, rho_p_db=-10),
        dict(tau_db=9, alpha=0.0, rho_db=20, rho_p_db=-5),
        dict(tau_db=6, alpha=0.5, rho_db=25, rho_p_db=-15),
    ],
)
def test_pipeline_matches_brute_force(seed, params):
    lay = random_layout(seed, n_mbs=4, n_uabs=3, n_ue=40)
    fading = np.random.default_rng(100 + seed).exponential(1.0, (40, 7))
    ses, names, serving = brute_force_se(
        lay.ue_positions.tolist(), lay.mbs_positions.tolist(), lay.uabs_positions.tolist(),
        46.0, 30.0, 4.0, fading=fading.tolist(), **params,
    )
    p = IcicParams(tau_db=params["tau_db"], alpha=params["alpha"], rho_db=params["rho_db"], rho_prime_db=params["rho_p_db"])
    rep = evaluate_links(compute_link_budget(lay, SPLM, fading), p)
    assert [CLASS_NAMES[c] for c in rep.classes] == names
    assert rep.serving_station.tolist() == serving
    assert np.allclose(rep.per_ue_se, ses, rtol=1e-9)
    assert rep.fifth_percentile_se == pytest.approx(nth_smallest_5pct(ses), rel=1e-9)


def test_evaluate_5pse_deterministic_and_seed_sensitive():
    cfg = ScenarioConfig(region=SimRegion(2, 2), rng_seed=3)
    lay = generate_ppp_layout(cfg, hex_grid_positions(4, cfg.region))
    p = IcicParams(tau_db=6, alpha=0.25)
    a = evaluate_5pse(lay, SPLM, p, rng=9)
    b = evaluate_5pse(lay, SPLM, p, rng=9)
    c = evaluate_5pse(lay, SPLM, p, rng=10)
    assert np.array_equal(a.per_ue_se, b.per_ue_se)
    assert not np.array_equal(a.per_ue_se, c.per_ue_se)
    assert a.meta["elapsed_s"] >= 0


def test_evaluate_rejects_empty_layouts():
    with pytest.raises(ValueError):
        evaluate_5pse(NetworkLayout([[0, 0, 30]], [], np.zeros((0, 3))), SPLM, IcicParams())
    with pytest.raises(ValueError):
        evaluate_5pse(NetworkLayout([], [], [[0, 0, 3]]), SPLM, IcicParams())


def test_report_exports(tmp_path):
    rep = evaluate_5pse(random_layout(0, n_ue=10), SPLM, IcicParams(), rng=0)
    rep.to_json(tmp_path / "r.json")
    rep.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "ue_index,class,serving_station,sir_db,se_bpshz"
    assert len(lines) == 11
    import json

    d = json.loads((tmp_path / "r.json").read_text())
    assert d["fifth_percentile_se"] == rep.fifth_percentile_se
    assert sum(d["class_counts"].values()) == 10


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), tau=st.sampled_from([0, 3, 6, 9, 12, 15]), alpha=st.floats(0, 1))
def test_se_nonnegative_and_bounded(seed, tau, alpha):
    rep = evaluate_5pse(random_layout(seed, n_ue=30), SPLM, IcicParams(tau_db=tau, alpha=alpha), rng=seed)
    assert np.all(rep.per_ue_se >= 0)
    assert np.all(rep.per_ue_se <= 10.0)
