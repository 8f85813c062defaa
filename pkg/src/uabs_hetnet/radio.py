"""SIRs under uncoordinated/coordinated subframes, CRE-biased association,
subframe scheduling, per-UE spectral efficiency and the 5th-percentile SE.

Everything here is vectorized over UEs: a :class:`LinkBudget` holds one
entry per UE, and the evaluation helpers work on whole arrays.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .propagation import PathLossModel, dbm_to_mw, draw_fading
from .scenario import NetworkLayout

USF_MUE, CSF_MUE, USF_UUE, CSF_UUE = 0, 1, 2, 3
CLASS_NAMES = ("USF-MUE", "CSF-MUE", "USF-UUE", "CSF-UUE")

MODE_NONE = "none"
MODE_EICIC = "eicic"
MODE_FEICIC = "feicic"
MODES = (MODE_NONE, MODE_EICIC, MODE_FEICIC)

DEFAULT_SE_CEILING = 10.0  # bps/Hz


def db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def lin_to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class IcicParams:
    """Network-wide ICIC setting.

    ``alpha`` scales MBS power in coordinated subframes (0 is eICIC with
    almost-blank subframes, 1 is no coordination).  ``beta`` is the share of
    uncoordinated subframes.  Thresholds are in dB and may be infinite.
    """

    tau_db: float = 0.0
    alpha: float = 1.0
    rho_db: float = 30.0
    rho_prime_db: float = -10.0
    beta: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if not math.isfinite(self.tau_db):
            raise ValueError("tau_db must be finite")
        if math.isnan(self.rho_db) or math.isnan(self.rho_prime_db):
            raise ValueError("scheduling thresholds must not be NaN")

    @classmethod
    def no_icic(cls, tau_db: float = 0.0, beta: float = 0.5) -> "IcicParams":
        """Full power in every subframe and every UE scheduled in USFs."""
        return cls(tau_db=tau_db, alpha=1.0, rho_db=math.inf, rho_prime_db=-math.inf, beta=beta)

    @property
    def tau(self) -> float:
        return 10.0 ** (self.tau_db / 10.0)

    @property
    def rho(self) -> float:
        return 10.0 ** (self.rho_db / 10.0)

    @property
    def rho_prime(self) -> float:
        return 10.0 ** (self.rho_prime_db / 10.0)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TierLinks:
    """Per-UE view of one tier: nearest station, its RSRP, and the rest."""

    nearest: np.ndarray  # -1 when the tier is empty
    signal_mw: np.ndarray
    others_mw: np.ndarray

    @property
    def present(self) -> np.ndarray:
        return self.nearest >= 0


def tier_links(ue: np.ndarray, stations: np.ndarray, eff_power_dbm: float, model: PathLossModel, fading: np.ndarray) -> TierLinks:
    """Nearest-station RSRP and summed RSRP of all other stations of a tier.

    ``fading`` is the ``(n_ue, n_stations)`` block of power gains for this tier.
    """
    n_ue = len(ue)
    if len(stations) == 0:
        zeros = np.zeros(n_ue)
        return TierLinks(np.full(n_ue, -1, dtype=np.intp), zeros, zeros.copy())
    dist = model.distances_m(ue, stations)
    pl = model.loss_db(ue, stations, dist)
    rx = dbm_to_mw(eff_power_dbm) * fading / 10.0 ** (pl / 10.0)
    rx[pl > model.max_pl_db] = 0.0

    rows = np.arange(n_ue)
    nearest = np.argmin(dist, axis=1)
    signal = rx[rows, nearest].copy()
    rx[rows, nearest] = 0.0
    return TierLinks(nearest, signal, rx.sum(axis=1))


@dataclass(frozen=True)
class LinkBudget:
    """Received powers for every UE: MOI/UOI RSRP and out-of-cell interference.

    Interference is split by tier so the coordinated-subframe total can be
    formed for any ``alpha``: all MBSs share one ABS pattern, so every
    interfering MBS is scaled by ``alpha`` while UABSs stay at full power.
    """

    moi_index: np.ndarray
    uoi_index: np.ndarray
    s_mbs_mw: np.ndarray
    s_uabs_mw: np.ndarray
    z_mbs_mw: np.ndarray
    z_uabs_mw: np.ndarray
    n_mbs: int
    n_uabs: int

    @classmethod
    def from_tiers(cls, mbs: TierLinks, uabs: TierLinks, n_mbs: int, n_uabs: int) -> "LinkBudget":
        return cls(
            moi_index=mbs.nearest,
            uoi_index=uabs.nearest,
            s_mbs_mw=mbs.signal_mw,
            s_uabs_mw=uabs.signal_mw,
            z_mbs_mw=mbs.others_mw,
            z_uabs_mw=uabs.others_mw,
            n_mbs=n_mbs,
            n_uabs=n_uabs,
        )

    @property
    def n_ue(self) -> int:
        return len(self.s_mbs_mw)

    @property
    def z_usf_mw(self) -> np.ndarray:
        return self.z_mbs_mw + self.z_uabs_mw

    def z_csf_mw(self, alpha: float) -> np.ndarray:
        return alpha * self.z_mbs_mw + self.z_uabs_mw


def compute_link_budget(layout: NetworkLayout, model: PathLossModel, fading: np.ndarray) -> LinkBudget:
    """Link budget for every UE of ``layout``.

    ``fading`` has shape ``(n_ue, n_mbs + n_uabs)``, MBS columns first.
    """
    if layout.n_stations == 0:
        raise ValueError("layout has neither MBSs nor UABSs")
    fading = np.asarray(fading, dtype=float)
    if fading.shape != (layout.n_ue, layout.n_stations):
        raise ValueError(f"fading must have shape {(layout.n_ue, layout.n_stations)}, got {fading.shape}")
    ue = layout.ue_positions
    mbs = tier_links(ue, layout.mbs_positions, layout.mbs_eff_power_dbm, model, fading[:, : layout.n_mbs])
    uabs = tier_links(ue, layout.uabs_positions, layout.uabs_eff_power_dbm, model, fading[:, layout.n_mbs :])
    return LinkBudget.from_tiers(mbs, uabs, layout.n_mbs, layout.n_uabs)


def _ratio(num, den):
    # x/0 -> inf for a live signal, 0 when there is no signal at all
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return np.where(den > 0, out, np.where(num > 0, np.inf, 0.0))


@dataclass(frozen=True)
class SirSet:
    gamma: np.ndarray
    gamma_csf: np.ndarray
    gamma_prime: np.ndarray
    gamma_prime_csf: np.ndarray


def sir_set(link: LinkBudget, alpha: float) -> SirSet:
    s_m, s_u = link.s_mbs_mw, link.s_uabs_mw
    z_usf = link.z_usf_mw
    z_csf = link.z_csf_mw(alpha)
    return SirSet(
        gamma=_ratio(s_m, s_u + z_usf),
        gamma_csf=_ratio(alpha * s_m, s_u + z_csf),
        gamma_prime=_ratio(s_u, s_m + z_usf),
        gamma_prime_csf=_ratio(s_u, alpha * s_m + z_csf),
    )


def associate_and_schedule(sirs: SirSet, params: IcicParams, has_moi=True, has_uoi=True):
    """Class code (``USF_MUE`` ... ``CSF_UUE``) for each UE.

    A UE goes to its MOI when ``gamma > tau * gamma_prime`` (ties go to the
    UOI), then lands in USF or CSF by comparing against ``rho`` / ``rho_prime``.
    A UE without a candidate in one tier is forced onto the other.
    """
    gamma = np.asarray(sirs.gamma, dtype=float)
    gamma_p = np.asarray(sirs.gamma_prime, dtype=float)
    with np.errstate(invalid="ignore"):
        biased = params.tau * gamma_p
    mue = np.where(~np.asarray(has_uoi), True, np.where(~np.asarray(has_moi), False, gamma > biased))
    cls = np.where(
        mue,
        np.where(gamma <= params.rho, USF_MUE, CSF_MUE),
        np.where(gamma_p > params.rho_prime, USF_UUE, CSF_UUE),
    )
    return int(cls) if cls.ndim == 0 else cls


def class_rates(cls: np.ndarray, sirs: SirSet, beta: float, se_ceiling: float = DEFAULT_SE_CEILING) -> np.ndarray:
    """Per-UE SE before dividing by the cell load, ``log2(1+SIR)`` capped at ``se_ceiling``."""
    sir = np.choose(cls, (sirs.gamma, sirs.gamma_csf, sirs.gamma_prime, sirs.gamma_prime_csf))
    share = np.where((cls == USF_MUE) | (cls == USF_UUE), beta, 1.0 - beta)
    return share * np.minimum(np.log2(1.0 + sir), se_ceiling)


def per_ue_se(cls, sirs: SirSet, beta: float, load, se_ceiling: float = DEFAULT_SE_CEILING):
    """Round-robin SE: the class rate shared among the ``load`` UEs of the
    same class in the same cell (``load`` counts the UE itself)."""
    load = np.asarray(load)
    if np.any(load < 1):
        raise ValueError("load counter must be >= 1 for every scheduled UE")
    se = class_rates(np.asarray(cls), sirs, beta, se_ceiling) / load
    return float(se) if se.ndim == 0 else se


def fifth_percentile_se(values) -> float:
    """The ``ceil(0.05 * N)``-th smallest value."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("need at least one value")
    k = (v.size + 19) // 20
    return float(np.partition(v, k - 1)[k - 1])


@dataclass
class SeReport:
    per_ue_se: np.ndarray
    fifth_percentile_se: float
    cell_loads: np.ndarray  # (n_stations, 4) columns follow CLASS_NAMES
    params_used: IcicParams
    classes: np.ndarray
    serving_station: np.ndarray
    sir_db: np.ndarray
    n_mbs: int
    meta: dict = field(default_factory=dict)

    @property
    def n_ue(self) -> int:
        return len(self.per_ue_se)

    def class_counts(self) -> dict[str, int]:
        totals = self.cell_loads.sum(axis=0)
        return {name: int(n) for name, n in zip(CLASS_NAMES, totals)}

    def to_dict(self) -> dict:
        return {
            "fifth_percentile_se": self.fifth_percentile_se,
            "params_used": self.params_used.as_dict(),
            "n_ue": self.n_ue,
            "n_mbs": self.n_mbs,
            "n_uabs": len(self.cell_loads) - self.n_mbs,
            "class_counts": self.class_counts(),
            "cell_loads": self.cell_loads.tolist(),
            "per_ue_se": self.per_ue_se.tolist(),
            "meta": self.meta,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, default=_json_default)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["ue_index", "class", "serving_station", "sir_db", "se_bpshz"])
            for i in range(self.n_ue):
                writer.writerow([
                    i,
                    CLASS_NAMES[self.classes[i]],
                    int(self.serving_station[i]),
                    repr(float(self.sir_db[i])),
                    repr(float(self.per_ue_se[i])),
                ])


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def evaluate_links(link: LinkBudget, params: IcicParams, se_ceiling: float = DEFAULT_SE_CEILING, sirs: SirSet | None = None) -> SeReport:
    """Association, scheduling, loads, per-UE SE and the 5pSE for a fixed link budget.

    ``sirs`` may be passed in when already computed for ``params.alpha``.
    """
    if link.n_ue == 0:
        raise ValueError("no UEs to evaluate")
    if sirs is None:
        sirs = sir_set(link, params.alpha)
    has_moi = link.moi_index >= 0
    has_uoi = link.uoi_index >= 0
    if not np.all(has_moi | has_uoi):
        raise ValueError("a UE has neither an MOI nor a UOI")
    cls = associate_and_schedule(sirs, params, has_moi, has_uoi)
    is_mue = cls <= CSF_MUE
    serving = np.where(is_mue, link.moi_index, link.n_mbs + link.uoi_index)

    n_stations = link.n_mbs + link.n_uabs
    loads = np.bincount(serving * 4 + cls, minlength=n_stations * 4).reshape(n_stations, 4)
    se = per_ue_se(cls, sirs, params.beta, loads[serving, cls], se_ceiling)
    sir = np.choose(cls, (sirs.gamma, sirs.gamma_csf, sirs.gamma_prime, sirs.gamma_prime_csf))
    return SeReport(
        per_ue_se=se,
        fifth_percentile_se=fifth_percentile_se(se),
        cell_loads=loads,
        params_used=params,
        classes=cls,
        serving_station=serving,
        sir_db=lin_to_db(sir),
        n_mbs=link.n_mbs,
    )


def draw_layout_fading(layout: NetworkLayout, rng) -> np.ndarray:
    """Fading matrix for every (UE, station) link, MBS columns first."""
    return draw_fading(rng, size=(layout.n_ue, layout.n_stations))


def evaluate_5pse(layout: NetworkLayout, model: PathLossModel, params: IcicParams, rng=None, se_ceiling: float = DEFAULT_SE_CEILING) -> SeReport:
    """Full pipeline for one drop: fading, link budgets, SIRs, classes, SE, 5pSE.

    ``rng`` is a seed or a ``numpy.random.Generator``; a fixed seed makes the
    result reproducible bit for bit.
    """
    if layout.n_ue == 0:
        raise ValueError("layout has no UEs")
    start = time.perf_counter()
    fading = draw_layout_fading(layout, rng)
    link = compute_link_budget(layout, model, fading)
    report = evaluate_links(link, params, se_ceiling)
    report.meta["elapsed_s"] = time.perf_counter() - start
    return report
