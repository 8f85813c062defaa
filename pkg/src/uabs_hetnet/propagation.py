"""Path loss (simplified exponent law and suburban Okumura-Hata), Rayleigh
fading draws and RSRP in the linear domain."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .scenario import NetworkLayout

SPLM = "splm"
OHPLM = "ohplm"

SPLM_MAX_PL_DB = 160.0
OHPLM_MAX_PL_DB = 225.0


@dataclass(frozen=True)
class PathLossModel:
    """Propagation model settings.

    ``delta`` is only used by SPLM, ``fc_mhz`` only by OHPLM.  Links whose
    loss exceeds ``max_pl_db`` carry no power.  ``standard_hata`` switches the
    UE-height correction to the textbook Hata form.
    """

    variant: str = SPLM
    delta: float = 4.0
    fc_mhz: float = 763.0
    max_pl_db: float | None = None
    standard_hata: bool = False
    min_distance_m: float = 1.0

    def __post_init__(self):
        if self.variant not in (SPLM, OHPLM):
            raise ValueError(f"unknown path-loss variant {self.variant!r}")
        if self.delta <= 0:
            raise ValueError("path-loss exponent must be positive")
        if self.variant == OHPLM and not 150.0 <= self.fc_mhz <= 1500.0:
            raise ValueError(f"Okumura-Hata needs 150 <= fc <= 1500 MHz, got {self.fc_mhz}")
        if self.max_pl_db is None:
            cap = SPLM_MAX_PL_DB if self.variant == SPLM else OHPLM_MAX_PL_DB
            object.__setattr__(self, "max_pl_db", cap)
        if self.max_pl_db <= 0:
            raise ValueError("max_pl_db must be positive")
        if self.min_distance_m <= 0:
            raise ValueError("min_distance_m must be positive")

    @classmethod
    def splm(cls, delta: float = 4.0, **kw) -> "PathLossModel":
        return cls(variant=SPLM, delta=delta, **kw)

    @classmethod
    def ohplm(cls, fc_mhz: float = 763.0, **kw) -> "PathLossModel":
        return cls(variant=OHPLM, fc_mhz=fc_mhz, **kw)

    def distances_m(self, ue: np.ndarray, stations: np.ndarray) -> np.ndarray:
        """UE-to-station distance matrix in meters.

        SPLM works on the 3-D separation; OHPLM on the horizontal one, since
        antenna heights already enter through its A and B factors.
        """
        dx = (ue[:, None, 0] - stations[None, :, 0]) * 1000.0
        dy = (ue[:, None, 1] - stations[None, :, 1]) * 1000.0
        d2 = dx * dx + dy * dy
        if self.variant == SPLM:
            dz = ue[:, None, 2] - stations[None, :, 2]
            d2 += dz * dz
        return np.maximum(np.sqrt(d2), self.min_distance_m)

    def loss_db(self, ue: np.ndarray, stations: np.ndarray, dist_m: np.ndarray | None = None) -> np.ndarray:
        """Path-loss matrix (dB) of shape ``(len(ue), len(stations))``."""
        if dist_m is None:
            dist_m = self.distances_m(ue, stations)
        if self.variant == SPLM:
            return splm_path_loss(dist_m, self.delta)

        out = np.empty_like(dist_m)
        ue_heights = np.unique(ue[:, 2]) if len(ue) else np.array([])
        bs_heights = np.unique(stations[:, 2]) if len(stations) else np.array([])
        for h_ue in ue_heights:
            rows = ue[:, 2] == h_ue
            for h_bs in bs_heights:
                cols = stations[:, 2] == h_bs
                f = ohplm_factors(self.fc_mhz, h_bs, h_ue, standard=self.standard_hata, warn=False)
                block = ohplm_path_loss(dist_m[np.ix_(rows, cols)] / 1000.0, f)
                out[np.ix_(rows, cols)] = block
        # extrapolation below 1 km can go negative
        return np.maximum(out, 0.0)


@dataclass(frozen=True)
class OhplmFactors:
    a_factor: float
    b_factor: float
    c_factor: float
    a_hue: float


def splm_path_loss(d_m, delta: float = 4.0):
    """``10 * delta * log10(d)`` with ``d`` in meters."""
    d = np.asarray(d_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = 10.0 * delta * np.log10(d)
    return float(out) if out.ndim == 0 else out


def ue_height_correction(fc_mhz: float, h_ue_m: float, standard: bool = False) -> float:
    log_fc = math.log10(fc_mhz)
    if standard:
        return (1.1 * log_fc - 0.7) * h_ue_m - (1.56 * log_fc - 0.8)
    return 1.1 * log_fc - 0.7 * h_ue_m - 1.56 * log_fc - 0.8


def ohplm_factors(fc_mhz: float, h_bs_m: float, h_ue_m: float, standard: bool = False, warn: bool = True) -> OhplmFactors:
    """Suburban Okumura-Hata factors A, B, C and the UE-height correction."""
    if fc_mhz <= 0 or h_bs_m <= 0 or h_ue_m <= 0:
        raise ValueError("frequency and antenna heights must be positive")
    if warn and not (150 <= fc_mhz <= 1500 and 30 <= h_bs_m <= 200 and 1 <= h_ue_m <= 10):
        warnings.warn(
            f"Okumura-Hata evaluated outside its validity range (fc={fc_mhz}, h_bs={h_bs_m}, h_ue={h_ue_m})",
            stacklevel=2,
        )
    log_fc = math.log10(fc_mhz)
    a_hue = ue_height_correction(fc_mhz, h_ue_m, standard)
    a = 69.55 + 26.16 * log_fc - 13.82 * math.log10(h_bs_m) - a_hue
    b = 44.9 - 6.55 * math.log10(h_bs_m)
    c = -2.0 * math.log10(fc_mhz / 28.0) ** 2 - 5.4
    return OhplmFactors(a_factor=a, b_factor=b, c_factor=c, a_hue=a_hue)


def ohplm_path_loss(d_km, factors: OhplmFactors):
    d = np.asarray(d_km, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = factors.a_factor + factors.b_factor * np.log10(d) + factors.c_factor
    return float(out) if out.ndim == 0 else out


def dbm_to_mw(p_dbm):
    return 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def rsrp_linear(eff_power_dbm, pl_db, h, max_pl_db: float = math.inf):
    """Received power in mW; zero wherever the path loss exceeds ``max_pl_db``."""
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ValueError("fading power must be positive")
    pl = np.asarray(pl_db, dtype=float)
    p = dbm_to_mw(eff_power_dbm) * h / 10.0 ** (pl / 10.0)
    p = np.where(pl > max_pl_db, 0.0, p)
    return float(p) if p.ndim == 0 else p


def draw_fading(rng, size=None):
    """Unit-mean exponential power gains (Rayleigh fading).

    Zero has probability zero under Exp(1) but can come out of a
    floating-point generator, so such draws are nudged to the smallest
    positive normal double.
    """
    rng = np.random.default_rng(rng)
    h = rng.exponential(1.0, size=size)
    return np.maximum(h, np.finfo(float).tiny)


@dataclass(frozen=True)
class EmpiricalCdf:
    losses_db: np.ndarray

    def __len__(self):
        return len(self.losses_db)

    @property
    def probabilities(self) -> np.ndarray:
        n = len(self.losses_db)
        return np.arange(1, n + 1) / n

    def quantile(self, q: float) -> float:
        if not 0.0 <= q <= 1.0:
            raise ValueError("quantile must be in [0, 1]")
        n = len(self.losses_db)
        k = max(1, math.ceil(q * n - 1e-12))
        return float(self.losses_db[k - 1])

    def __call__(self, x) -> np.ndarray:
        return np.searchsorted(self.losses_db, x, side="right") / len(self.losses_db)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["loss_db", "cum_prob"])
            for loss, p in zip(self.losses_db, self.probabilities):
                writer.writerow([repr(float(loss)), repr(float(p))])


def path_loss_cdf(layout: NetworkLayout, model: PathLossModel) -> EmpiricalCdf:
    """Empirical CDF of the path loss over every UE-station pair of both tiers."""
    stations = np.vstack([layout.mbs_positions, layout.uabs_positions])
    if layout.n_ue == 0 or len(stations) == 0:
        raise ValueError("layout needs at least one UE and one station")
    losses = model.loss_db(layout.ue_positions, stations).ravel()
    return EmpiricalCdf(np.sort(losses))
