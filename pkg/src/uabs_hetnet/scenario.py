"""Network topologies: PPP drops of MBSs and UEs, MBS destruction, UABS placement.

Horizontal coordinates are kept in km and altitudes in meters, so every
position array has columns ``(x_km, y_km, z_m)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

MAX_RESAMPLE_ATTEMPTS = 1000

NODE_MBS = "mbs"
NODE_UABS = "uabs"
NODE_UE = "ue"


@dataclass(frozen=True)
class SimRegion:
    """Rectangular simulation area, ``width`` x ``height`` km anchored at ``(x0, y0)``."""

    width: float = 10.0
    height: float = 10.0
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"region must have positive area, got {self.width} x {self.height} km")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x0 + self.width / 2, self.y0 + self.height / 2)

    def contains(self, xy: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        xy = np.atleast_2d(xy)
        return (
            (xy[:, 0] >= self.x0 - tol)
            & (xy[:, 0] <= self.x0 + self.width + tol)
            & (xy[:, 1] >= self.y0 - tol)
            & (xy[:, 1] <= self.y0 + self.height + tol)
        )

    def uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        x = rng.uniform(self.x0, self.x0 + self.width, size=n)
        y = rng.uniform(self.y0, self.y0 + self.height, size=n)
        return np.column_stack([x, y])


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to draw one network realization.

    ``n_mbs`` / ``n_ue`` override the Poisson counts when set; they are used
    for small hand-sized instances.  Antenna attenuation factors ``k_mbs`` and
    ``k_uabs`` are linear and scale the transmit powers into effective powers.
    """

    lambda_mbs: float = 4.0  # per km^2
    lambda_ue: float = 100.0  # per km^2
    n_uabs: int = 0
    destroy_fraction: float = 0.0
    region: SimRegion = field(default_factory=SimRegion)
    mbs_height_m: float = 30.0
    uabs_height_m: float = 100.0
    ue_height_m: float = 3.0
    d_mn_min_m: float = 30.0
    d_mu_min_m: float = 10.0
    p_mbs_dbm: float = 46.0
    p_uabs_dbm: float = 30.0
    k_mbs: float = 1.0
    k_uabs: float = 1.0
    rng_seed: int = 0
    n_mbs: int | None = None
    n_ue: int | None = None

    def __post_init__(self):
        if not (self.lambda_mbs > 0 and self.lambda_ue > 0):
            raise ValueError("node intensities must be positive")
        if not 0.0 <= self.destroy_fraction <= 1.0:
            raise ValueError(f"destroy_fraction must be in [0, 1], got {self.destroy_fraction}")
        if self.n_uabs < 0:
            raise ValueError("n_uabs must be >= 0")
        if self.k_mbs <= 0 or self.k_uabs <= 0:
            raise ValueError("antenna attenuation factors must be positive")
        for name in ("n_mbs", "n_ue"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def mbs_eff_power_dbm(self) -> float:
        return self.p_mbs_dbm + 10 * math.log10(self.k_mbs)

    @property
    def uabs_eff_power_dbm(self) -> float:
        return self.p_uabs_dbm + 10 * math.log10(self.k_uabs)


def _as_points(arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 3))
    return arr.reshape(-1, 3)


@dataclass(frozen=True, eq=False)
class NetworkLayout:
    """Node positions of both tiers and the UEs, plus effective transmit powers."""

    mbs_positions: np.ndarray
    uabs_positions: np.ndarray
    ue_positions: np.ndarray
    mbs_eff_power_dbm: float = 46.0
    uabs_eff_power_dbm: float = 30.0

    def __post_init__(self):
        for name in ("mbs_positions", "uabs_positions", "ue_positions"):
            object.__setattr__(self, name, _as_points(getattr(self, name)))

    @property
    def n_mbs(self) -> int:
        return len(self.mbs_positions)

    @property
    def n_uabs(self) -> int:
        return len(self.uabs_positions)

    @property
    def n_ue(self) -> int:
        return len(self.ue_positions)

    @property
    def n_stations(self) -> int:
        return self.n_mbs + self.n_uabs

    def with_uabs(self, positions) -> "NetworkLayout":
        return replace(self, uabs_positions=_as_points(positions))

    def same_as(self, other: "NetworkLayout") -> bool:
        return (
            np.array_equal(self.mbs_positions, other.mbs_positions)
            and np.array_equal(self.uabs_positions, other.uabs_positions)
            and np.array_equal(self.ue_positions, other.ue_positions)
            and self.mbs_eff_power_dbm == other.mbs_eff_power_dbm
            and self.uabs_eff_power_dbm == other.uabs_eff_power_dbm
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node_type", "x_km", "y_km", "z_m"])
            for kind, pts in (
                (NODE_MBS, self.mbs_positions),
                (NODE_UABS, self.uabs_positions),
                (NODE_UE, self.ue_positions),
            ):
                for x, y, z in pts:
                    writer.writerow([kind, repr(float(x)), repr(float(y)), repr(float(z))])

    @classmethod
    def from_csv(cls, path, mbs_eff_power_dbm: float = 46.0, uabs_eff_power_dbm: float = 30.0):
        groups: dict[str, list] = {NODE_MBS: [], NODE_UABS: [], NODE_UE: []}
        with open(Path(path), newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                kind = row["node_type"].strip().lower()
                if kind not in groups:
                    raise ValueError(f"unknown node_type {row['node_type']!r}")
                groups[kind].append([float(row["x_km"]), float(row["y_km"]), float(row["z_m"])])
        return cls(
            mbs_positions=groups[NODE_MBS],
            uabs_positions=groups[NODE_UABS],
            ue_positions=groups[NODE_UE],
            mbs_eff_power_dbm=mbs_eff_power_dbm,
            uabs_eff_power_dbm=uabs_eff_power_dbm,
        )


def horizontal_distance_m(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise horizontal distances (m) between two ``(N, 3)`` position arrays."""
    dx = a[:, None, 0] - b[None, :, 0]
    dy = a[:, None, 1] - b[None, :, 1]
    return np.hypot(dx, dy) * 1000.0


def _too_close(ue_xy: np.ndarray, stations: np.ndarray, min_m: float) -> np.ndarray:
    if len(stations) == 0 or min_m <= 0 or len(ue_xy) == 0:
        return np.zeros(len(ue_xy), dtype=bool)
    pts = np.column_stack([ue_xy, np.zeros(len(ue_xy))])
    return (horizontal_distance_m(pts, stations) < min_m).any(axis=1)


def generate_ppp_layout(cfg: ScenarioConfig, uabs_positions=None) -> NetworkLayout:
    """Draw MBSs and UEs as homogeneous PPPs over ``cfg.region``.

    UEs closer than the minimum separations to any MBS (or to any of the
    given ``uabs_positions``) are redrawn uniformly until they comply.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    region = cfg.region
    n_mbs = cfg.n_mbs if cfg.n_mbs is not None else rng.poisson(cfg.lambda_mbs * region.area)
    n_ue = cfg.n_ue if cfg.n_ue is not None else rng.poisson(cfg.lambda_ue * region.area)

    mbs_xy = region.uniform(rng, n_mbs)
    mbs = np.column_stack([mbs_xy, np.full(n_mbs, cfg.mbs_height_m)])
    uabs = _as_points([] if uabs_positions is None else uabs_positions)

    ue_xy = region.uniform(rng, n_ue)
    bad = _too_close(ue_xy, mbs, cfg.d_mn_min_m) | _too_close(ue_xy, uabs, cfg.d_mu_min_m)
    attempts = 0
    while bad.any():
        attempts += 1
        if attempts > MAX_RESAMPLE_ATTEMPTS:
            raise RuntimeError(
                f"{int(bad.sum())} UEs still violate the minimum distances after "
                f"{MAX_RESAMPLE_ATTEMPTS} redraws; station density too high for the constraint"
            )
        idx = np.flatnonzero(bad)
        ue_xy[idx] = region.uniform(rng, len(idx))
        sub = ue_xy[idx]
        bad[idx] = _too_close(sub, mbs, cfg.d_mn_min_m) | _too_close(sub, uabs, cfg.d_mu_min_m)

    ue = np.column_stack([ue_xy, np.full(n_ue, cfg.ue_height_m)])
    return NetworkLayout(
        mbs_positions=mbs,
        uabs_positions=uabs,
        ue_positions=ue,
        mbs_eff_power_dbm=cfg.mbs_eff_power_dbm,
        uabs_eff_power_dbm=cfg.uabs_eff_power_dbm,
    )


def n_destroyed(n_mbs: int, fraction: float) -> int:
    # floor, guarded against 0.975*400 = 389.99999...
    return min(n_mbs, int(math.floor(fraction * n_mbs + 1e-9)))


def destroy_mbs(layout: NetworkLayout, fraction: float, seed=None) -> NetworkLayout:
    """Remove ``floor(fraction * N_mbs)`` MBSs chosen uniformly at random."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    k = n_destroyed(layout.n_mbs, fraction)
    if k == 0:
        return layout
    rng = np.random.default_rng(seed)
    removed = rng.choice(layout.n_mbs, size=k, replace=False)
    keep = np.setdiff1d(np.arange(layout.n_mbs), removed)
    return replace(layout, mbs_positions=layout.mbs_positions[keep])


def hex_grid_positions(n_uabs: int, region: SimRegion, altitude: float = 100.0) -> np.ndarray:
    """Row-offset hexagonal lattice of ``n_uabs`` points centered in ``region``.

    The horizontal pitch is ``sqrt(area / n_uabs)``; rows are ``pitch*sqrt(3)/2``
    apart and every odd row is shifted right by half a pitch.  Rows are filled
    left to right, bottom to top.
    """
    if n_uabs < 1:
        raise ValueError("n_uabs must be >= 1")
    pitch = math.sqrt(region.area / n_uabs)
    n_cols = max(1, round(region.width / pitch))
    dy = pitch * math.sqrt(3) / 2

    pts = []
    for i in range(n_uabs):
        row, col = divmod(i, n_cols)
        pts.append((col * pitch + (pitch / 2 if row % 2 else 0.0), row * dy))
    xy = np.array(pts, dtype=float)

    lo = xy.min(axis=0)
    hi = xy.max(axis=0)
    cx, cy = region.center
    xy += np.array([cx, cy]) - (lo + hi) / 2
    if not region.contains(xy).all():
        raise ValueError(f"cannot fit {n_uabs} lattice points inside a {region.width}x{region.height} km region")
    return np.column_stack([xy, np.full(n_uabs, float(altitude))])
