"""Run configuration: a YAML file validated by pydantic before any compute.

Unknown keys are rejected at every level.  ``schema_version`` guards against
silently reading a file written for a different layout of this schema.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .gaopt import GaConfig
from .harness import ExperimentSpec
from .hexopt import DEFAULT_ALPHA, DEFAULT_RHO_DB, DEFAULT_RHO_PRIME_DB, DEFAULT_TAU_DB, IcicGrid
from .propagation import PathLossModel
from .scenario import ScenarioConfig, SimRegion

SCHEMA_VERSION = 1
OUTPUT_ENV_VAR = "UABS_HETNET_OUT"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScenarioSection(_Strict):
    width_km: float = Field(5.0, gt=0)
    height_km: float = Field(5.0, gt=0)
    lambda_mbs: float = Field(4.0, gt=0)
    lambda_ue: float = Field(100.0, gt=0)
    mbs_height_m: float = Field(30.0, gt=0)
    uabs_height_m: float = Field(100.0, gt=0)
    ue_height_m: float = Field(3.0, gt=0)
    d_mn_min_m: float = Field(30.0, ge=0)
    d_mu_min_m: float = Field(10.0, ge=0)
    p_mbs_dbm: float = 46.0
    p_uabs_dbm: float = 30.0
    k_mbs: float = Field(1.0, gt=0)
    k_uabs: float = Field(1.0, gt=0)

    def build(self) -> ScenarioConfig:
        return ScenarioConfig(
            lambda_mbs=self.lambda_mbs,
            lambda_ue=self.lambda_ue,
            region=SimRegion(self.width_km, self.height_km),
            mbs_height_m=self.mbs_height_m,
            uabs_height_m=self.uabs_height_m,
            ue_height_m=self.ue_height_m,
            d_mn_min_m=self.d_mn_min_m,
            d_mu_min_m=self.d_mu_min_m,
            p_mbs_dbm=self.p_mbs_dbm,
            p_uabs_dbm=self.p_uabs_dbm,
            k_mbs=self.k_mbs,
            k_uabs=self.k_uabs,
        )


class PropagationSection(_Strict):
    model: Literal["splm", "ohplm"] = "splm"
    delta: float = Field(4.0, gt=0)
    fc_mhz: float = Field(763.0, ge=150, le=1500)
    max_pl_db: float | None = Field(None, gt=0)
    standard_hata: bool = False

    def build(self) -> PathLossModel:
        return PathLossModel(
            variant=self.model,
            delta=self.delta,
            fc_mhz=self.fc_mhz,
            max_pl_db=self.max_pl_db,
            standard_hata=self.standard_hata,
        )


class GridSection(_Strict):
    tau_db: list[float] = Field(default_factory=lambda: list(DEFAULT_TAU_DB), min_length=1)
    alpha: list[float] = Field(default_factory=lambda: list(DEFAULT_ALPHA), min_length=1)
    rho_db: list[float] = Field(default_factory=lambda: list(DEFAULT_RHO_DB), min_length=1)
    rho_prime_db: list[float] = Field(default_factory=lambda: list(DEFAULT_RHO_PRIME_DB), min_length=1)

    @field_validator("alpha")
    @classmethod
    def _alpha_range(cls, v):
        if any(not 0 <= a <= 1 for a in v):
            raise ValueError("alpha values must lie in [0, 1]")
        return v

    def build(self) -> IcicGrid:
        return IcicGrid(tuple(self.tau_db), tuple(self.alpha), tuple(self.rho_db), tuple(self.rho_prime_db))


class GaSection(_Strict):
    population_size: int = Field(60, ge=2)
    generations: int = Field(100, ge=1)
    crossover_prob: float = Field(0.7, ge=0, le=1)
    mutation_prob: float = Field(0.1, ge=0, le=1)
    elitism_count: int = Field(1, ge=0)
    crossover: Literal["uniform", "arithmetic"] = "uniform"
    mutation_scope: Literal["child", "gene", "capped"] = "capped"
    mutation: Literal["uniform", "gaussian", "mixed"] = "mixed"
    mutation_sigma: float = Field(0.1, gt=0)
    tau_db: tuple[float, float] = (0.0, 15.0)
    alpha: tuple[float, float] = (0.0, 1.0)
    rho_db: tuple[float, float] = (20.0, 40.0)
    rho_prime_db: tuple[float, float] = (-20.0, -5.0)

    def build(self) -> GaConfig:
        return GaConfig(
            population_size=self.population_size,
            generations=self.generations,
            crossover_prob=self.crossover_prob,
            mutation_prob=self.mutation_prob,
            elitism_count=self.elitism_count,
            crossover=self.crossover,
            mutation_scope=self.mutation_scope,
            mutation=self.mutation,
            mutation_sigma=self.mutation_sigma,
        )

    def bound_overrides(self) -> dict:
        return {"tau_db": self.tau_db, "alpha": self.alpha, "rho_db": self.rho_db, "rho_prime_db": self.rho_prime_db}


class ExperimentSection(_Strict):
    deployment: Literal["hex", "ga"] = "hex"
    icic_mode: Literal["none", "eicic", "feicic"] = "feicic"
    n_uabs: list[int] = Field(default_factory=lambda: [4, 16], min_length=1)
    destroy_fractions: list[float] = Field(default_factory=lambda: [0.5, 0.975], min_length=1)
    n_drops: int = Field(20, ge=1)
    beta: float = Field(0.5, gt=0, lt=1)
    se_ceiling: float = Field(10.0, gt=0)

    @field_validator("n_uabs")
    @classmethod
    def _nonneg(cls, v):
        if any(n < 0 for n in v):
            raise ValueError("n_uabs values must be >= 0")
        return v

    @field_validator("destroy_fractions")
    @classmethod
    def _fractions(cls, v):
        if any(not 0 <= f <= 1 for f in v):
            raise ValueError("destroy fractions must lie in [0, 1]")
        return v


class RunConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    output_dir: str | None = None
    verbosity: int = Field(1, ge=0, le=3)
    seed: int = Field(0, ge=0)
    jobs: int | None = Field(None, ge=1)
    scenario: ScenarioSection = Field(default_factory=ScenarioSection)
    propagation: PropagationSection = Field(default_factory=PropagationSection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    grid: GridSection = Field(default_factory=GridSection)
    ga: GaSection = Field(default_factory=GaSection)

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_ENV_VAR) or "uabs_out")

    def resolved_jobs(self) -> int:
        return self.jobs or os.cpu_count() or 1

    def to_spec(self) -> ExperimentSpec:
        exp = self.experiment
        return ExperimentSpec(
            scenario=self.scenario.build(),
            model=self.propagation.build(),
            deployment=exp.deployment,
            icic_mode=exp.icic_mode,
            n_uabs_list=tuple(exp.n_uabs),
            destroy_fractions=tuple(exp.destroy_fractions),
            n_drops=exp.n_drops,
            grid=self.grid.build(),
            ga=self.ga.build(),
            ga_bounds=self.ga.bound_overrides(),
            beta=exp.beta,
            master_seed=self.seed,
            jobs=self.resolved_jobs(),
            se_ceiling=exp.se_ceiling,
        )


PRESETS = {
    "desk": {},
    "full": {
        "scenario": {"width_km": 10.0, "height_km": 10.0},
        "experiment": {"n_uabs": [4, 16, 36, 60], "n_drops": 100},
    },
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path=None, preset: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Preset, then file, then overrides; validated once at the end."""
    data: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        data = _merge(data, PRESETS[preset])
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: top level must be a mapping")
        data = _merge(data, loaded)
    if overrides:
        data = _merge(data, overrides)
    return RunConfig.model_validate(data)


def dump_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.model_dump(mode="json"), fh, sort_keys=False)
