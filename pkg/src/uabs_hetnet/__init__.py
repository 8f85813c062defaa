"""Monte-Carlo simulation and optimization of UAV-assisted LTE-A HetNets
for public safety: PPP drops, path loss, eICIC/FeICIC with cell range
expansion, and UABS placement by hexagonal grid or genetic algorithm."""

from .gaopt import GaBounds, GaConfig, GaResult, ga_optimize
from .harness import ExperimentSpec, desk_preset, full_preset, run_experiment, sweep_cre
from .hexopt import GridResult, IcicGrid, grid_search_icic
from .propagation import PathLossModel, path_loss_cdf
from .radio import IcicParams, SeReport, evaluate_5pse, fifth_percentile_se
from .scenario import NetworkLayout, ScenarioConfig, SimRegion, destroy_mbs, generate_ppp_layout, hex_grid_positions

__version__ = "0.1.0"

__all__ = [
    "ExperimentSpec",
    "GaBounds",
    "GaConfig",
    "GaResult",
    "GridResult",
    "IcicGrid",
    "IcicParams",
    "NetworkLayout",
    "PathLossModel",
    "ScenarioConfig",
    "SeReport",
    "SimRegion",
    "desk_preset",
    "destroy_mbs",
    "evaluate_5pse",
    "fifth_percentile_se",
    "ga_optimize",
    "generate_ppp_layout",
    "grid_search_icic",
    "hex_grid_positions",
    "full_preset",
    "path_loss_cdf",
    "run_experiment",
    "sweep_cre",
]
