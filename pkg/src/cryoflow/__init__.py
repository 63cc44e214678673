"""Coupled heat and water transport in freezing soil columns with an ET sink."""

from .config import dump_config, parse_config
from .engine import active_layer_thickness, coupled_step, run_column
from .ensemble import run_ensemble
from .errors import ConfigError, ConvergenceFailure, NumericalError, SimulationAbort
from .forcing import ClimateForcing, load_forcing, sinusoidal_forcing
from .mesh import ColumnMesh, ColumnState, SoilLayer, SoilProfile, build_mesh
from .oracles import StefanProblem, erfc_profile, stefan_front, stefan_lambda
from .output import write_outputs
from .scenario import ScenarioConfig

__all__ = [
    "ClimateForcing",
    "ColumnMesh",
    "ColumnState",
    "ConfigError",
    "ConvergenceFailure",
    "NumericalError",
    "ScenarioConfig",
    "SimulationAbort",
    "SoilLayer",
    "SoilProfile",
    "StefanProblem",
    "active_layer_thickness",
    "build_mesh",
    "coupled_step",
    "dump_config",
    "erfc_profile",
    "load_forcing",
    "parse_config",
    "run_column",
    "run_ensemble",
    "sinusoidal_forcing",
    "stefan_front",
    "stefan_lambda",
    "write_outputs",
]
