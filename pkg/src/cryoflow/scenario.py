"""Scenario description: one slope realization with its run controls."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constitutive import freezing_partition, water_retention
from .errors import ConfigError
from .et import VegetationParams
from .flow import FlowSettings
from .heat import HeatSettings
from .mesh import CellParameters, ColumnMesh, ColumnState, SoilProfile, build_mesh


@dataclass(frozen=True)
class TimeControl:
    dt_init: float = 600.0
    dt_min: float = 1.0
    dt_max: float = 21600.0
    grow_factor: float = 1.3
    shrink_factor: float = 0.5
    max_surface_dT: float = 1.0

    def __post_init__(self):
        for problem in self.violations():
            raise ConfigError(problem)

    def violations(self) -> list[str]:
        out = []
        if not 0.0 < self.dt_min <= self.dt_init <= self.dt_max:
            out.append("time control requires 0 < dt_min <= dt_init <= dt_max")
        if not self.grow_factor > 1.0:
            out.append("time control requires grow_factor > 1")
        if not 0.0 < self.shrink_factor < 1.0:
            out.append("time control requires 0 < shrink_factor < 1")
        if not self.max_surface_dT > 0.0:
            out.append("time control requires max_surface_dT > 0")
        return out


@dataclass(frozen=True)
class MeshSpec:
    depth: float = 3.0
    n_cells: int = 40
    grading: float = 1.0

    def build(self) -> ColumnMesh:
        return build_mesh(self.depth, self.n_cells, self.grading)


@dataclass(frozen=True)
class InitialCondition:
    """Uniform ``T`` (degC) and ``h`` (m), or a depth table ``(z, h, T)`` interpolated at cell centers."""

    T: float = -1.0
    h: float = -1.0
    table_z: tuple[float, ...] | None = None
    table_h: tuple[float, ...] | None = None
    table_T: tuple[float, ...] | None = None

    def fields_at(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.table_z is None:
            return np.full(z.size, float(self.h)), np.full(z.size, float(self.T))
        zt = np.asarray(self.table_z, dtype=float)
        return np.interp(z, zt, self.table_h), np.interp(z, zt, self.table_T)


@dataclass(frozen=True)
class Boundaries:
    h_pond_max: float = 0.0
    flow_bottom: str = "free_drainage"
    flow_bottom_value: float = 0.0
    heat_bottom: str = "flux"
    heat_bottom_value: float = 0.0


@dataclass(frozen=True)
class SpinUp:
    max_years: int = 50
    tol_K: float = 0.05


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    profile: SoilProfile
    aspect: str = "north"
    stand_density: float = 1.0
    pet_multiplier_north: float = 1.0
    pet_multiplier_south: float = 1.0
    veg: VegetationParams = field(default_factory=VegetationParams)
    mesh: MeshSpec = field(default_factory=MeshSpec)
    time: TimeControl = field(default_factory=TimeControl)
    initial: InitialCondition = field(default_factory=InitialCondition)
    boundaries: Boundaries = field(default_factory=Boundaries)
    flow: FlowSettings = field(default_factory=FlowSettings)
    heat: HeatSettings = field(default_factory=HeatSettings)
    spinup: SpinUp = field(default_factory=SpinUp)
    snapshot_interval: float = 30.0 * 86400.0

    @property
    def pet_multiplier(self) -> float:
        return self.pet_multiplier_north if self.aspect == "north" else self.pet_multiplier_south


def initial_state(mesh: ColumnMesh, cells: CellParameters, h, T, t: float = 0.0) -> ColumnState:
    """State with water from the retention curve, split into liquid and ice at ``T``."""
    h = np.asarray(h, dtype=float) * np.ones(mesh.n_cells)
    T = np.asarray(T, dtype=float) * np.ones(mesh.n_cells)
    part = freezing_partition(T, water_retention(h, cells), cells)
    return ColumnState(h=h.copy(), T=T.copy(), theta_liq=part.theta_liq, theta_ice=part.theta_ice, t=t)
