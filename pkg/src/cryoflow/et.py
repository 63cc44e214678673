"""Actual evapotranspiration as a distributed sink.

Potential ET is split between canopy transpiration and soil evaporation by
Beer-Lambert light extinction through the stand. Transpiration is spread
over the root zone; evaporation comes from the top cell. Both are reduced
cell by cell by a Feddes-type water-stress factor and a soil-temperature
ramp, multiplied together.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError
from .mesh import ColumnMesh

ROOT_SHAPES = ("uniform", "linear-decreasing")


@dataclass(frozen=True)
class VegetationParams:
    root_depth: float = 0.2
    root_shape: str = "uniform"
    feddes_h_start: float = -4.0
    feddes_h_wilt: float = -150.0
    T_crit: float = 0.0
    T_ramp: float = 2.0
    k_ext: float = 0.5
    lai_per_density: float = 1.0

    def __post_init__(self):
        for problem in self.violations():
            raise ConfigError(problem)

    def violations(self) -> list[str]:
        out = []
        if not self.root_depth > 0.0:
            out.append("vegetation requires root_depth > 0")
        if self.root_shape not in ROOT_SHAPES:
            out.append(f"vegetation root_shape must be one of {', '.join(ROOT_SHAPES)}")
        if not self.feddes_h_wilt < self.feddes_h_start < 0.0:
            out.append("vegetation requires feddes_h_wilt < feddes_h_start < 0")
        if not self.T_ramp > 0.0:
            out.append("vegetation requires T_ramp > 0")
        if not self.k_ext > 0.0:
            out.append("vegetation requires k_ext > 0")
        if not self.lai_per_density >= 0.0:
            out.append("vegetation requires lai_per_density >= 0")
        return out


class EtReport(NamedTuple):
    pet: float
    potential_transpiration: float
    potential_evaporation: float
    actual_transpiration: float
    actual_evaporation: float

    @property
    def aet(self) -> float:
        # recombining the two parts can overshoot pet by one ulp
        return min(self.actual_transpiration + self.actual_evaporation, self.pet)


def partition_pet(pet: float, stand_density: float, veg: VegetationParams) -> tuple[float, float]:
    if pet < 0.0 or stand_density < 0.0:
        raise ValueError("pet and stand_density must be non-negative")
    f_veg = -np.expm1(-veg.k_ext * veg.lai_per_density * stand_density)
    tp = f_veg * pet
    return tp, pet - tp


def _root_density_integral(z, veg):
    """Cumulative root density from the surface to depth ``z`` (clipped at root_depth)."""
    z = np.minimum(z, veg.root_depth)
    if veg.root_shape == "uniform":
        return z
    return z - 0.5 * z * z / veg.root_depth


def root_fractions(veg: VegetationParams, mesh: ColumnMesh) -> np.ndarray:
    if veg.root_depth > mesh.depth:
        raise ConfigError(f"root_depth {veg.root_depth} m exceeds the column depth {mesh.depth} m")
    cumulative = _root_density_integral(mesh.z_face, veg)
    r = np.diff(cumulative)
    return r / r.sum()


def water_stress(h, veg: VegetationParams):
    h = np.asarray(h, dtype=float)
    alpha = (h - veg.feddes_h_wilt) / (veg.feddes_h_start - veg.feddes_h_wilt)
    return np.clip(alpha, 0.0, 1.0)


def thermal_limiter(T, veg: VegetationParams):
    T = np.asarray(T, dtype=float)
    return np.clip((T - veg.T_crit) / veg.T_ramp, 0.0, 1.0)


def build_sink(tp, ep, state, mesh: ColumnMesh, veg: VegetationParams, roots=None, h=None):
    """Sink rates (1/s) per cell and the matching :class:`EtReport`.

    Limiters are evaluated on ``state.T`` and on ``h`` when given (a head
    iterate inside the flow solve), else ``state.h``. ``roots`` may pass
    precomputed :func:`root_fractions`.
    """
    dz = mesh.dz
    r = root_fractions(veg, mesh) if roots is None else roots
    alpha_w = water_stress(state.h if h is None else h, veg)
    alpha_t = thermal_limiter(state.T, veg)
    uptake = r * alpha_w * alpha_t
    sink = tp * uptake / dz
    e_act = ep * alpha_w[0] * alpha_t[0]
    sink[0] += e_act / dz[0]
    report = EtReport(
        pet=tp + ep,
        potential_transpiration=tp,
        potential_evaporation=ep,
        # clamp guards the last ulp when every limiter is 1
        actual_transpiration=min(float(tp * np.sum(uptake)), tp),
        actual_evaporation=float(e_act),
    )
    return sink, report
