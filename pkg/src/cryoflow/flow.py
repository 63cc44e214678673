"""Implicit finite-volume step of the mixed-form Richards equation.

The head ``h`` parameterizes the total (liquid + ice) water content through
the retention curve. Ice is held fixed during a flow step; the liquid phase
is whatever water exceeds the ice content. Conductivity uses the liquid
saturation and the ice impedance factor. Fluxes are positive downward, so a
positive surface flux is infiltration and a positive bottom flux is drainage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._tridiag import solve_tridiagonal
from .constitutive import hydraulic_conductivity, retention_capacity, water_retention
from .errors import NumericalError
from .mesh import CellParameters, ColumnMesh, ColumnState

K_FLOOR = 1.0e-30  # m/s; keeps face means and the matrix well defined
STORAGE_REGULARIZATION = 1.0e-9  # 1/m, iteration matrix only


@dataclass(frozen=True)
class FlowBoundary:
    """Surface and bottom conditions for one flow step.

    ``top`` is ``"flux"`` (``top_value`` in m/s, positive = infiltration,
    capped by ponding at ``h_pond_max``) or ``"head"`` (``top_value`` in m).
    ``bottom`` is ``"free_drainage"``, ``"head"`` (``bottom_value`` in m) or
    ``"no_flux"``.
    """

    top: str = "flux"
    top_value: float = 0.0
    h_pond_max: float = 0.0
    bottom: str = "free_drainage"
    bottom_value: float = 0.0

    def __post_init__(self):
        if self.top not in ("flux", "head"):
            raise ValueError(f"unknown top boundary {self.top!r}")
        if self.bottom not in ("free_drainage", "head", "no_flux"):
            raise ValueError(f"unknown bottom boundary {self.bottom!r}")
        if not self.h_pond_max >= 0.0:
            raise ValueError("h_pond_max must be >= 0")


@dataclass(frozen=True)
class FlowSettings:
    tol_h: float = 1.0e-7
    tol_mb: float = 1.0e-10
    max_picard: int = 50


@dataclass
class FlowStepReport:
    iterations: int
    mass_balance_error: float
    surface_flux_actual: float
    bottom_flux: float
    converged: bool
    face_flux: np.ndarray
    sink: np.ndarray
    runoff: float = 0.0
    top_mode: str = "flux"


def interface_conductivity(k_upper, k_lower):
    """Geometric mean of the conductivities on both sides of a face."""
    return np.sqrt(np.asarray(k_upper) * np.asarray(k_lower))


def liquid_conductivity(h, theta_ice, cells):
    """Conductivity of cells at head ``h`` with a fixed ice content."""
    theta_total = water_retention(h, cells)
    theta_liq = np.maximum(theta_total - theta_ice, cells.theta_r)
    se = (theta_liq - cells.theta_r) / (cells.theta_s - cells.theta_r)
    k = hydraulic_conductivity(se, theta_liq, theta_ice, cells)
    return np.maximum(k, K_FLOOR)


def surface_face_conductivity(h_surface, k_top_cell, theta_ice_top, cells):
    top = cells[0:1]
    k_surface = liquid_conductivity(np.array([h_surface]), np.array([theta_ice_top]), top)[0]
    return float(interface_conductivity(k_top_cell, k_surface))


def darcy_face_fluxes(h, k, mesh):
    """Downward Darcy flux at interior faces 1..n-1."""
    zc = mesh.z_center
    kf = interface_conductivity(k[:-1], k[1:])
    return -kf * ((h[1:] - h[:-1]) / np.diff(zc) - 1.0)


def water_mass_balance(state_before, state_after, report, sink, dt, mesh) -> float:
    """Absolute water-balance residual of one step, in metres of water."""
    dz = mesh.dz
    storage = float(np.sum((state_after.theta_total - state_before.theta_total) * dz))
    net_in = report.surface_flux_actual - report.bottom_flux - float(np.sum(np.asarray(sink) * dz))
    return abs(storage - net_in * dt)


def flow_step(
    state: ColumnState,
    mesh: ColumnMesh,
    cells: CellParameters,
    boundary: FlowBoundary,
    sink: np.ndarray | Callable[[np.ndarray], np.ndarray],
    dt: float,
    settings: FlowSettings = FlowSettings(),
) -> tuple[ColumnState, FlowStepReport]:
    """Advance the head field by ``dt`` with modified Picard iteration.

    ``sink`` (1/s, >= 0) is an array or a callable of the current head
    iterate, re-evaluated every iteration. Returns the new state and a report
    whose ``converged`` flag must be checked by the caller; on non-convergence
    the returned state is the last iterate and should be discarded.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    for name in ("h", "theta_ice"):
        bad = np.flatnonzero(~np.isfinite(getattr(state, name)))
        if bad.size:
            raise NumericalError(f"non-finite {name} entering flow step", int(bad[0]))
    n = mesh.n_cells
    dz = mesh.dz
    zc = mesh.z_center
    d_top = zc[0]
    d_bot = mesh.depth - zc[-1]
    theta_ice = state.theta_ice
    theta_old = state.theta_total
    h_m = state.h.copy()

    mode = boundary.top
    q_in = boundary.top_value if boundary.top == "flux" else 0.0
    h_top = boundary.top_value if boundary.top == "head" else boundary.h_pond_max
    can_switch = boundary.top == "flux" and q_in > 0.0
    switches = 0

    converged = False
    report = None
    for it in range(1, settings.max_picard + 1):
        theta_m = water_retention(h_m, cells)
        cap = retention_capacity(h_m, cells) + STORAGE_REGULARIZATION
        k = liquid_conductivity(h_m, theta_ice, cells)
        s = np.asarray(sink(h_m) if callable(sink) else sink, dtype=float)

        kf = interface_conductivity(k[:-1], k[1:])
        a = kf / np.diff(zc)  # a[j] couples cells j and j+1
        storage = cap * dz / dt
        diag = storage.copy()
        diag[:-1] += a
        diag[1:] += a
        lower = np.zeros(n)
        upper = np.zeros(n)
        lower[1:] = -a
        upper[:-1] = -a
        rhs = (cap * h_m - (theta_m - theta_old)) * dz / dt - s * dz
        # gravity part of interior fluxes: q_top_face - q_bottom_face
        rhs[1:] += kf
        rhs[:-1] -= kf

        if mode == "flux":
            rhs[0] += q_in
            k_top = None
        else:
            k_top = surface_face_conductivity(h_top, k[0], theta_ice[0], cells)
            a_top = k_top / d_top
            diag[0] += a_top
            rhs[0] += a_top * h_top + k_top

        if boundary.bottom == "free_drainage":
            rhs[-1] -= k[-1]
        elif boundary.bottom == "head":
            kb = surface_face_conductivity(boundary.bottom_value, k[-1], theta_ice[-1], cells[-1:])
            a_b = kb / d_bot
            diag[-1] += a_b
            rhs[-1] += a_b * boundary.bottom_value - kb

        h_new = solve_tridiagonal(lower, diag, upper, rhs)
        bad = np.flatnonzero(~np.isfinite(h_new))
        if bad.size:
            raise NumericalError("non-finite pressure head in flow step", int(bad[0]))

        face = np.empty(n + 1)
        face[1:-1] = darcy_face_fluxes(h_new, k, mesh)
        if mode == "flux":
            face[0] = q_in
        else:
            face[0] = -k_top * ((h_new[0] - h_top) / d_top - 1.0)
        if boundary.bottom == "free_drainage":
            face[-1] = k[-1]
        elif boundary.bottom == "head":
            face[-1] = -kb * ((boundary.bottom_value - h_new[-1]) / d_bot - 1.0)
        else:
            face[-1] = 0.0

        theta_new = water_retention(h_new, cells)
        storage_change = float(np.sum((theta_new - theta_old) * dz))
        net_in = face[0] - face[-1] - float(np.sum(s * dz))
        mb = abs(storage_change - net_in * dt)
        dh = float(np.max(np.abs(h_new - h_m)))
        h_m = h_new

        switched = False
        if can_switch and switches < 4:
            if mode == "flux":
                k_cap = surface_face_conductivity(boundary.h_pond_max, k[0], theta_ice[0], cells)
                q_cap = -k_cap * ((h_new[0] - boundary.h_pond_max) / d_top - 1.0)
                if q_in > q_cap:
                    mode, switched = "head", True
            elif face[0] > q_in:
                mode, switched = "flux", True
            switches += switched

        report = FlowStepReport(
            iterations=it,
            mass_balance_error=mb,
            surface_flux_actual=float(face[0]),
            bottom_flux=float(face[-1]),
            converged=False,
            face_flux=face,
            sink=s,
            runoff=(q_in - float(face[0])) if boundary.top == "flux" else 0.0,
            top_mode=mode,
        )
        if not switched and dh < settings.tol_h and mb < settings.tol_mb:
            converged = True
            break

    theta_liq = water_retention(h_m, cells) - theta_ice
    if np.any(theta_liq < cells.theta_r - 1e-12):
        converged = False
    report.converged = converged
    new_state = state.copy()
    new_state.h = h_m
    new_state.theta_liq = theta_liq
    new_state.t = state.t + dt
    return new_state, report
