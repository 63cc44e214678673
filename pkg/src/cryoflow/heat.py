"""Implicit heat transport with conduction, Darcy advection and freeze/thaw.

The discrete balance is written for the cell energy content (sensible plus
latent, see :func:`cryoflow.constitutive.energy_content`) so that each
converged step conserves energy to the Picard tolerance. The apparent heat
capacity serves as the iteration Jacobian; when consecutive iterates differ
by more than a tenth of the freezing-curve width the secant (chord) capacity
is used instead so latent heat is not skipped, and iterates crossing the
freezing point are stopped just on the other side of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._tridiag import solve_tridiagonal
from .constitutive import (
    CW_RHO,
    apparent_heat_capacity,
    energy_content,
    freezing_partition,
    thermal_conductivity,
)
from .errors import NumericalError
from .mesh import CellParameters, ColumnMesh, ColumnState


FREEZE_EPS = 1.0e-9  # landing point below 0 degC, in units of freeze_w

@dataclass(frozen=True)
class HeatBoundary:
    """Prescribed surface temperature; bottom ``"flux"`` (W/m2 into the column) or ``"temperature"``."""

    top_temperature: float
    bottom: str = "flux"
    bottom_value: float = 0.0

    def __post_init__(self):
        if self.bottom not in ("flux", "temperature"):
            raise ValueError(f"unknown bottom heat boundary {self.bottom!r}")
        if not (np.isfinite(self.top_temperature) and np.isfinite(self.bottom_value)):
            raise ValueError("heat boundary values must be finite")


@dataclass(frozen=True)
class HeatSettings:
    tol_T: float = 1.0e-4
    tol_E: float = 1.0e-2
    max_picard: int = 50


@dataclass
class HeatStepReport:
    iterations: int
    energy_balance_error: float
    converged: bool
    top_heat_flux: float = 0.0  # W/m2 into the column (conduction + advection)
    bottom_heat_flux: float = 0.0  # W/m2 leaving through the bottom
    sink_heat_flux: float = 0.0  # W/m2 carried away by root/soil uptake


def face_conductivity(k, mesh):
    """Series (distance-weighted harmonic) conductivity at interior faces."""
    dz = mesh.dz
    return (dz[:-1] + dz[1:]) / (dz[:-1] / k[:-1] + dz[1:] / k[1:])


def cell_energy(state: ColumnState, cells: CellParameters):
    return energy_content(state.T, state.theta_liq, state.theta_ice, cells)


def energy_balance(state_before, state_after, top_in, bottom_out, sink_out, dt, mesh, cells) -> float:
    """Absolute energy residual of one step (J/m2); boundary terms in W/m2."""
    stored = float(np.sum((cell_energy(state_after, cells) - cell_energy(state_before, cells)) * mesh.dz))
    return abs(stored - (top_in - bottom_out - sink_out) * dt)


def heat_step(
    state: ColumnState,
    mesh: ColumnMesh,
    cells: CellParameters,
    boundary: HeatBoundary,
    face_flux: np.ndarray | None,
    dt: float,
    settings: HeatSettings = HeatSettings(),
    sink: np.ndarray | None = None,
    before: ColumnState | None = None,
) -> tuple[ColumnState, HeatStepReport]:
    """Advance temperature by ``dt``.

    ``face_flux`` holds the ``n_cells + 1`` downward Darcy fluxes of the
    preceding flow step (``None`` for pure conduction) and ``sink`` the water
    uptake (1/s) removed at local temperature. ``before`` is the state at
    the start of the coupled step (before the flow step changed the water
    content); it defaults to ``state``. The returned state has water
    re-partitioned between liquid and ice at the new temperature.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    for name in ("T", "theta_liq", "theta_ice"):
        bad = np.flatnonzero(~np.isfinite(getattr(state, name)))
        if bad.size:
            raise NumericalError(f"non-finite {name} entering heat step", int(bad[0]))
    n = mesh.n_cells
    dz = mesh.dz
    d = np.diff(mesh.z_center)
    d_top = mesh.z_center[0]
    d_bot = mesh.depth - mesh.z_center[-1]
    before = state if before is None else before
    q = np.zeros(n + 1) if face_flux is None else np.asarray(face_flux, dtype=float)
    s = np.zeros(n) if sink is None else np.asarray(sink, dtype=float)
    theta_total = state.theta_total
    e_old = cell_energy(before, cells)
    ts = boundary.top_temperature
    t_in = max(ts, 0.0)  # infiltrating water is liquid
    w = np.asarray(cells.freeze_w) * np.ones(n)

    # advection coefficients (independent of T), upwind on face flux sign
    adv = CW_RHO * q
    adv_diag = np.zeros(n)
    adv_lower = np.zeros(n)
    adv_upper = np.zeros(n)
    qi = adv[1:-1]  # interior faces, between cells j and j+1
    down = qi >= 0.0
    adv_diag[:-1] += np.where(down, qi, 0.0)
    adv_lower[1:] -= np.where(down, qi, 0.0)
    adv_diag[1:] -= np.where(down, 0.0, qi)
    adv_upper[:-1] += np.where(down, 0.0, qi)
    adv_rhs = np.zeros(n)
    if adv[0] >= 0.0:
        adv_rhs[0] += adv[0] * t_in
    else:
        adv_diag[0] -= adv[0]
    if adv[-1] >= 0.0 or boundary.bottom == "flux":
        adv_diag[-1] += adv[-1]
    else:
        adv_rhs[-1] -= adv[-1] * boundary.bottom_value
    adv_diag += CW_RHO * s * dz

    T_m = state.T.copy()
    T_prev = e_prev = None
    converged = False
    for it in range(1, settings.max_picard + 1):
        part = freezing_partition(T_m, theta_total, cells)
        e_m = energy_content(T_m, part.theta_liq, part.theta_ice, cells)
        cap = apparent_heat_capacity(T_m, theta_total, cells)
        if T_prev is not None:
            step = T_m - T_prev
            use_chord = np.abs(step) > w / 10.0
            if np.any(use_chord):
                chord = np.divide(e_m - e_prev, step, out=cap.copy(), where=use_chord)
                cap = np.where(use_chord & (chord > 0.0), chord, cap)
        k = thermal_conductivity(part.theta_liq, part.theta_ice, cells)
        b = face_conductivity(k, mesh) / d
        b_top = k[0] / d_top

        diag = cap * dz / dt + adv_diag
        diag[:-1] += b
        diag[1:] += b
        diag[0] += b_top
        lower = adv_lower.copy()
        upper = adv_upper.copy()
        lower[1:] -= b
        upper[:-1] -= b
        rhs = (cap * T_m - (e_m - e_old)) * dz / dt + adv_rhs
        rhs[0] += b_top * ts
        if boundary.bottom == "flux":
            rhs[-1] += boundary.bottom_value
        else:
            b_bot = k[-1] / d_bot
            diag[-1] += b_bot
            rhs[-1] += b_bot * boundary.bottom_value

        T_new = solve_tridiagonal(lower, diag, upper, rhs)
        bad = np.flatnonzero(~np.isfinite(T_new))
        if bad.size:
            raise NumericalError("non-finite temperature in heat step", int(bad[0]))
        # an iterate crossing 0 degC stops there: the capacity jumps by orders
        # of magnitude at the freezing point and a full step oscillates
        T_new = np.where((T_m >= 0.0) & (T_new < 0.0), -FREEZE_EPS * w, T_new)
        T_new = np.where((T_m < 0.0) & (T_new >= 0.0), 0.0, T_new)

        top_in = b_top * (ts - T_new[0]) + (adv[0] * t_in if adv[0] >= 0.0 else adv[0] * T_new[0])
        if boundary.bottom == "flux":
            bottom_out = -boundary.bottom_value + adv[-1] * T_new[-1]
        else:
            bottom_out = b_bot * (T_new[-1] - boundary.bottom_value)
            bottom_out += adv[-1] * (T_new[-1] if adv[-1] >= 0.0 else boundary.bottom_value)
        sink_out = float(np.sum(CW_RHO * s * dz * T_new))
        new_part = freezing_partition(T_new, theta_total, cells)
        e_new = energy_content(T_new, new_part.theta_liq, new_part.theta_ice, cells)
        err = abs(float(np.sum((e_new - e_old) * dz)) - (top_in - bottom_out - sink_out) * dt)
        dT = float(np.max(np.abs(T_new - T_m)))
        T_prev, e_prev = T_m, e_m
        T_m = T_new
        if dT < settings.tol_T and err < settings.tol_E:
            converged = True
            break

    new_state = state.copy()
    new_state.T = T_m
    new_state.theta_liq = new_part.theta_liq
    new_state.theta_ice = new_part.theta_ice
    new_state.t = before.t + dt
    report = HeatStepReport(
        iterations=it,
        energy_balance_error=err,
        converged=converged,
        top_heat_flux=float(top_in),
        bottom_heat_flux=float(bottom_out),
        sink_heat_flux=sink_out,
    )
    return new_state, report
