"""Coupled time loop: ET sink -> Richards flow -> heat, with adaptive dt.

Each accepted step is a sequential (non-iterated) split. A failed sub-step
rolls back to the saved state and retries with a smaller dt.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceFailure, NumericalError, SimulationAbort
from .et import VegetationParams, build_sink, partition_pet, root_fractions
from .flow import FlowBoundary, FlowSettings, flow_step
from .forcing import YEAR, AspectForcing, ClimateForcing
from .heat import HeatBoundary, HeatSettings, cell_energy, heat_step
from .mesh import CellParameters, ColumnMesh, ColumnState, sample_profile
from .scenario import Boundaries, ScenarioConfig, TimeControl, initial_state

log = logging.getLogger(__name__)


@dataclass
class Column:
    """Everything static about one simulated column."""

    mesh: ColumnMesh
    cells: CellParameters
    veg: VegetationParams
    forcing: AspectForcing
    stand_density: float = 1.0
    boundaries: Boundaries = field(default_factory=Boundaries)
    flow_settings: FlowSettings = field(default_factory=FlowSettings)
    heat_settings: HeatSettings = field(default_factory=HeatSettings)
    roots: np.ndarray = None

    def __post_init__(self):
        if self.roots is None:
            self.roots = root_fractions(self.veg, self.mesh)


@dataclass
class StepRecord:
    t: float
    dt: float
    precip: float
    pet: float
    aet: float
    transpiration: float
    evaporation: float
    potential_transpiration: float
    infiltration: float
    runoff: float
    drainage: float
    water_balance_error: float
    energy_balance_error: float
    picard_flow: int
    picard_heat: int
    top_heat_flux: float
    bottom_heat_flux: float
    sink_heat_flux: float
    attempts: int = 1


def _attempt(column: Column, state: ColumnState, dt: float):
    t0, t1 = state.t, state.t + dt
    f = column.forcing
    # forcing is linear within a step, so endpoint means are exact averages
    precip = 0.5 * (f.precip(t0) + f.precip(t1))
    pet = 0.5 * (f.pet(t0) + f.pet(t1))
    t_surface = f.surface_temperature(t1)
    tp, ep = partition_pet(pet, column.stand_density, column.veg)

    last = {}

    def sink_of(h):
        sink, report = build_sink(tp, ep, state, column.mesh, column.veg, roots=column.roots, h=h)
        last["et"] = report
        return sink

    b = column.boundaries
    flow_bc = FlowBoundary(
        top="flux",
        top_value=precip,
        h_pond_max=b.h_pond_max,
        bottom=b.flow_bottom,
        bottom_value=b.flow_bottom_value,
    )
    after_flow, frep = flow_step(state, column.mesh, column.cells, flow_bc, sink_of, dt, column.flow_settings)
    if not frep.converged:
        raise ConvergenceFailure(f"flow step did not converge in {frep.iterations} iterations")
    heat_bc = HeatBoundary(t_surface, b.heat_bottom, b.heat_bottom_value)
    new_state, hrep = heat_step(
        after_flow,
        column.mesh,
        column.cells,
        heat_bc,
        frep.face_flux,
        dt,
        column.heat_settings,
        sink=frep.sink,
        before=state,
    )
    if not hrep.converged:
        raise ConvergenceFailure(f"heat step did not converge in {hrep.iterations} iterations")
    new_state.t = t1
    et = last["et"]
    record = StepRecord(
        t=t1,
        dt=dt,
        precip=precip,
        pet=pet,
        aet=min(et.aet, pet),
        transpiration=et.actual_transpiration,
        evaporation=et.actual_evaporation,
        potential_transpiration=et.potential_transpiration,
        infiltration=frep.surface_flux_actual,
        runoff=frep.runoff,
        drainage=frep.bottom_flux,
        water_balance_error=frep.mass_balance_error,
        energy_balance_error=hrep.energy_balance_error,
        picard_flow=frep.iterations,
        picard_heat=hrep.iterations,
        top_heat_flux=hrep.top_heat_flux,
        bottom_heat_flux=hrep.bottom_heat_flux,
        sink_heat_flux=hrep.sink_heat_flux,
    )
    return new_state, record


def limit_dt(column: Column, t: float, dt: float, tc: TimeControl, stop: float | None = None) -> tuple[float, bool]:
    """Cap ``dt`` by dt_max, the next forcing breakpoint, ``stop`` and the surface-temperature rate.

    Returns the capped dt and whether the step lands exactly on a breakpoint or ``stop``.
    """
    dt = min(dt, tc.dt_max)
    target = column.forcing.next_breakpoint(t)
    if stop is not None and stop < target:
        target = stop
    lands = False
    if t + dt >= target - 1e-6:
        dt, lands = target - t, True
    rate = abs(column.forcing.surface_temperature_slope(t))
    if rate > 0.0 and dt * rate > tc.max_surface_dT:
        dt, lands = tc.max_surface_dT / rate, False
    return dt, lands


def coupled_step(
    column: Column,
    state: ColumnState,
    dt: float,
    tc: TimeControl = TimeControl(),
    stop: float | None = None,
) -> tuple[ColumnState, float, StepRecord, float]:
    """One accepted coupled step starting from ``state`` with trial ``dt``.

    Returns ``(new_state, dt_used, record, dt_next)``. ``state`` itself is
    never modified, so a failed attempt leaves no trace.
    """
    t = state.t
    trial = min(dt, tc.dt_max)
    dt, lands = limit_dt(column, t, dt, tc, stop)
    target = t + dt
    attempts = 0
    while True:
        attempts += 1
        try:
            new_state, record = _attempt(column, state, dt)
            break
        except (ConvergenceFailure, NumericalError) as exc:
            log.debug("t=%.1f dt=%.3g rejected: %s", t, dt, exc)
            dt *= tc.shrink_factor
            lands = False
            if dt < tc.dt_min:
                raise SimulationAbort(
                    f"time step underflow at t = {t:.1f} s (dt < dt_min = {tc.dt_min} s): {exc}",
                    dump={
                        "t": t,
                        "h": state.h.tolist(),
                        "T": state.T.tolist(),
                        "theta_liq": state.theta_liq.tolist(),
                        "theta_ice": state.theta_ice.tolist(),
                    },
                ) from exc
    if lands:
        # snap onto the breakpoint so forcing segments are hit exactly
        new_state.t = target
        record.t = target
    record.attempts = attempts
    # a step shortened only to land on a breakpoint does not throttle growth
    base = max(trial, dt) if attempts == 1 and lands else dt
    dt_next = min(base * tc.grow_factor, tc.dt_max)
    return new_state, dt, record, dt_next


def thaw_depth(T: np.ndarray, mesh: ColumnMesh) -> tuple[float, bool]:
    """Depth of the shallowest thawed-to-frozen (T > 0 to T <= 0) transition.

    Returns ``(depth, frozen_found)``: 0 when the top cell is not thawed,
    the column depth with ``frozen_found = False`` when nothing is frozen.
    """
    z = mesh.z_center
    if T[0] <= 0.0:
        return 0.0, True
    frozen = np.flatnonzero(T <= 0.0)
    if frozen.size == 0:
        return mesh.depth, False
    i = frozen[0]
    return float(z[i - 1] + T[i - 1] / (T[i - 1] - T[i]) * (z[i] - z[i - 1])), True


def frozen_front_depth(T: np.ndarray, mesh: ColumnMesh, T_front: float = 0.0) -> float:
    """Depth of the shallowest frozen-to-unfrozen transition seen from the surface.

    A cell counts as frozen when ``T < T_front``; 0 when the top cell is
    unfrozen, the column depth when every cell is frozen.
    """
    z = mesh.z_center
    if T[0] >= T_front:
        return 0.0
    unfrozen = np.flatnonzero(T >= T_front)
    if unfrozen.size == 0:
        return mesh.depth
    i = unfrozen[0]
    return float(z[i - 1] + (T_front - T[i - 1]) / (T[i] - T[i - 1]) * (z[i] - z[i - 1]))


def active_layer_thickness(T_history, mesh: ColumnMesh) -> tuple[float, bool]:
    """Maximum thaw depth over a year of temperature profiles.

    Returns ``(alt, no_permafrost)``; ``no_permafrost`` is set when some
    profile had no frozen cell at all (the ALT is then the column depth).
    """
    alt = 0.0
    no_permafrost = False
    for T in T_history:
        depth, found = thaw_depth(np.asarray(T), mesh)
        no_permafrost |= not found
        alt = max(alt, depth)
    return alt, no_permafrost


SERIES_FIELDS = (
    "time_s",
    "dt_s",
    "alt_m",
    "thaw_depth_m",
    "frozen_front_m",
    "pet_m_s",
    "aet_m_s",
    "transpiration_m_s",
    "evaporation_m_s",
    "potential_transpiration_m_s",
    "precip_m_s",
    "infiltration_m_s",
    "runoff_m_s",
    "drainage_m_s",
    "water_balance_err_m",
    "energy_balance_err_j_m2",
    "top_heat_flux_w_m2",
    "bottom_heat_flux_w_m2",
    "sink_heat_flux_w_m2",
    "storage_m",
    "energy_j_m2",
    "picard_flow",
    "picard_heat",
)


@dataclass
class DiagnosticsSeries:
    """Per-accepted-step diagnostics of the reporting year."""

    t_start: float
    storage_start: float
    energy_start: float
    columns: dict = field(default_factory=lambda: {k: [] for k in SERIES_FIELDS})
    no_permafrost: bool = False

    def append(self, record: StepRecord, state: ColumnState, mesh: ColumnMesh, cells: CellParameters):
        c = self.columns
        depth, found = thaw_depth(state.T, mesh)
        self.no_permafrost |= not found
        alt = max(depth, c["alt_m"][-1]) if c["alt_m"] else depth
        row = {
            "time_s": record.t - self.t_start,
            "dt_s": record.dt,
            "alt_m": alt,
            "thaw_depth_m": depth,
            "frozen_front_m": frozen_front_depth(state.T, mesh),
            "pet_m_s": record.pet,
            "aet_m_s": record.aet,
            "transpiration_m_s": record.transpiration,
            "evaporation_m_s": record.evaporation,
            "potential_transpiration_m_s": record.potential_transpiration,
            "precip_m_s": record.precip,
            "infiltration_m_s": record.infiltration,
            "runoff_m_s": record.runoff,
            "drainage_m_s": record.drainage,
            "water_balance_err_m": record.water_balance_error,
            "energy_balance_err_j_m2": record.energy_balance_error,
            "top_heat_flux_w_m2": record.top_heat_flux,
            "bottom_heat_flux_w_m2": record.bottom_heat_flux,
            "sink_heat_flux_w_m2": record.sink_heat_flux,
            "storage_m": float(np.sum(state.theta_total * mesh.dz)),
            "energy_j_m2": float(np.sum(cell_energy(state, cells) * mesh.dz)),
            "picard_flow": record.picard_flow,
            "picard_heat": record.picard_heat,
        }
        for k, v in row.items():
            c[k].append(v)

    def __len__(self):
        return len(self.columns["time_s"])

    def array(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name], dtype=float)

    @property
    def alt(self) -> float:
        a = self.columns["alt_m"]
        return a[-1] if a else 0.0

    def total(self, name: str) -> float:
        """Time integral of a rate column (sum of rate * dt over accepted steps)."""
        return float(np.sum(self.array(name) * self.array("dt_s")))

    def water_closure(self) -> dict:
        dstore = self.columns["storage_m"][-1] - self.storage_start
        inputs = self.total("precip_m_s") - self.total("runoff_m_s")
        outputs = self.total("aet_m_s") + self.total("drainage_m_s")
        return {"storage_change": dstore, "residual": dstore - (inputs - outputs)}

    def energy_closure(self) -> dict:
        dt = self.array("dt_s")
        top = self.array("top_heat_flux_w_m2") * dt
        bottom = self.array("bottom_heat_flux_w_m2") * dt
        sink = self.array("sink_heat_flux_w_m2") * dt
        de = self.columns["energy_j_m2"][-1] - self.energy_start
        net = float(np.sum(top) - np.sum(bottom) - np.sum(sink))
        gross = float(np.sum(np.abs(top)) + np.sum(np.abs(bottom)) + np.sum(np.abs(sink)))
        return {"energy_change": de, "residual": de - net, "gross_exchange": gross}


@dataclass
class RunResult:
    scenario: str
    series: DiagnosticsSeries
    final_state: ColumnState
    snapshots: list
    spinup_years: int
    spinup_converged: bool
    spinup_change_K: float
    accepted_steps: int
    rejected_attempts: int

    @property
    def alt(self) -> float:
        return self.series.alt


def build_column(scenario: ScenarioConfig, forcing: ClimateForcing) -> tuple[Column, ColumnState]:
    mesh = scenario.mesh.build()
    cells = sample_profile(scenario.profile, mesh)
    column = Column(
        mesh=mesh,
        cells=cells,
        veg=scenario.veg,
        forcing=AspectForcing(forcing, scenario.aspect, scenario.pet_multiplier),
        stand_density=scenario.stand_density,
        boundaries=scenario.boundaries,
        flow_settings=scenario.flow,
        heat_settings=scenario.heat,
    )
    h0, T0 = scenario.initial.fields_at(mesh.z_center)
    return column, initial_state(mesh, cells, h0, T0)


def integrate(column, state, t_end, tc, dt, on_step=None, stops=()):
    """Advance to ``t_end`` landing exactly on every time in ``stops``."""
    stops = sorted(s for s in stops if state.t < s < t_end) + [t_end]
    rejected = 0
    for stop in stops:
        while state.t < stop - 1e-6:
            state, _, record, dt = coupled_step(column, state, dt, tc, stop=stop)
            rejected += record.attempts - 1
            if on_step is not None:
                on_step(record, state)
        state.t = stop
    return state, dt, rejected


def run_column(scenario: ScenarioConfig, forcing: ClimateForcing) -> RunResult:
    """Spin up on the repeated annual cycle, then record one reporting year."""
    try:
        column, state = build_column(scenario, forcing)
        tc = scenario.time
        dt = tc.dt_init
        years = 0
        change = float("inf")
        rejected = 0
        while years < scenario.spinup.max_years:
            T_before = state.T.copy()
            state, dt, rej = integrate(column, state, (years + 1) * YEAR, tc, dt)
            rejected += rej
            years += 1
            change = float(np.max(np.abs(state.T - T_before)))
            log.info("%s: spin-up year %d, max |dT| = %.4f K", scenario.name, years, change)
            if change < scenario.spinup.tol_K:
                break
        converged = change < scenario.spinup.tol_K

        t0 = state.t
        series = DiagnosticsSeries(
            t_start=t0,
            storage_start=float(np.sum(state.theta_total * column.mesh.dz)),
            energy_start=float(np.sum(cell_energy(state, column.cells) * column.mesh.dz)),
        )
        n_snap = int(np.floor(YEAR / scenario.snapshot_interval + 1e-9)) if scenario.snapshot_interval > 0 else 0
        snap_times = [t0 + k * scenario.snapshot_interval for k in range(1, n_snap + 1)]
        snapshots = []

        def on_step(record, st):
            series.append(record, st, column.mesh, column.cells)

        stops = [s for s in snap_times if s < t0 + YEAR - 1e-6] + [t0 + YEAR]
        for stop in stops:
            state, dt, rej = integrate(column, state, stop, tc, dt, on_step)
            rejected += rej
            if any(abs(stop - s) < 1e-6 for s in snap_times):
                snapshots.append((stop - t0, state.copy()))
        return RunResult(
            scenario=scenario.name,
            series=series,
            final_state=state,
            snapshots=snapshots,
            spinup_years=years,
            spinup_converged=converged,
            spinup_change_K=change,
            accepted_steps=len(series),
            rejected_attempts=rejected,
        )
    except SimulationAbort as exc:
        raise SimulationAbort(str(exc), exc.dump, scenario.name) from exc
