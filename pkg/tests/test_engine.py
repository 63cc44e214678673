import numpy as np
import pytest

import cryoflow.engine as engine
from cryoflow.engine import (
    Column,
    active_layer_thickness,
    build_column,
    coupled_step,
    integrate,
    limit_dt,
    run_column,
    thaw_depth,
)
from cryoflow.errors import SimulationAbort
from cryoflow.forcing import YEAR, AspectForcing, ClimateForcing, sinusoidal_forcing
from cryoflow.heat import HeatBoundary, heat_step
from cryoflow.mesh import ColumnMesh, SoilProfile, build_mesh, sample_profile
from cryoflow.scenario import (
    Boundaries,
    InitialCondition,
    MeshSpec,
    ScenarioConfig,
    SpinUp,
    TimeControl,
    initial_state,
)
from cryoflow.et import VegetationParams


def constant_forcing(T, precip=0.0, pet=0.0):
    return ClimateForcing([0.0], [precip], [pet], [T], [T])


def hydrostatic_column(forcing, n=12, depth=2.0, T0=5.0, water_table=1.0):
    mesh = build_mesh(depth, n)
    cells = sample_profile(SoilProfile.uniform(depth), mesh)
    column = Column(
        mesh=mesh,
        cells=cells,
        veg=VegetationParams(),
        forcing=AspectForcing(forcing),
        boundaries=Boundaries(flow_bottom="no_flux"),
    )
    state = initial_state(mesh, cells, mesh.z_center - water_table, T0)
    return column, state


def small_scenario(name="s", **kw):
    base = dict(
        name=name,
        profile=SoilProfile.uniform(2.0),
        mesh=MeshSpec(2.0, 12, 1.0),
        spinup=SpinUp(max_years=1),
        snapshot_interval=YEAR / 4,
    )
    base.update(kw)
    return ScenarioConfig(**base)


def test_equilibrium_is_a_fixed_point_and_dt_grows():
    column, state = hydrostatic_column(constant_forcing(5.0))
    tc = TimeControl(dt_init=600.0, dt_max=21600.0)
    dt = tc.dt_init
    start = state.copy()
    for _ in range(30):
        state, used, record, dt = coupled_step(column, state, dt, tc)
    np.testing.assert_allclose(state.h, start.h, atol=1e-9)
    np.testing.assert_allclose(state.T, start.T, atol=1e-12)
    assert used == tc.dt_max
    assert dt == tc.dt_max
    assert record.aet == 0.0


def test_failed_attempt_retries_with_identical_inputs(monkeypatch):
    column, state = hydrostatic_column(sinusoidal_forcing())
    real = engine.flow_step
    calls = []

    def flaky(st, *args):
        calls.append((st.h.copy(), st.T.copy(), st.theta_liq.copy(), st.theta_ice.copy(), args[4]))
        new, rep = real(st, *args)
        if len(calls) == 1:
            rep.converged = False
        return new, rep

    monkeypatch.setattr(engine, "flow_step", flaky)
    tc = TimeControl(dt_init=1200.0)
    _, used, record, _ = coupled_step(column, state, 1200.0, tc)
    assert record.attempts == 2
    assert calls[1][4] == calls[0][4] * tc.shrink_factor == used
    for a, b in zip(calls[0][:4], calls[1][:4]):
        assert a.tobytes() == b.tobytes()


def test_rollback_leaves_no_trace(monkeypatch):
    """A run with one injected failure equals a run forced to the accepted dt sequence."""
    forcing = sinusoidal_forcing()
    tc = TimeControl(dt_init=1800.0)
    column, state0 = hydrostatic_column(forcing)
    real = engine.flow_step
    count = {"n": 0}

    def flaky(*args):
        new, rep = real(*args)
        count["n"] += 1
        if count["n"] == 7:
            rep.converged = False
        return new, rep

    monkeypatch.setattr(engine, "flow_step", flaky)
    state, dt, dts, states = state0.copy(), tc.dt_init, [], []
    for _ in range(12):
        state, used, _, dt = coupled_step(column, state, dt, tc)
        dts.append(used)
        states.append(state.copy())
    monkeypatch.setattr(engine, "flow_step", real)
    replay = state0.copy()
    for used, expected in zip(dts, states):
        replay, again, _, _ = coupled_step(column, replay, used, tc)
        assert again == used
        assert replay.h.tobytes() == expected.h.tobytes()
        assert replay.T.tobytes() == expected.T.tobytes()


def test_dt_underflow_aborts_with_dump(monkeypatch):
    column, state = hydrostatic_column(constant_forcing(5.0))
    real = engine.flow_step

    def never(*args):
        new, rep = real(*args)
        rep.converged = False
        return new, rep

    monkeypatch.setattr(engine, "flow_step", never)
    with pytest.raises(SimulationAbort, match="underflow") as info:
        coupled_step(column, state, 8.0, TimeControl(dt_init=8.0, dt_min=1.0))
    assert set(info.value.dump) >= {"t", "h", "T", "theta_liq", "theta_ice"}


def test_abort_carries_scenario_name(monkeypatch):
    real = engine.flow_step

    def never(*args):
        new, rep = real(*args)
        rep.converged = False
        return new, rep

    monkeypatch.setattr(engine, "flow_step", never)
    with pytest.raises(SimulationAbort) as info:
        run_column(small_scenario("doomed"), sinusoidal_forcing())
    assert info.value.scenario == "doomed"
    assert "[doomed]" in str(info.value)


def test_limit_dt_caps_surface_temperature_change():
    forcing = sinusoidal_forcing()
    column, _ = hydrostatic_column(forcing)
    tc = TimeControl(max_surface_dT=0.5)
    t = 60 * 86400.0
    dt, _ = limit_dt(column, t, 1e9, tc)
    assert abs(forcing.slope("north", t)) * dt <= 0.5 + 1e-12
    assert t + dt <= forcing.next_breakpoint(t) + 1e-6


def test_flow_inert_run_matches_conduction_only():
    """No precipitation or PET and a hydrostatic column: the flow step is inert."""
    forcing = sinusoidal_forcing(precip_mm_year=0.0, pet_mm_year=0.0)
    column, state = hydrostatic_column(forcing, n=15, depth=3.0, T0=-1.0, water_table=0.5)
    tc = TimeControl()
    steps = []
    integrate(column, state.copy(), YEAR, tc, tc.dt_init, on_step=lambda r, s: steps.append((r.dt, s.T.copy())))
    heat_only = state.copy()
    t = 0.0
    max_diff = 0.0
    for dt, T_coupled in steps:
        t += dt
        bc = HeatBoundary(forcing.value("north", t))
        heat_only, rep = heat_step(heat_only, column.mesh, column.cells, bc, None, dt, column.heat_settings)
        assert rep.converged
        max_diff = max(max_diff, float(np.max(np.abs(heat_only.T - T_coupled))))
    assert max_diff < 1e-10
    # the year exercised both thaw and refreezing
    assert any(np.any(T > 0.0) for _, T in steps) and np.all(steps[-1][1][-3:] < 0.0)


def test_permanently_frozen_limit():
    forcing = constant_forcing(-10.0, precip=0.0, pet=0.0)
    scenario = small_scenario(initial=InitialCondition(T=-5.0, h=-1.0), spinup=SpinUp(max_years=2))
    result = run_column(scenario, forcing)
    assert np.all(result.final_state.T < 0.0)
    assert np.all(result.series.array("aet_m_s") == 0.0)
    assert result.alt == 0.0
    assert not result.series.no_permafrost


def test_identical_runs_are_bit_identical():
    scenario = small_scenario(spinup=SpinUp(max_years=0))
    a = run_column(scenario, sinusoidal_forcing())
    b = run_column(scenario, sinusoidal_forcing())
    for name, values in a.series.columns.items():
        assert np.asarray(values).tobytes() == np.asarray(b.series.columns[name]).tobytes(), name
    assert a.final_state.T.tobytes() == b.final_state.T.tobytes()


def test_reporting_year_closes_balances_and_snapshots():
    scenario = small_scenario(spinup=SpinUp(max_years=1))
    r = run_column(scenario, sinusoidal_forcing())
    water = r.series.water_closure()
    energy = r.series.energy_closure()
    precip = r.series.total("precip_m_s")
    assert abs(water["residual"]) / precip < 1e-3
    assert abs(energy["residual"]) / energy["gross_exchange"] < 1e-2
    assert [t for t, _ in r.snapshots] == pytest.approx([YEAR / 4, YEAR / 2, 3 * YEAR / 4, YEAR])
    assert r.series.array("time_s")[-1] == pytest.approx(YEAR)
    assert np.all(r.series.array("aet_m_s") <= r.series.array("pet_m_s"))
    alt = r.series.array("alt_m")
    assert np.all(np.diff(alt) >= 0.0)


def test_spinup_stops_when_converged():
    forcing = constant_forcing(4.0)
    scenario = small_scenario(
        initial=InitialCondition(T=4.0, h=-1.0),
        boundaries=Boundaries(flow_bottom="no_flux"),
        spinup=SpinUp(max_years=10, tol_K=0.05),
    )
    r = run_column(scenario, forcing)
    assert r.spinup_converged
    assert r.spinup_years < 10


# active layer thickness rules


def test_alt_symmetric_interpolation():
    mesh = ColumnMesh(np.array([0.0, 0.8, 1.0, 1.2]))
    T = np.array([1.5, 0.5, -0.5])
    z = mesh.z_center
    assert z[1] == pytest.approx(0.9) and z[2] == pytest.approx(1.1)
    alt, flag = active_layer_thickness([T], mesh)
    assert alt == pytest.approx(1.0, rel=1e-12)
    assert not flag


def test_alt_no_permafrost():
    mesh = build_mesh(3.0, 10)
    alt, flag = active_layer_thickness([np.full(10, 2.0), np.full(10, 0.5)], mesh)
    assert alt == 3.0
    assert flag


def test_alt_talik_uses_shallowest_crossing():
    mesh = build_mesh(4.0, 4)
    T = np.array([1.0, -1.0, 1.0, -1.0])
    depth, _ = thaw_depth(T, mesh)
    assert depth == pytest.approx(1.0)


def test_alt_zero_when_never_thawed():
    mesh = build_mesh(2.0, 5)
    assert active_layer_thickness([np.full(5, -3.0)] * 3, mesh) == (0.0, False)


def test_build_column_uses_aspect():
    forcing = sinusoidal_forcing()
    column, _ = build_column(small_scenario(aspect="south"), forcing)
    assert column.forcing.surface_temperature(0.0) == forcing.value("south", 0.0)
