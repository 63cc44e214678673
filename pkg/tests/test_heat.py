import math

import numpy as np
import pytest

from cryoflow.constitutive import L_RHO, freezing_partition
from cryoflow.errors import NumericalError
from cryoflow.heat import HeatBoundary, HeatSettings, energy_balance, heat_step
from cryoflow.mesh import ColumnState, SoilLayer, SoilProfile, build_mesh, sample_profile
from cryoflow.oracles import erfc_profile

from conftest import front_depth, run_stefan


def saturated_column(depth, n, T, **params):
    layer = SoilLayer(0.0, depth, **params)
    mesh = build_mesh(depth, n)
    cells = sample_profile(SoilProfile((layer,)), mesh)
    part = freezing_partition(np.full(n, T, dtype=float) * np.ones(n), layer.theta_s, cells)
    state = ColumnState(
        h=np.zeros(n), T=np.full(n, T, dtype=float) * np.ones(n), theta_liq=part.theta_liq, theta_ice=part.theta_ice
    )
    return layer, mesh, cells, state


def test_equilibrium_is_preserved():
    _, mesh, cells, state = saturated_column(1.0, 20, 5.0)
    bc = HeatBoundary(5.0, "temperature", 5.0)
    new, rep = heat_step(state, mesh, cells, bc, np.zeros(21), 3600.0)
    assert rep.converged
    np.testing.assert_allclose(new.T, 5.0, rtol=0, atol=1e-12)


def test_conduction_step_conserves_energy():
    _, mesh, cells, state = saturated_column(1.0, 100, 2.0)
    bc = HeatBoundary(12.0)
    for _ in range(20):
        new, rep = heat_step(state, mesh, cells, bc, None, 600.0)
        err = energy_balance(state, new, rep.top_heat_flux, rep.bottom_heat_flux, 0.0, 600.0, mesh, cells)
        assert err < 1e-3
        state = new


def test_erfc_profile_coarse():
    layer, mesh, cells, state = saturated_column(3.0, 150, 0.0, theta_r=0.05, theta_s=0.4)
    c = (1 - 0.4) * layer.C_solid + 0.4 * 4182.0 * 1000.0
    k = layer.k_solid**0.6 * layer.k_water**0.4
    kappa = k / c
    bc = HeatBoundary(8.0)
    for _ in range(144):
        state, rep = heat_step(state, mesh, cells, bc, None, 600.0)
        assert rep.converged
    t = 144 * 600.0
    z1 = 2.0 * math.sqrt(kappa * t)
    sim = np.interp(z1, mesh.z_center, state.T)
    assert sim / 8.0 == pytest.approx(math.erfc(1.0), abs=0.01)
    exact = np.array([erfc_profile(8.0, kappa, z, t) for z in mesh.z_center])
    upper = mesh.z_center < 1.0
    rel = np.linalg.norm(state.T[upper] - exact[upper]) / np.linalg.norm(exact[upper])
    assert rel < 0.02


def test_maximum_principle_without_phase_change():
    _, mesh, cells, state = saturated_column(1.0, 30, 4.0)
    state.T = np.linspace(1.0, 9.0, 30)
    new, _ = heat_step(state, mesh, cells, HeatBoundary(3.0, "temperature", 6.0), None, 86400.0)
    assert new.T.min() >= 1.0 - 1e-12
    assert new.T.max() <= 9.0 + 1e-12


def test_partition_consistent_after_step():
    _, mesh, cells, state = saturated_column(1.0, 40, 0.5, freeze_w=0.2)
    for _ in range(30):
        state, rep = heat_step(state, mesh, cells, HeatBoundary(-6.0), None, 1800.0)
        assert rep.converged
        part = freezing_partition(state.T, state.theta_total, cells)
        np.testing.assert_array_equal(part.theta_liq, state.theta_liq)
        np.testing.assert_array_equal(part.theta_ice, state.theta_ice)
        assert not state.check(cells)


def test_freezing_releases_latent_heat_across_the_surface():
    # two thick cells: freezing the upper one exports its latent heat
    layer, mesh, cells, state = saturated_column(0.2, 2, 0.0, theta_r=0.0, theta_s=0.4, freeze_w=0.05)
    bc = HeatBoundary(-4.0)
    dt = 3600.0
    new, rep = heat_step(state, mesh, cells, bc, None, dt, HeatSettings(tol_E=1e-6, tol_T=1e-9))
    assert rep.converged
    d_ice = new.theta_ice - state.theta_ice
    latent = float(np.sum(L_RHO * d_ice * mesh.dz))
    sensible = float(np.sum((1 - 0.4) * layer.C_solid * (new.T - state.T) * mesh.dz)) + float(
        np.sum((new.theta_liq * 4182.0e3 + new.theta_ice * 2108.0 * 917.0) * new.T * mesh.dz)
    )
    exported = -rep.top_heat_flux * dt
    assert latent > 0.0
    assert exported == pytest.approx(latent - sensible, rel=1e-9)


def test_nan_is_reported_with_cell():
    _, mesh, cells, state = saturated_column(1.0, 5, 2.0)
    state.T[3] = np.inf
    with pytest.raises(NumericalError, match="cell 3"):
        heat_step(state, mesh, cells, HeatBoundary(1.0), None, 60.0)


def test_stefan_front_monotone():
    times, sim, ana, _ = run_stefan(0.04, days=6.0, sample_every=0.5)
    assert np.all(np.diff(sim) >= 0.0)
    assert np.all(sim > 0.0)


def test_front_depth_helper():
    z = np.array([0.9, 1.1])
    assert front_depth(np.array([-0.5, 0.5]), z, 0.0) == pytest.approx(1.0, rel=1e-14)
