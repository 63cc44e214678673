"""Shared fixtures and benchmark drivers for the test suite."""

from __future__ import annotations

import time

import numpy as np
import pytest

from cryoflow.heat import HeatBoundary, heat_step
from cryoflow.mesh import ColumnState, SoilLayer, SoilProfile, build_mesh, sample_profile
from cryoflow.oracles import stefan_front, stefan_problem_for_layer

# acceptance outcomes, printed once at the end of the session
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def vg_layer():
    """Retention/conductivity parameters used by the constitutive examples."""
    return SoilLayer(
        0.0, 1.0, K_sat=1e-5, theta_r=0.05, theta_s=0.45, vg_alpha=1.0, vg_n=2.0, freeze_w=1.0
    )


def vg_params(**overrides) -> dict:
    params = dict(K_sat=1e-5, theta_r=0.05, theta_s=0.45, vg_alpha=1.0, vg_n=2.0, freeze_w=1.0)
    params.update(overrides)
    return params


# Stefan benchmark: saturated column initially at 0 degC, surface held at TS.
STEFAN_DEPTH = 2.0
STEFAN_TS = -13.6
STEFAN_LAYER = dict(theta_r=0.0, theta_s=0.4, freeze_w=0.01, C_solid=2.0e6, k_solid=2.0, k_ice=2.2)


def stefan_layer() -> SoilLayer:
    return SoilLayer(0.0, STEFAN_DEPTH, **STEFAN_LAYER)


def front_isotherm(layer) -> float:
    """Temperature at which half of the freezable water has frozen."""
    return float(layer.freeze_w * np.log(0.5))


def front_depth(T, z, threshold) -> float:
    """Depth of the first crossing of ``threshold`` (T rising with depth)."""
    idx = np.flatnonzero(T >= threshold)
    i = int(idx[0])
    if i == 0:
        return 0.0
    return float(z[i - 1] + (threshold - T[i - 1]) / (T[i] - T[i - 1]) * (z[i] - z[i - 1]))


def run_stefan(dz: float, days: float = 30.0, sample_every: float = 0.25):
    """Simulate the Stefan benchmark; dt scales with dz (600 s at 1 cm).

    Returns ``(times, simulated_front, analytic_front, runtime_s)`` sampled
    every ``sample_every`` days.
    """
    layer = stefan_layer()
    problem = stefan_problem_for_layer(layer, STEFAN_TS)
    mesh = build_mesh(STEFAN_DEPTH, int(round(STEFAN_DEPTH / dz)), 1.0)
    cells = sample_profile(SoilProfile((layer,)), mesh)
    n = mesh.n_cells
    state = ColumnState(
        h=np.zeros(n), T=np.zeros(n), theta_liq=np.full(n, layer.theta_s), theta_ice=np.zeros(n)
    )
    dt = 600.0 * dz / 0.01
    per_sample = int(round(sample_every * 86400.0 / dt))
    n_samples = int(round(days / sample_every))
    threshold = front_isotherm(layer)
    bc = HeatBoundary(STEFAN_TS)
    times, sim, ana = [], [], []
    start = time.perf_counter()
    for k in range(1, n_samples + 1):
        for _ in range(per_sample):
            state, report = heat_step(state, mesh, cells, bc, None, dt)
            assert report.converged
        t = k * per_sample * dt
        times.append(t)
        sim.append(front_depth(state.T, mesh.z_center, threshold))
        ana.append(stefan_front(problem, t))
    runtime = time.perf_counter() - start
    return np.array(times), np.array(sim), np.array(ana), runtime


def rms_relative_error(sim, ana, times, t_from=5.0 * 86400.0) -> float:
    sel = times >= t_from - 1e-6
    rel = (sim[sel] - ana[sel]) / ana[sel]
    return float(np.sqrt(np.mean(rel**2)))
