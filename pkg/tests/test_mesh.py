import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cryoflow.errors import ConfigError
from cryoflow.mesh import ColumnMesh, ColumnState, SoilLayer, SoilProfile, build_mesh, sample_profile


def test_uniform_mesh():
    mesh = build_mesh(1.0, 4, 1.0)
    np.testing.assert_allclose(mesh.dz, [0.25] * 4, rtol=0, atol=1e-15)
    np.testing.assert_allclose(mesh.z_center, [0.125, 0.375, 0.625, 0.875], rtol=0, atol=1e-15)
    assert mesh.n_cells == 4
    assert mesh.z_face[0] == 0.0


def test_graded_mesh_two_cells():
    # geometric series with ratio 3 summing to 1: a(1 + 3) = 1
    mesh = build_mesh(1.0, 2, 3.0)
    np.testing.assert_allclose(mesh.dz, [0.25, 0.75], rtol=1e-15)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 10_000), grading=st.floats(0.1, 10.0), depth=st.floats(0.1, 100.0))
def test_mesh_invariants(n, grading, depth):
    mesh = build_mesh(depth, n, grading)
    assert np.all(mesh.dz > 0.0)
    assert mesh.z_face[0] == 0.0
    assert abs(mesh.dz.sum() - depth) <= 1e-12 * depth
    np.testing.assert_array_equal(mesh.z_center, 0.5 * (mesh.z_face[:-1] + mesh.z_face[1:]))
    assert mesh.dz[-1] / mesh.dz[0] == pytest.approx(grading, rel=1e-9)


@pytest.mark.parametrize("depth,n,grading", [(0.0, 4, 1.0), (-1.0, 4, 1.0), (1.0, 1, 1.0), (1.0, 4, 0.0)])
def test_mesh_rejects_bad_arguments(depth, n, grading):
    with pytest.raises(ValueError):
        build_mesh(depth, n, grading)


def test_mesh_rejects_bad_faces():
    with pytest.raises(ValueError):
        ColumnMesh(np.array([0.0, 0.5, 0.5, 1.0]))
    with pytest.raises(ValueError):
        ColumnMesh(np.array([0.1, 0.5, 1.0]))


def test_layer_invariants():
    with pytest.raises(ConfigError, match="vg_n > 1"):
        SoilLayer(0.0, 1.0, vg_n=0.9)
    with pytest.raises(ConfigError, match="theta_r < theta_s"):
        SoilLayer(0.0, 1.0, theta_r=0.5, theta_s=0.4)
    with pytest.raises(ConfigError, match="freeze_w > 0"):
        SoilLayer(0.0, 1.0, freeze_w=0.0)


def test_profile_contiguity():
    with pytest.raises(ConfigError, match="contiguous"):
        SoilProfile((SoilLayer(0.0, 0.5), SoilLayer(0.6, 1.0)))
    with pytest.raises(ConfigError, match="z_top = 0"):
        SoilProfile((SoilLayer(0.1, 1.0),))


def test_single_layer_cells_identical():
    cells = sample_profile(SoilProfile.uniform(2.0, K_sat=3e-6), build_mesh(2.0, 7))
    assert np.all(cells.K_sat == 3e-6)
    assert np.all(cells.layer_index == 0)


def test_two_layers_by_center():
    profile = SoilProfile((SoilLayer(0.0, 0.5, K_sat=1e-5), SoilLayer(0.5, 1.0, K_sat=1e-7)))
    cells = sample_profile(profile, build_mesh(1.0, 4))
    np.testing.assert_array_equal(cells.layer_index, [0, 0, 1, 1])
    np.testing.assert_array_equal(cells.K_sat, [1e-5, 1e-5, 1e-7, 1e-7])


def test_boundary_on_center_goes_to_upper_layer():
    profile = SoilProfile((SoilLayer(0.0, 0.375), SoilLayer(0.375, 1.0)))
    cells = sample_profile(profile, build_mesh(1.0, 4))
    np.testing.assert_array_equal(cells.layer_index, [0, 0, 1, 1])


def test_shallow_profile_names_uncovered_range():
    with pytest.raises(ConfigError, match=r"\[0.8, 1.0\]"):
        sample_profile(SoilProfile.uniform(0.8), build_mesh(1.0, 4))


@given(st.lists(st.floats(0.05, 1.0), min_size=1, max_size=5), st.integers(2, 60))
def test_sampling_is_total(thicknesses, n):
    bottoms = np.cumsum(thicknesses)
    tops = np.concatenate(([0.0], bottoms[:-1]))
    profile = SoilProfile(tuple(SoilLayer(float(a), float(b)) for a, b in zip(tops, bottoms)))
    cells = sample_profile(profile, build_mesh(float(bottoms[-1]), n))
    assert cells.layer_index.shape == (n,)
    assert np.all((cells.layer_index >= 0) & (cells.layer_index < len(thicknesses)))


def test_state_copy_is_independent():
    s = ColumnState(h=np.zeros(3), T=np.ones(3), theta_liq=np.full(3, 0.3), theta_ice=np.zeros(3))
    c = s.copy()
    c.h[0] = -5.0
    assert s.h[0] == 0.0
    np.testing.assert_array_equal(s.theta_total, np.full(3, 0.3))
