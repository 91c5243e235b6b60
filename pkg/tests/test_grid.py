import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfpi.errors import InvalidParameter, NonFinite
from rfpi.grid import (Grid, SpinorWaveFunction, Subdivision, WaveFunction, gaussian_packet,
                       l2_distance, random_band_limited)


def test_grid_geometry():
    g = Grid(2, 3.0, 6)
    assert g.spacing == pytest.approx(1.0)
    assert g.shape == (6, 6) and g.size == 36 and g.cell == pytest.approx(1.0)
    np.testing.assert_allclose(g.axis, [-3, -2, -1, 0, 1, 2])
    assert g.coords.shape == (36, 2)
    np.testing.assert_allclose(g.coords[7], [-2.0, -2.0])


@pytest.mark.parametrize("args", [(0, 1.0, 8), (1, 1.0, 1), (1, 0.0, 8), (1, -1.0, 8)])
def test_grid_rejects_bad_parameters(args):
    with pytest.raises(InvalidParameter):
        Grid(*args)


def test_gaussian_packet_is_normalised(grid1024):
    assert gaussian_packet(grid1024, 0.5, 1.0, 0.8).norm() == pytest.approx(1.0, abs=1e-12)
    g2 = Grid(2, 8.0, 64)
    assert gaussian_packet(g2, [0.3, -0.2], [0.5, 0.0], 1.0).norm() == pytest.approx(1.0, abs=1e-10)


def test_wavefunction_validation(grid256):
    with pytest.raises(InvalidParameter):
        WaveFunction(grid256, np.zeros(10))
    bad = np.zeros(256, complex)
    bad[3] = np.nan
    with pytest.raises(NonFinite):
        WaveFunction(grid256, bad)


def test_spinor_norm_combines_components(grid256):
    a = gaussian_packet(grid256, -1.0)
    b = gaussian_packet(grid256, 1.0)
    s = SpinorWaveFunction.from_components([a, b.with_values(2 * b.values)])
    assert s.levels == 2
    assert s.norm() == pytest.approx(np.sqrt(5.0), abs=1e-12)
    assert l2_distance(s.component(0), a) == 0.0
    with pytest.raises(InvalidParameter):
        SpinorWaveFunction(grid256, np.zeros(256))


def test_boundary_mass(grid256):
    centred = gaussian_packet(grid256, 0.0)
    assert grid256.boundary_mass(centred.values) < 1e-30
    edge = gaussian_packet(grid256, 9.5, width=0.5)
    assert grid256.boundary_mass(edge.values) > 0.5
    assert grid256.boundary_mass(np.zeros(256)) == 0.0


def test_subdivision_basics():
    sub = Subdivision.uniform(1.0, 4)
    assert sub.nu == 4 and sub.t == 1.0 and sub.mesh == pytest.approx(0.25)
    assert sub.steps()[1] == (0.25, 0.5)
    deg = Subdivision.from_interior(1.0, [0.5, 0.5, 0.2])
    assert deg.times == (0.0, 0.2, 0.5, 0.5, 1.0)
    assert Subdivision((0.0, 0.0)).mesh == 0.0


@pytest.mark.parametrize("times", [(0.0,), (0.1, 1.0), (0.0, 0.5, 0.4)])
def test_subdivision_rejects_bad_times(times):
    with pytest.raises(InvalidParameter):
        Subdivision(times)


def test_uniform_needs_positive_count():
    with pytest.raises(InvalidParameter):
        Subdivision.uniform(1.0, 0)


@given(st.integers(0, 2**31 - 1))
def test_random_band_limited_is_refinement_consistent(seed):
    coarse = random_band_limited(Grid(1, 10.0, 128), np.random.default_rng(seed))
    fine = random_band_limited(Grid(1, 10.0, 256), np.random.default_rng(seed))
    assert coarse.norm() == pytest.approx(1.0)
    np.testing.assert_allclose(fine.values[::2], coarse.values, atol=1e-6)
