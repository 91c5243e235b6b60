import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfpi import model as M
from rfpi.errors import InvalidParameter

coords = st.floats(-5, 5, allow_nan=False)
point2 = st.tuples(coords, coords).map(lambda v: np.array(v))


def test_constants_reject_nonpositive_mass():
    with pytest.raises(InvalidParameter):
        M.PhysicalConstants(mass=0.0)
    c = M.PhysicalConstants(2.0)
    assert (c.hbar, c.charge) == (1.0, 1.0)


def test_constant_vector_potential_has_no_fields():
    p = M.Potential(3, V=lambda t, x: np.zeros(np.shape(x)[:-1]),
                    A=lambda t, x: np.broadcast_to([1.0, -2.0, 0.5], np.shape(x)))
    f = M.eval_fields(p, 0.3, np.array([0.4, -1.0, 2.0]))
    np.testing.assert_allclose(f.E, 0, atol=1e-9)
    np.testing.assert_allclose(f.B, 0, atol=1e-9)
    assert f.B.shape == (3,)


def test_linear_scalar_potential_gives_uniform_field():
    p = M.Potential(2, V=lambda t, x: np.asarray(x)[..., 0])
    f = M.eval_fields(p, 0.0, np.array([1.5, -0.2]))
    np.testing.assert_allclose(f.E, [-1.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(f.B, [0.0], atol=1e-9)


@given(point2)
def test_symmetric_gauge_field(x):
    f = M.eval_fields(M.symmetric_gauge_magnetic(B0=1.7), 0.0, x)
    np.testing.assert_allclose(f.E, 0, atol=1e-12)
    np.testing.assert_allclose(f.B, [1.7], atol=1e-12)


def test_uniform_field_family():
    f = M.eval_fields(M.uniform_field([0.5, -1.0]), 0.0, np.array([2.0, 3.0]))
    np.testing.assert_allclose(f.E, [0.5, -1.0])


def test_gauge_transform_examples():
    p = M.symmetric_gauge_magnetic(1.0, 1.0)
    x = np.array([[0.3, -0.7], [1.2, 0.4]])
    q = M.gauge_transform(p, M.constant_gauge(3.0))
    np.testing.assert_allclose(q.scalar(0.5, x), p.scalar(0.5, x))
    np.testing.assert_allclose(q.vector(0.5, x), p.vector(0.5, x))
    q = M.gauge_transform(p, M.linear_gauge([0.5, -2.0]))
    np.testing.assert_allclose(q.scalar(0.5, x), p.scalar(0.5, x))
    np.testing.assert_allclose(q.vector(0.5, x), p.vector(0.5, x) + [0.5, -2.0])
    q = M.gauge_transform(p, M.time_gauge(0.7))
    np.testing.assert_allclose(q.scalar(0.5, x), p.scalar(0.5, x) - 0.7)
    np.testing.assert_allclose(q.vector(0.5, x), p.vector(0.5, x))


@given(point2, st.floats(0, 2))
def test_fields_are_gauge_invariant(x, t):
    p = M.symmetric_gauge_magnetic(1.3, 0.8)
    psi = M.bump_gauge(amplitude=0.8, width=1.1, center=0.3, rate=1.5)
    a = M.eval_fields(p, t, x)
    b = M.eval_fields(M.gauge_transform(p, psi), t, x)
    np.testing.assert_allclose(b.E, a.E, atol=1e-8)
    np.testing.assert_allclose(b.B, a.B, atol=1e-8)


def _pulsed_field():
    """Symmetric gauge with a time-dependent strength ``1 + sin t``."""
    B = lambda t: 1.0 + np.sin(t)  # noqa: E731

    def A(t, x):
        x = np.asarray(x)
        return np.stack([-0.5 * B(t) * x[..., 1], 0.5 * B(t) * x[..., 0]], axis=-1)

    return M.Potential(2, V=lambda t, x: 0.1 * np.asarray(x)[..., 0] ** 2, A=A, static=False)


@given(point2, st.floats(0, 3))
def test_faraday_law(x, t):
    p = _pulsed_field()
    dB = M.fd_partial_t(lambda tt, xx: M.magnetic_field(p, tt, xx)[..., 0], t, x)
    dE = [[M.fd_partial_x(lambda tt, xx, k=k: M.electric_field(p, tt, xx)[..., k], t, x, j)
           for j in range(2)] for k in range(2)]
    # d_t B_12 = -d_1 E_2 + d_2 E_1
    assert abs(dB - (-dE[1][0] + dE[0][1])) < 1e-6


def test_quadratic_weight_examples():
    w = M.quadratic_weight(0.0, 1.0, 1.0, 1)
    assert w(0.0, np.array([0.0])) == 0.0
    assert w(0.0, np.array([1.0])) == pytest.approx(2.0)
    moving = M.quadratic_weight(lambda t: np.array([t]), 1.0, 2.0, 1)
    assert moving(1.0, np.array([3.0])) == pytest.approx(4.0)
    assert not moving.static
    assert w.lower_bound == 0.0


@pytest.mark.parametrize("da,T", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
def test_quadratic_weight_rejects_bad_parameters(da, T):
    with pytest.raises(InvalidParameter):
        M.quadratic_weight(0.0, da, T, 1)


@given(st.lists(coords, min_size=2, max_size=2), coords, st.floats(0.1, 3), st.floats(0.1, 3))
def test_quadratic_weight_nonnegative(x, a, da, T):
    w = M.quadratic_weight(np.array([a, -a]), da, T, 2)
    assert w(0.3, np.array(x)) >= 0


def test_clamp_profile_values():
    prof = M.ClampProfile(ceiling=5.0)
    assert prof(0.5) == pytest.approx(0.5)
    assert prof(1.0) == pytest.approx(1.0)
    np.testing.assert_allclose(prof(np.array([2.0, 3.0, 100.0])), 5.0)
    with pytest.raises(InvalidParameter):
        M.ClampProfile(1.5)
    with pytest.raises(InvalidParameter):
        prof(-0.1)


@given(st.floats(0, 10), st.floats(0, 10))
def test_clamp_profile_monotone(a, b):
    prof = M.ClampProfile(4.0)
    lo, hi = sorted((a, b))
    assert prof(lo) <= prof(hi) + 1e-15


def test_clamped_spin_weight_bounds():
    prof = M.ClampProfile(4.0)
    Ws = M.clamped_spin_weight([-1.0, 1.0], 1.0, 1.0, prof, d=1)
    x = np.linspace(-6, 6, 4001)[:, None]
    vals = Ws(0.0, x)
    assert vals.shape == (4001, 2, 2)
    assert np.all(vals[:, 0, 1] == 0) and np.all(vals[:, 1, 0] == 0)
    diag = vals[:, [0, 1], [0, 1]]
    assert diag.min() >= 0 and diag.max() <= 4.0 + 1e-12
    # bounded first differences
    slope = np.abs(np.diff(diag, axis=0)) / (x[1, 0] - x[0, 0])
    assert slope.max() < 20
    # entry 0.5 at argument 0.5: 2 r^2 = 0.5
    r = 0.5
    assert Ws(0.0, np.array([-1.0 + r]))[0, 0] == pytest.approx(0.5)
    # entries nondecreasing in distance from the record point
    right = diag[x[:, 0] >= -1.0, 0]
    assert np.all(np.diff(right) >= -1e-12)


def test_validator_passes_measured_oscillator():
    rep = M.validate_assumptions(M.harmonic(1.0), M.quadratic_weight(0.0, 1.0, 1.0, 1), 8.0, 500)
    assert rep.all_pass, rep.as_dict()


def test_validator_flags_negative_weight():
    w = M.WeightConfig(1, W=lambda t, x: np.full(np.shape(x)[:-1], -1.0), lower_bound=0.0)
    rep = M.validate_assumptions(M.harmonic(1.0), w, 5.0, 200)
    assert rep.verdict("weight_lower_bound") == "fail"


def test_validator_warns_on_quartic():
    rep = M.validate_assumptions(M.quartic(1.0), M.zero_weight(1), 5.0, 200)
    assert rep.verdict("electric_gradients_bounded") == "warn"
    assert any("polynomial" in n for n in rep.notes)


def test_validator_magnetic_clause_in_two_dimensions():
    rep = M.validate_assumptions(M.symmetric_gauge_magnetic(1.0), M.zero_weight(2), 4.0, 100)
    assert rep.verdict("magnetic_gradients_decay") == "pass"


def test_validator_rejects_no_samples():
    with pytest.raises(InvalidParameter):
        M.validate_assumptions(M.harmonic(), M.zero_weight(), 1.0, 0)
