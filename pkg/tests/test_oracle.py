import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from rfpi import model as M
from rfpi.errors import AnsatzBreakdown, InvalidParameter, LinearSolveFailure
from rfpi.grid import Grid, SpinorWaveFunction, Subdivision, gaussian_packet, l2_distance
from rfpi.oracle import (GaussianAnsatz, HamiltonianOperator, cn_solve, coherent_state,
                         free_gaussian, gaussian_solve, kinetic_matrix, residual_check,
                         trajectory_rows)
from rfpi.propagator import iter_time_sliced
from rfpi.spin import constant_spin_system

MEASURED = M.quadratic_weight(0.0, 1.0, 1.0, 1)
KAPPA = 2.0  # 2 / (T delta_a^2) for T = delta_a = 1


def _norm_decreasing(vals, slack=0.0):
    return all(b <= a * (1 + slack) for a, b in zip(vals, vals[1:]))


def test_free_cn_matches_closed_form(grid1024):
    f = gaussian_packet(grid1024)
    H = HamiltonianOperator(grid1024, M.free_potential(1))
    u = cn_solve(H, f, 1.0, 1024)
    assert l2_distance(u, free_gaussian(grid1024, 1.0)) < 1e-4


def test_cn_norm_with_absorbing_weight(grid256):
    f = gaussian_packet(grid256, 0.5, 0.3)
    H = HamiltonianOperator(grid256, M.harmonic(), MEASURED)
    _, path = cn_solve(H, f, 1.0, 128, return_path=True)
    norms = [u.norm() for u in path]
    assert norms[-1] <= norms[0] * (1 + 1e-6)
    assert _norm_decreasing(norms, 1e-12)
    assert norms[-1] < 0.9


def test_cn_is_unitary_without_weight(grid256):
    f = gaussian_packet(grid256, 0.5, 0.3)
    H = HamiltonianOperator(grid256, M.harmonic())
    _, path = cn_solve(H, f, 0.5, 64, return_path=True)
    drift = max(abs(b.norm() - a.norm()) for a, b in zip(path, path[1:]))
    assert drift < 1e-9


def test_hamiltonian_is_hermitian_without_weight():
    grid = Grid(2, 4.0, 16)
    H = HamiltonianOperator(grid, M.symmetric_gauge_magnetic(1.0, 1.0)).matrix(0.3)
    assert abs(H - H.conj().T).max() < 1e-12
    Hw = HamiltonianOperator(grid, M.harmonic(d=2), M.quadratic_weight([0.0, 0.0], 1.0, 1.0, 2)).matrix()
    assert abs(Hw - Hw.conj().T).max() > 1.0


def test_kinetic_matrix_second_difference():
    grid = Grid(1, 2.0, 8)
    K = kinetic_matrix(grid, 2.0).toarray()
    h = grid.spacing
    assert K[3, 3] == pytest.approx(1 / (2 * h**2))
    assert K[3, 4] == pytest.approx(-1 / (4 * h**2))
    assert K[0, 7] == 0


def test_cn_rejects_bad_inputs(grid256):
    H = HamiltonianOperator(grid256, M.free_potential(1))
    with pytest.raises(InvalidParameter):
        cn_solve(H, gaussian_packet(grid256), 1.0, 0)
    with pytest.raises(InvalidParameter):
        cn_solve(H, np.zeros(10), 1.0, 4)


def test_cn_reports_inaccurate_solves(grid256):
    H = HamiltonianOperator(grid256, M.harmonic())
    with pytest.raises(LinearSolveFailure):
        cn_solve(H, gaussian_packet(grid256), 1.0, 4, tol=0.0)


def test_free_ansatz_matches_spreading_formula():
    g0 = GaussianAnsatz.normalized(1.0, 0.0, 0.0)
    for t in (0.3, 1.0, 2.5):
        g = gaussian_solve(g0, t)
        assert abs(g.alpha - 1.0 / (1 + 1j * t)) < 1e-9
        assert g.norm() == pytest.approx(1.0, abs=1e-9)


def test_ansatz_matches_free_closed_form_on_grid(grid1024):
    g = gaussian_solve(GaussianAnsatz.normalized(0.8, 0.4, -0.6), 1.2)
    ref = free_gaussian(grid1024, 1.2, 0.4, -0.6, 0.8)
    assert l2_distance(g.evaluate(grid1024), ref) < 1e-9


def test_coherent_state_oscillates_with_constant_norm():
    ts = np.linspace(0, 2 * math.pi, 33)
    gs = gaussian_solve(GaussianAnsatz.normalized(1.0, 1.0, 0.0), ts[-1], stiffness=1.0, times=ts)
    centres = np.array([g.center[0] for g in gs])
    np.testing.assert_allclose(centres, np.cos(ts), atol=1e-8)
    np.testing.assert_allclose([g.norm() for g in gs], 1.0, atol=1e-8)


def test_ansatz_agrees_with_coherent_closed_form(grid256):
    g = gaussian_solve(GaussianAnsatz.normalized(1.0, 0.7, 0.4), 1.3, stiffness=1.0)
    ref = coherent_state(grid256, 1.3, 0.7, 0.4)
    assert l2_distance(g.evaluate(grid256), ref) < 1e-9


def test_pure_damping_norm_strictly_decreases():
    ts = np.linspace(0, 1, 11)
    gs = gaussian_solve(GaussianAnsatz.normalized(1.0, 0.2, 0.1), 1.0, weight_strength=KAPPA, times=ts)
    norms = [g.norm() for g in gs]
    assert all(b < a for a, b in zip(norms, norms[1:]))


@given(st.floats(0.3, 2.0), st.floats(-1, 1), st.floats(-1, 1))
def test_ansatz_coefficients_round_trip(width, c, p):
    g = GaussianAnsatz.normalized(width, c, p)
    back = GaussianAnsatz.from_coefficients(*g.coefficients())
    assert abs(back.alpha - g.alpha) < 1e-12
    np.testing.assert_allclose(back.center, g.center, atol=1e-12)
    np.testing.assert_allclose(back.momentum, g.momentum, atol=1e-12)
    assert abs(back.log_norm - g.log_norm) < 1e-10


def test_ansatz_breakdown_is_reported():
    with pytest.raises(AnsatzBreakdown):
        GaussianAnsatz.from_coefficients(-1.0 + 0j, np.zeros(1, complex), 0j)
    # an imaginary stiffness acts as gain and drives the width through zero
    with pytest.raises(AnsatzBreakdown):
        gaussian_solve(GaussianAnsatz.normalized(), 2.0, stiffness=4j)


def test_negative_weight_strength_rejected():
    with pytest.raises(InvalidParameter):
        gaussian_solve(GaussianAnsatz.normalized(), 1.0, weight_strength=-1.0)


def test_cn_agrees_with_ansatz_on_measured_oscillator():
    grid = Grid(1, 12.0, 1024)
    f = gaussian_packet(grid, 0.5, 0.3)
    u = cn_solve(HamiltonianOperator(grid, M.harmonic(), MEASURED), f, 1.0, 2048)
    g = gaussian_solve(GaussianAnsatz.normalized(1.0, 0.5, 0.3), 1.0, stiffness=1.0, weight_strength=KAPPA)
    assert l2_distance(u, g.evaluate(grid)) < 1e-3


def test_residual_of_cn_trajectory(grid256):
    f = gaussian_packet(grid256, 0.5, 0.3)
    H = HamiltonianOperator(grid256, M.harmonic(), MEASURED)
    _, path = cn_solve(H, f, 0.25, 128, return_path=True)
    assert residual_check(H, path, 1 / 512) < 1e-3


class _ZeroOperator:
    def __init__(self, n):
        self.n = n

    def matrix(self, t=0.0):
        return sp.csr_matrix((self.n, self.n), dtype=complex)


def test_residual_of_stationary_state_is_zero(grid256):
    H = _ZeroOperator(grid256.size)
    f = gaussian_packet(grid256)
    assert residual_check(H, [f, f, f, f], 0.1) == 0.0
    with pytest.raises(InvalidParameter):
        residual_check(H, [f, f], 0.1)


def test_residual_of_time_sliced_trajectory_shrinks():
    grid = Grid(1, 12.0, 512)
    f = gaussian_packet(grid, 0.5, 0.3)
    p = M.harmonic()
    H = HamiltonianOperator(grid, p, MEASURED)
    res = []
    for nu in (64, 256):
        path = list(iter_time_sliced(p, MEASURED, f, Subdivision.uniform(1.0, nu)))
        res.append(residual_check(H, path, 1.0 / nu))
    assert res[1] < res[0]
    assert res[1] < 5e-2


def test_constant_spin_block_decouples_in_eigenbasis(grid256):
    sx = np.array([[0, 1], [1, 0]], complex)
    Hs, Ws = 0.5 * sx, 0.3 * np.eye(2) + 0.2 * sx
    sys = constant_spin_system(Hs, Ws)
    a = gaussian_packet(grid256, 0.5, 0.3).values
    b = gaussian_packet(grid256, -0.4, -0.2).values
    f = SpinorWaveFunction(grid256, np.stack([a, 0.6 * b]))
    spin = cn_solve(HamiltonianOperator(grid256, M.harmonic(), spin=sys), f, 1.0, 256)
    # sigma_x eigenvectors (1, +-1)/sqrt2 with eigenvalues 0.5 - 0.5i and -0.5 - 0.1i
    V = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    g = np.einsum("ab,bx->ax", V.T, f.values)
    parts = []
    for j, (shift, damp) in enumerate([(0.5, 0.5), (-0.5, 0.1)]):
        pot = M.Potential(1, V=lambda t, x, s=shift: 0.5 * np.asarray(x)[..., 0] ** 2 + s)
        H = HamiltonianOperator(grid256, pot, M.constant_weight(damp))
        parts.append(cn_solve(H, g[j], 1.0, 256))
    recon = np.einsum("ab,bx->ax", V, np.stack(parts))
    assert grid256.norm(spin.values - recon) < 1e-8


def test_trajectory_rows_track_the_centre(grid256):
    states = [coherent_state(grid256, t, 1.0) for t in (0.0, math.pi / 2, math.pi)]
    rows = trajectory_rows(states, [s.t for s in states])
    assert [round(r["center"], 6) for r in rows] == [1.0, 0.0, -1.0]
    assert rows[0]["width"] == pytest.approx(math.sqrt(0.5), abs=1e-6)
    assert set(rows[0]) == {"t", "norm", "center", "width"}
