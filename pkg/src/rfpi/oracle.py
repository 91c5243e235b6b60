"""Reference solutions for the absorbing (non-self-adjoint) Schrodinger equation.

Two independent routes:

* :func:`cn_solve` -- Crank-Nicolson in time on a finite-difference
  Hamiltonian with homogeneous Dirichlet walls.  The magnetic kinetic term
  uses link phases ``exp(-i h A(midpoint))`` so the stencil stays Hermitian.
* :func:`gaussian_solve` -- exact Gaussian ansatz for quadratic models.

Gaussian ansatz
---------------
Write ``u = exp(-a |x|^2 / 2 + b . x + c)`` and take

    V - iW = k |x|^2 / 2 + l . x + n            (k, l, n complex)

with a constant vector potential ``A``.  Substituting into
``i u_t = (1/2m)(-i grad - A)^2 u + (V - iW) u`` and matching powers of ``x``:

    a' = i (k - a^2 / m)
    b' = -i (a b / m + l) - a A / m
    c' = -(i / 2m) (-b.b + d a + 2 i A.b + |A|^2) - i n

For the quadratic weight ``kappa |x - r|^2`` one has ``k = m w^2 - 2 i kappa``,
``l = F + 2 i kappa r`` and ``n = v0 - i kappa |r|^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .errors import AnsatzBreakdown, InvalidParameter, LinearSolveFailure, NonFinite
from .grid import Grid, WaveFunction
from .model import Potential, WeightConfig, zero_weight


# ---------------------------------------------------------------------------
# finite-difference Hamiltonians


def kinetic_matrix(grid: Grid, mass, potential: Potential = None, t=0.0):
    """``(1/2m) sum_j (-i d_j - A_j)^2`` with link phases; Dirichlet walls."""
    n = grid.size
    h = grid.spacing
    X = grid.coords
    idx = np.arange(n).reshape(grid.shape)
    rows, cols, vals = [np.arange(n)], [np.arange(n)], [np.full(n, grid.dim / (mass * h**2), complex)]
    for ax in range(grid.dim):
        lo = np.take(idx, np.arange(grid.points - 1), axis=ax).ravel()
        hi = np.take(idx, np.arange(1, grid.points), axis=ax).ravel()
        link = np.ones(lo.size, complex)
        if potential is not None and potential.A is not None:
            mid = 0.5 * (X[lo] + X[hi])
            link = np.exp(-1j * h * potential.vector(t, mid)[:, ax])
        c = -1.0 / (2 * mass * h**2)
        rows += [lo, hi]
        cols += [hi, lo]
        vals += [c * link, c * np.conj(link)]
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


class HamiltonianOperator:
    """Discrete ``H_w(t)`` (optionally with a spin part) on a grid.

    ``spin`` is a :class:`rfpi.spin.SpinSystem`; the state layout is then
    ``(l, *grid.shape)`` flattened in C order.
    """

    def __init__(self, grid: Grid, potential: Potential, weight: WeightConfig = None,
                 mass=1.0, spin=None):
        self.grid = grid
        self.potential = potential
        self.weight = weight if weight is not None else zero_weight(grid.dim)
        self.mass = mass
        self.spin = spin
        self.levels = 1 if spin is None else spin.levels
        self.static = potential.static and self.weight.static and (spin is None or spin.static)
        self._cache = None

    @property
    def size(self):
        return self.grid.size * self.levels

    def scalar_matrix(self, t, include_weight=True):
        X = self.grid.coords
        diag = self.potential.scalar(t, X).astype(complex)
        if include_weight and not self.weight.is_zero:
            diag = diag - 1j * self.weight(t, X)
        return kinetic_matrix(self.grid, self.mass, self.potential, t) + sp.diags(diag)

    def matrix(self, t=0.0, include_weight=True):
        if self.static and include_weight and self._cache is not None:
            return self._cache
        H = self.scalar_matrix(t, include_weight)
        if self.spin is not None:
            l = self.levels
            X = self.grid.coords
            M = self.spin.H(t, X).astype(complex)
            if include_weight:
                M = M - 1j * self.spin.W(t, X)
            blocks = [[sp.diags(M[:, a, b]) + (H if a == b else 0) for b in range(l)] for a in range(l)]
            H = sp.bmat(blocks, format="csr")
        if not np.all(np.isfinite(H.data)):
            raise NonFinite("non-finite Hamiltonian entries")
        if self.static and include_weight:
            self._cache = H
        return H

    def apply(self, t, u):
        return self.matrix(t) @ np.asarray(u).ravel()


def _flat(state):
    return np.asarray(getattr(state, "values", state), dtype=complex).ravel()


def _rewrap(state, flat, t):
    if hasattr(state, "with_values"):
        return state.with_values(flat.reshape(state.values.shape), t)
    return flat.reshape(np.shape(state))


def cn_solve(H: HamiltonianOperator, f, t, n_steps, t0=0.0, return_path=False, tol=1e-10):
    """Crank-Nicolson: ``(I + i d H/2) u' = (I - i d H/2) u`` with ``H`` at mid-step.

    Linear systems are solved by sparse LU; the relative residual of every
    solve is checked against ``tol``.
    """
    if n_steps < 1:
        raise InvalidParameter("n_steps must be >= 1")
    u = _flat(f)
    if u.size != H.size:
        raise InvalidParameter("state does not match the Hamiltonian grid")
    delta = (t - t0) / n_steps
    I = sp.identity(H.size, dtype=complex, format="csc")
    lu = None
    path = [u.copy()] if return_path else None
    for k in range(n_steps):
        tm = t0 + (k + 0.5) * delta
        Hm = H.matrix(tm)
        lhs = (I + 0.5j * delta * Hm).tocsc()
        rhs = u - 0.5j * delta * (Hm @ u)
        if lu is None or not H.static:
            try:
                lu = spla.splu(lhs)
            except RuntimeError as exc:
                raise LinearSolveFailure(str(exc)) from exc
        new = lu.solve(rhs)
        res = np.linalg.norm(lhs @ new - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if not np.isfinite(res) or res > tol:
            raise LinearSolveFailure(f"relative residual {res:.3g} above {tol:.1g}")
        u = new
        if return_path:
            path.append(u.copy())
    out = _rewrap(f, u, t)
    if return_path:
        return out, [_rewrap(f, v, t0 + k * delta) for k, v in enumerate(path)]
    return out


def residual_check(H: HamiltonianOperator, u_path, delta, t0=0.0):
    """Largest relative residual of the centred-difference equation along a path."""
    vecs = [_flat(u) for u in u_path]
    if len(vecs) < 3:
        raise InvalidParameter("need at least three states")
    worst = 0.0
    for n in range(1, len(vecs) - 1):
        tn = t0 + n * delta
        r = 1j * (vecs[n + 1] - vecs[n - 1]) / (2 * delta) - H.matrix(tn) @ vecs[n]
        nu = np.linalg.norm(vecs[n])
        if not np.isfinite(np.linalg.norm(r)):
            raise NonFinite("non-finite residual")
        worst = max(worst, float(np.linalg.norm(r) / nu) if nu > 0 else 0.0)
    return worst


def trajectory_rows(states, times):
    """Rows ``(t, norm, center, width)`` for plotting a trajectory."""
    rows = []
    for u, t in zip(states, times):
        g = u.grid
        dens = np.abs(u.values) ** 2
        dens = dens.reshape(-1, g.size).sum(axis=0)
        mass = dens.sum()
        X = g.coords
        center = float(dens @ X[:, 0] / mass) if mass > 0 else float("nan")
        mean = dens @ X / mass if mass > 0 else np.zeros(g.dim)
        var = float(dens @ np.sum((X - mean) ** 2, axis=-1) / mass) if mass > 0 else float("nan")
        rows.append({"t": t, "norm": u.norm(), "center": center, "width": math.sqrt(var)})
    return rows


# ---------------------------------------------------------------------------
# Gaussian ansatz


@dataclass
class GaussianAnsatz:
    """``exp(-alpha |x - center|^2 / 2 + i momentum . (x - center) + log_norm)``."""

    alpha: complex
    center: np.ndarray
    momentum: np.ndarray
    log_norm: complex = 0.0

    def __post_init__(self):
        self.center = np.atleast_1d(np.asarray(self.center, dtype=float))
        self.momentum = np.atleast_1d(np.asarray(self.momentum, dtype=float))
        self.alpha = complex(self.alpha)
        self.log_norm = complex(self.log_norm)

    @property
    def dim(self):
        return self.center.size

    @classmethod
    def normalized(cls, width=1.0, center=0.0, momentum=0.0, d=1):
        alpha = 1.0 / width**2
        c = np.broadcast_to(np.asarray(center, dtype=float), (d,))
        p = np.broadcast_to(np.asarray(momentum, dtype=float), (d,))
        return cls(alpha, c, p, 0.25 * d * math.log(alpha / math.pi))

    def coefficients(self):
        a = self.alpha
        b = a * self.center + 1j * self.momentum
        c = -0.5 * a * self.center @ self.center - 1j * self.momentum @ self.center + self.log_norm
        return a, b, c

    @classmethod
    def from_coefficients(cls, a, b, c):
        if not a.real > 0:
            raise AnsatzBreakdown(f"width parameter {a} has nonpositive real part")
        mu = b.real / a.real
        p = b.imag - a.imag * mu
        gamma = c + 0.5 * a * mu @ mu + 1j * p @ mu
        return cls(a, mu, p, gamma)

    def evaluate(self, grid: Grid, t=0.0):
        a, b, c = self.coefficients()
        X = grid.coords
        vals = np.exp(-0.5 * a * np.sum(X**2, axis=-1) + X @ b + c)
        return WaveFunction(grid, vals.reshape(grid.shape), t)

    def norm(self):
        a, b, c = self.coefficients()
        ar = a.real
        return math.sqrt((math.pi / ar) ** (self.dim / 2)
                         * math.exp(float(b.real @ b.real) / ar + 2 * c.real))


def gaussian_solve(initial: GaussianAnsatz, t, mass=1.0, stiffness=0.0, force=None, offset=0.0,
                   weight_strength=0.0, weight_center=None, vector_potential=None,
                   rtol=1e-10, atol=1e-12, times=None):
    """Integrate the ansatz ODEs for ``V = stiffness|x|^2/2 + force.x + offset``
    and ``W = weight_strength |x - weight_center|^2``.

    Returns the ansatz at ``t`` or, with ``times``, a list at those times.
    """
    d = initial.dim
    F = np.zeros(d) if force is None else np.broadcast_to(np.asarray(force, float), (d,))
    r = np.zeros(d) if weight_center is None else np.broadcast_to(np.asarray(weight_center, float), (d,))
    A = np.zeros(d) if vector_potential is None else np.broadcast_to(np.asarray(vector_potential, float), (d,))
    kappa = float(weight_strength)
    if kappa < 0:
        raise InvalidParameter("weight strength must be nonnegative")
    k = stiffness - 2j * kappa
    lvec = F + 2j * kappa * r
    n0 = offset - 1j * kappa * (r @ r)
    m = mass

    def rhs(_, y):
        a, b, c = y[0], y[1:1 + d], y[1 + d]
        da = 1j * (k - a * a / m)
        db = -1j * (a * b / m + lvec) - a * A / m
        dc = -(1j / (2 * m)) * (-(b @ b) + d * a + 2j * (A @ b) + A @ A) - 1j * n0
        return np.concatenate([[da], db, [dc]])

    def breakdown(_, y):
        return y[0].real

    breakdown.terminal = True
    a0, b0, c0 = initial.coefficients()
    y0 = np.concatenate([[a0], b0.astype(complex), [c0]])
    eval_t = None if times is None else np.asarray(times, float)
    sol = solve_ivp(rhs, (0.0, t), y0, method="RK45", rtol=rtol, atol=atol,
                    t_eval=eval_t, events=breakdown)
    if sol.status == 1 or not sol.success:
        raise AnsatzBreakdown("Gaussian width lost positivity during integration")

    def unpack(y):
        return GaussianAnsatz.from_coefficients(y[0], y[1:1 + d], y[1 + d])

    if times is not None:
        return [unpack(sol.y[:, j]) for j in range(sol.y.shape[1])]
    return unpack(sol.y[:, -1])


def free_gaussian(grid: Grid, t, center=0.0, momentum=0.0, width=1.0, mass=1.0):
    """Closed-form free evolution of a normalised Gaussian packet."""
    d = grid.dim
    g0 = GaussianAnsatz.normalized(width, center, momentum, d)
    a0, b0, c0 = g0.coefficients()
    z = 1 + 1j * a0 * t / mass
    a = a0 / z
    b = b0 / z
    c = c0 + (b0 @ b0) / (2 * a0) * (1 - 1 / z) - 0.5 * d * np.log(z)
    X = grid.coords
    vals = np.exp(-0.5 * a * np.sum(X**2, axis=-1) + X @ b + c)
    return WaveFunction(grid, vals.reshape(grid.shape), t)


def coherent_state(grid: Grid, t, q0=0.0, p0=0.0, omega=1.0, mass=1.0):
    """Closed-form harmonic coherent state (ground-state width) at time ``t``."""
    d = grid.dim
    alpha = mass * omega
    g0 = GaussianAnsatz.normalized(1 / math.sqrt(alpha), q0, p0, d)
    a0, b0, c0 = g0.coefficients()
    b = b0 * np.exp(-1j * omega * t)
    c = c0 - 0.5j * d * omega * t + (b0 @ b0) * (1 - np.exp(-2j * omega * t)) / (4 * mass * omega)
    X = grid.coords
    vals = np.exp(-0.5 * alpha * np.sum(X**2, axis=-1) + X @ b + c)
    return WaveFunction(grid, vals.reshape(grid.shape), t)
