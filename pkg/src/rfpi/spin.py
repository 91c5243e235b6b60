"""Spin channels along straight paths and the spinor time-sliced propagator.

The channel ``F(t, s; q)`` solves

    dU/dtheta = -(i H_s(theta, q(theta)) + W_s(theta, q(theta))) U,   U(s) = I

along the segment ``q`` from ``(s, y)`` to ``(t, x)``.  It is a contraction
whenever ``W_s`` is positive semidefinite along the path.  Spinor states
carry the component index on axis 0; channels act as ``out_a = F_ab f_b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .action import StraightLine
from .errors import InvalidParameter, NonFinite
from .grid import SpinorWaveFunction, Subdivision
from .model import ClampProfile, Potential, WeightConfig, clamped_spin_weight
from .propagator import (KernelCache, PropagatorConfig, _apply_cutoff, _step_values,
                         _warn_mesh)


@dataclass
class SpinSystem:
    """Matrix fields ``H_s(t, x)`` and ``W_s(t, x)``, each returning ``(..., l, l)``.

    ``static`` means time independent; ``constant`` means independent of both
    time and position, which enables the matrix-exponential fast path.
    """

    levels: int
    H: Callable
    W: Optional[Callable] = None
    psd_offset: float = 0.0
    static: bool = True
    constant: bool = False
    name: str = "custom"

    def __post_init__(self):
        if self.levels < 1:
            raise InvalidParameter("spin system needs at least one level")
        if self.psd_offset < 0:
            raise InvalidParameter("psd_offset must be nonnegative")
        if self.W is None:
            l = self.levels
            self.W = lambda t, x: np.zeros(np.shape(x)[:-1] + (l, l))

    def generator(self, t, x):
        """``i H_s + W_s`` at the points ``x``."""
        G = 1j * np.asarray(self.H(t, x)) + np.asarray(self.W(t, x))
        return G

    def shifted(self, c):
        """Same system with ``W_s`` replaced by ``W_s + c I``."""
        W, l = self.W, self.levels
        return SpinSystem(l, self.H, lambda t, x: W(t, x) + c * np.eye(l), max(0.0, self.psd_offset - c),
                          self.static, self.constant, f"{self.name}+{c:g}I")

    def check(self, points, t=0.0):
        """``(hermiticity defect, min eigenvalue of W_s + offset)`` at sample points."""
        H = np.asarray(self.H(t, points))
        W = np.asarray(self.W(t, points))
        herm = max(float(np.max(np.abs(H - np.swapaxes(H, -1, -2).conj()))),
                   float(np.max(np.abs(W - np.swapaxes(W, -1, -2).conj()))))
        low = float(np.min(np.linalg.eigvalsh(0.5 * (W + np.swapaxes(W, -1, -2).conj()))))
        return herm, low + self.psd_offset


@dataclass
class SpinChannel:
    F: np.ndarray
    s: float
    t: float
    line: Optional[StraightLine] = field(default=None, repr=False)

    @property
    def singular_values(self):
        return np.linalg.svd(self.F, compute_uv=False)

    def is_contraction(self, tol=1e-10):
        return bool(np.all(self.singular_values <= 1 + tol))


def _const(M, levels):
    M = np.asarray(M, dtype=complex)
    if M.shape != (levels, levels):
        raise InvalidParameter(f"matrix must be {levels}x{levels}")
    return lambda t, x: np.broadcast_to(M, np.shape(x)[:-1] + (levels, levels))


def constant_spin_system(H, W=None, name="constant"):
    H = np.asarray(H, dtype=complex)
    l = H.shape[0]
    Wf = None if W is None else _const(W, l)
    return SpinSystem(l, _const(H, l), Wf, constant=True, name=name)


def clamped_spin_system(paths, delta_a, horizon, profile=ClampProfile(), H=None, d=None):
    """Diagonal clamped weights with one record path per level, plus optional constant ``H``."""
    Ws = clamped_spin_weight(paths, delta_a, horizon, profile, d)
    l = Ws.levels
    H = np.zeros((l, l)) if H is None else H
    return SpinSystem(l, _const(H, l), Ws, static=Ws.static, name="clamped")


def random_hermitian(rng, l, scale=1.0):
    Z = rng.normal(size=(l, l)) + 1j * rng.normal(size=(l, l))
    return scale * 0.5 * (Z + Z.conj().T)


def random_spin_system(rng, l=2, d=1):
    """Smooth position-dependent system with ``W_s = B B^dagger`` positive semidefinite."""
    H0, H1 = random_hermitian(rng, l), random_hermitian(rng, l)
    B0 = (rng.normal(size=(l, l)) + 1j * rng.normal(size=(l, l))) / np.sqrt(2 * l)
    B1 = (rng.normal(size=(l, l)) + 1j * rng.normal(size=(l, l))) / np.sqrt(2 * l)
    k = rng.normal(size=d)

    def H(t, x):
        ph = np.sin(np.asarray(x) @ k + t)[..., None, None]
        return H0 + ph * H1

    def W(t, x):
        c = np.cos(np.asarray(x) @ k - 0.5 * t)[..., None, None]
        B = B0 + c * B1
        return B @ np.swapaxes(B, -1, -2).conj()

    return SpinSystem(l, H, W, static=False, name="random")


# ---------------------------------------------------------------------------
# channels


def _path_point(line, theta):
    """Point at time ``theta`` on the segment (broadcast over batched endpoints)."""
    if line.t == line.s:
        return line.y
    return line.y + (theta - line.s) / (line.t - line.s) * (line.x - line.y)


def rk4_matrix(generator, s, t, substeps, U):
    """Classical RK4 for ``dU/dtheta = -G(theta) U`` from ``s`` to ``t``."""
    h = (t - s) / substeps
    th = s
    G0 = generator(th)
    for _ in range(substeps):
        Gm = generator(th + 0.5 * h)
        G1 = generator(th + h)
        k1 = -G0 @ U
        k2 = -Gm @ (U + 0.5 * h * k1)
        k3 = -Gm @ (U + 0.5 * h * k2)
        k4 = -G1 @ (U + h * k3)
        U = U + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        th += h
        G0 = G1
    return U


def _rk4(sys, line, substeps, U=None):
    batch = np.broadcast_shapes(line.x.shape, line.y.shape)[:-1]
    l = sys.levels
    if U is None:
        U = np.broadcast_to(np.eye(l, dtype=complex), batch + (l, l)).copy()
    return rk4_matrix(lambda th: sys.generator(th, _path_point(line, th)), line.s, line.t, substeps, U)


def channel_matrices(sys: SpinSystem, line: StraightLine, substeps=16):
    """Batched channel matrices ``(..., l, l)`` for broadcast endpoints."""
    if substeps < 1:
        raise InvalidParameter("substeps must be >= 1")
    batch = np.broadcast_shapes(line.x.shape, line.y.shape)[:-1]
    l = sys.levels
    if line.t == line.s:
        return np.broadcast_to(np.eye(l, dtype=complex), batch + (l, l)).copy()
    if sys.constant:
        G = sys.generator(line.s, np.zeros((1, line.x.shape[-1])))[0]
        F = expm(-(line.t - line.s) * G)
        out = np.broadcast_to(F, batch + (l, l)).copy()
    else:
        out = _rk4(sys, line, substeps)
    if not np.all(np.isfinite(out)):
        raise NonFinite("non-finite channel matrix")
    return out


def integrate_channel(sys: SpinSystem, line: StraightLine, substeps=16) -> SpinChannel:
    """RK4 integration of the channel ODE along a single straight segment."""
    F = channel_matrices(sys, line, substeps)
    return SpinChannel(F, line.s, line.t, line)


def channel_compose_check(sys: SpinSystem, y, z, x, s, u, t, substeps=16, reference_substeps=4096):
    """Hilbert-Schmidt defect between the channel of the broken path ``y -> z -> x``
    (integrated finely as one ODE) and the product ``F(t, u) F(u, s)``."""
    if not s <= u <= t:
        raise InvalidParameter("need s <= u <= t")
    first = StraightLine(y=y, x=z, s=s, t=u)
    second = StraightLine(y=z, x=x, s=u, t=t)
    F1 = channel_matrices(sys, first, substeps)
    F2 = channel_matrices(sys, second, substeps)
    # one ODE along the whole broken path; the step grid is aligned at u
    n1 = max(1, int(round(reference_substeps * (u - s) / (t - s)))) if t > s else 1
    n2 = max(1, reference_substeps - n1)
    ref = np.eye(sys.levels, dtype=complex)
    if u > s:
        ref = _rk4(sys, first, n1, ref)
    if t > u:
        ref = _rk4(sys, second, n2, ref)
    d = ref - F2 @ F1
    if not np.all(np.isfinite(d)):
        raise NonFinite("non-finite channel defect")
    return float(np.linalg.norm(d))


def rk4_order(sys: SpinSystem, line: StraightLine, substeps=(8, 16, 32), reference_substeps=4096):
    """Observed convergence exponent: least-squares slope of ``-log2(error)`` vs ``log2(substeps)``."""
    ref = _rk4(sys, line, reference_substeps)
    errs = np.array([float(np.max(np.linalg.norm(_rk4(sys, line, n) - ref, axis=(-2, -1))))
                     for n in substeps])
    if np.any(errs <= 0):
        raise InvalidParameter("channel error vanished; order is undefined for this path")
    slope = np.polyfit(np.log2(substeps), np.log2(errs), 1)[0]
    return float(-slope), errs.tolist()


# ---------------------------------------------------------------------------
# spinor propagator


def _pair_matrix(sys, cfg):
    return lambda line: channel_matrices(sys, line, cfg.spin_substeps)


def spin_one_step(p: Potential, w: WeightConfig, sys: SpinSystem, f: SpinorWaveFunction, s, t,
                  cfg: PropagatorConfig = PropagatorConfig(), cache=None) -> SpinorWaveFunction:
    """Scalar one-step kernel times the channel ``F(t, s; segment)`` per pair."""
    if f.levels != sys.levels:
        raise InvalidParameter("spinor and spin system have different level counts")
    if t == s:
        return SpinorWaveFunction(f.grid, f.values.copy(), t)
    vals = _step_values(p, w, f.grid, f.values, s, t, cfg, cache, _pair_matrix(sys, cfg),
                        sys.levels, sys.static)
    return SpinorWaveFunction(f.grid, vals, t)


def iter_spin_time_sliced(p, w, sys, f, subdivision: Subdivision, cfg=PropagatorConfig(), cache=None):
    if f.levels != sys.levels:
        raise InvalidParameter("spinor and spin system have different level counts")
    cache = KernelCache() if cache is None else cache
    _warn_mesh(subdivision, cfg)
    cur = f.values
    yield SpinorWaveFunction(f.grid, cur, 0.0)
    steps = subdivision.steps()
    pm = _pair_matrix(sys, cfg)
    for k, (s, t) in enumerate(steps):
        cur = _step_values(p, w, f.grid, cur, s, t, cfg, cache, pm, sys.levels, sys.static)
        if k < len(steps) - 1 and t > s:
            cur = _apply_cutoff(f.grid, cur, cfg)
        yield SpinorWaveFunction(f.grid, cur, t)


def spin_time_sliced(p, w, sys, f, subdivision: Subdivision, cfg=PropagatorConfig(), cache=None):
    """Composition of spin one-step propagators, earliest step applied first."""
    out = f
    for out in iter_spin_time_sliced(p, w, sys, f, subdivision, cfg, cache):
        pass
    return out
