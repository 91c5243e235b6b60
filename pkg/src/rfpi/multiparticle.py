"""Two-particle time-sliced propagation, tensor channels and exchange symmetry.

State layout: ``values[a_1, ..., a_N, x_1, ..., x_N]`` with spin indices first
(row-major, so the Kronecker convention is ``F_1 (x) F_2 (x) ...``) followed by
the per-particle grid axes.

For straight joint paths the relative coordinate ``q_1 - q_2`` also moves on
a straight line, so the joint one-step kernel factorizes as

    K(x, y) = K_1(x_1, y_1) K_2(x_2, y_2) P(x_1 - x_2, y_1 - y_2)

where ``K_j`` are single-particle kernels (carrying ``F_j``) and ``P`` is the
pair-coupling phase, tabulated on grid offsets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .action import StraightLine
from .errors import (IndexOutOfRange, InvalidParameter, NonFinite, NotIdenticalParticles,
                     ResourceLimit)
from .grid import Grid, SpinorWaveFunction, Subdivision, WaveFunction
from .model import Potential, WeightConfig, zero_weight
from .propagator import (KernelCache, PropagatorConfig, _apply_cutoff, _guard_boundary,
                         _StepKernel, _warn_mesh)
from .spin import SpinSystem, channel_matrices, rk4_matrix


@dataclass
class MultiParticleState:
    grid: Grid  # single-particle grid
    values: np.ndarray
    particles: int = 2
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        N = self.particles
        if N < 1:
            raise InvalidParameter("need at least one particle")
        expect_tail = self.grid.shape * N
        if self.values.ndim != N + len(expect_tail) or self.values.shape[N:] != expect_tail:
            raise InvalidParameter("values must have shape (l,)*N + grid.shape*N")
        if len(set(self.values.shape[:N])) != 1:
            raise InvalidParameter("all particles must have the same number of levels")
        if not np.all(np.isfinite(self.values)):
            raise NonFinite("state has non-finite entries")

    @property
    def levels(self):
        return self.values.shape[0]

    @property
    def joint_grid(self):
        return Grid(self.grid.dim * self.particles, self.grid.half_width, self.grid.points)

    def norm(self):
        return float(np.sqrt(self.grid.cell**self.particles * np.sum(np.abs(self.values) ** 2)))

    def with_values(self, values, t=None):
        return MultiParticleState(self.grid, values, self.particles, self.t if t is None else t)

    @classmethod
    def product(cls, states: Sequence, t=0.0):
        """Tensor product of single-particle (spinor) wave functions."""
        comps = []
        for f in states:
            v = f.values if isinstance(f, SpinorWaveFunction) else f.values[None]
            comps.append(v)
        grid = states[0].grid
        N = len(comps)
        out = comps[0]
        for v in comps[1:]:
            out = np.multiply.outer(out, v)
        # axes now (a1, x1.., a2, x2.., ...) -> (a1, a2, ..., x1.., x2.., ...)
        d = grid.dim
        block = 1 + d
        spin_axes = [k * block for k in range(N)]
        grid_axes = [k * block + 1 + j for k in range(N) for j in range(d)]
        return cls(grid, np.transpose(out, spin_axes + grid_axes), N, t)


def symmetrized(f, g, sign=+1):
    """``(f (x) g + sign g (x) f) / sqrt(2)``."""
    a = MultiParticleState.product([f, g])
    b = MultiParticleState.product([g, f])
    return a.with_values((a.values + sign * b.values) / math.sqrt(2))


def exchange(f: MultiParticleState, i, j) -> MultiParticleState:
    """Swap particle slots ``i`` and ``j`` in both spin and grid indices."""
    N = f.particles
    for k in (i, j):
        if not (isinstance(k, (int, np.integer)) and 0 <= k < N):
            raise IndexOutOfRange(f"particle index {k} outside 0..{N - 1}")
    d = f.grid.dim
    perm = list(range(f.values.ndim))
    perm[i], perm[j] = perm[j], perm[i]
    for a in range(d):
        pi, pj = N + i * d + a, N + j * d + a
        perm[pi], perm[pj] = perm[pj], perm[pi]
    return f.with_values(np.ascontiguousarray(np.transpose(f.values, perm)))


# ---------------------------------------------------------------------------
# models


@dataclass
class MultiParticleModel:
    """Per-particle fields, an optional pair interaction ``pair(r)`` and spin systems.

    ``pair`` takes relative coordinates ``x_j - x_k`` of shape ``(..., d)`` and
    is summed over ordered pairs ``j != k``, so a symmetric ``pair`` is counted
    twice per unordered pair.
    """

    potentials: List[Potential]
    weights: List[WeightConfig]
    pair: Optional[Callable] = None
    spins: Optional[List[SpinSystem]] = None
    pair_static: bool = True

    def __post_init__(self):
        if len(self.potentials) != len(self.weights):
            raise InvalidParameter("one weight per particle required")
        if self.spins is not None and len(self.spins) != len(self.potentials):
            raise InvalidParameter("one spin system per particle required")
        dims = {p.dim for p in self.potentials}
        if len(dims) != 1:
            raise InvalidParameter("all particles must share a spatial dimension")

    @property
    def particles(self):
        return len(self.potentials)

    @property
    def dim(self):
        return self.potentials[0].dim

    @property
    def levels(self):
        return 1 if self.spins is None else self.spins[0].levels

    @property
    def static(self):
        ok = all(p.static for p in self.potentials) and all(w.static for w in self.weights)
        if self.spins is not None:
            ok = ok and all(s.static for s in self.spins)
        return ok and self.pair_static

    @property
    def identical(self):
        def same(items):
            return all(it is items[0] for it in items[1:])
        return same(self.potentials) and same(self.weights) and (
            self.spins is None or same(self.spins))

    @classmethod
    def identical_particles(cls, potential, weight=None, pair=None, spin=None, particles=2):
        weight = zero_weight(potential.dim) if weight is None else weight
        spins = None if spin is None else [spin] * particles
        return cls([potential] * particles, [weight] * particles, pair, spins)


def harmonic_pair(kappa):
    """``V_12(r) = kappa |r|^2``."""
    return lambda r: kappa * np.sum(np.asarray(r) ** 2, axis=-1)


def zero_pair():
    return lambda r: np.zeros(np.shape(r)[:-1])


# ---------------------------------------------------------------------------
# channels


def channel_tensor(sys_list: Sequence[SpinSystem], lines: Sequence[StraightLine], substeps=16,
                   method="kron"):
    """Joint channel ``l^N x l^N``: Kronecker product of per-particle channels,
    or (``method="direct"``) RK4 on the joint Kronecker-sum generator."""
    if len(sys_list) != len(lines) or not lines:
        raise InvalidParameter("one line per spin system required")
    s, t = lines[0].s, lines[0].t
    if any(ln.s != s or ln.t != t for ln in lines):
        raise InvalidParameter("all lines must share the interval")
    if method == "kron":
        out = np.ones((1, 1), dtype=complex)
        for sys, ln in zip(sys_list, lines):
            out = np.kron(out, channel_matrices(sys, ln, substeps))
        return out
    if method != "direct":
        raise InvalidParameter(f"unknown method {method!r}")
    sizes = [sys.levels for sys in sys_list]
    total = int(np.prod(sizes))
    if t == s:
        return np.eye(total, dtype=complex)

    def gen(theta):
        G = np.zeros((total, total), dtype=complex)
        for k, (sys, ln) in enumerate(zip(sys_list, lines)):
            q = ln.y + (theta - s) / (t - s) * (ln.x - ln.y)
            Gk = sys.generator(theta, np.asarray(q)[None])[0]
            left = np.eye(int(np.prod(sizes[:k])))
            right = np.eye(int(np.prod(sizes[k + 1:])))
            G = G + np.kron(np.kron(left, Gk), right)
        return G

    out = rk4_matrix(gen, s, t, substeps, np.eye(total, dtype=complex))
    if not np.all(np.isfinite(out)):
        raise NonFinite("non-finite joint channel")
    return out


# ---------------------------------------------------------------------------
# joint propagation (N = 2, d = 1)


def work_estimate(points, levels, particles=2, dim=1):
    return float(points) ** (2 * dim * particles) * levels ** (2 * particles)


def _single_kernels(model, grid, s, t, cfg, cache):
    out = []
    for j in range(model.particles):
        key = ("single", j, round(t - s, 14)) if model.static else ("single", j, s, t)
        K = cache.get(key) if cache is not None else None
        if K is None:
            sys = None if model.spins is None else model.spins[j]
            pm = None if sys is None else (lambda line, sys=sys: channel_matrices(sys, line, cfg.spin_substeps))
            ker = _StepKernel(model.potentials[j], model.weights[j], grid, s, t, cfg, pm, model.levels)
            K = ker.rows(0, grid.size)
            if K.ndim == 2:
                K = K[..., None, None]
            if cache is not None:
                cache.put(key, K)
        out.append(K)
    return out


def _pair_table(model, grid, s, t, quad):
    """``exp(-i rho int V_12)`` on offsets ``(x_1 - x_2, y_1 - y_2)`` plus the reverse order."""
    N, h = grid.points, grid.spacing
    r = h * np.arange(-(N - 1), N)
    rx = r[:, None, None]
    ry = r[None, :, None]
    rho = t - s
    acc = 0.0
    for th, wt in zip(quad.nodes, quad.weights):
        q = rx - th * (rx - ry)
        tt = t - th * rho
        acc = acc + wt * (model.pair(q) + model.pair(-q))
    table = np.exp(-1j * rho * acc)
    if not np.all(np.isfinite(table)):
        raise NonFinite("non-finite pair coupling")
    return table


def _joint_step(model, grid, values, s, t, cfg, cache):
    K1, K2 = _single_kernels(model, grid, s, t, cfg, cache)
    n = grid.points
    if model.pair is None:
        g = np.einsum("xyab,bcyw->acxw", K1, values, optimize=True)
        return np.einsum("zwcd,adxw->acxz", K2, g, optimize=True)
    key = ("pair", round(t - s, 14)) if model.static else ("pair", s, t)
    P = cache.get(key) if cache is not None else None
    if P is None:
        P = _pair_table(model, grid, s, t, cfg.quad)
        if cache is not None:
            cache.put(key, P)
    idx = np.arange(n)
    ry = idx[:, None] - idx[None, :] + n - 1
    out = np.empty_like(values)
    for x1 in range(n):
        T = P[(x1 - idx + n - 1)[:, None, None], ry[None, :, :]]  # [x2, y1, y2]
        g = np.einsum("yab,bcyw->acyw", K1[x1], values, optimize=True)
        hh = np.einsum("zyw,acyw->aczw", T, g, optimize=True)
        out[:, :, x1, :] = np.einsum("zwcd,adzw->acz", K2, hh, optimize=True)
    return out


def iter_multi_time_sliced(model: MultiParticleModel, f: MultiParticleState, subdivision: Subdivision,
                           cfg: PropagatorConfig = PropagatorConfig(), cache=None, work_budget=3e8):
    if model.particles != 2 or model.dim != 1 or f.particles != 2 or f.grid.dim != 1:
        raise InvalidParameter("joint propagation supports two particles in one dimension")
    if f.levels != model.levels:
        raise InvalidParameter("state and model have different spin level counts")
    work = work_estimate(f.grid.points, f.levels)
    if work > work_budget:
        raise ResourceLimit(f"joint kernel work {work:.3g} exceeds budget {work_budget:.3g}")
    cache = KernelCache() if cache is None else cache
    _warn_mesh(subdivision, cfg)
    jg = f.joint_grid
    cur = f.values
    yield f.with_values(cur, 0.0)
    steps = subdivision.steps()
    for k, (s, t) in enumerate(steps):
        if t > s:
            _guard_boundary(jg, cur, cfg)
            cur = _joint_step(model, f.grid, cur, s, t, cfg, cache)
            if not np.all(np.isfinite(cur)):
                raise NonFinite("non-finite joint state")
            if k < len(steps) - 1:
                cur = _apply_cutoff(jg, cur, cfg)
        else:
            cur = cur.copy()
        yield f.with_values(cur, t)


def multi_time_sliced(model, f, subdivision, cfg=PropagatorConfig(), cache=None, work_budget=3e8):
    """Time-sliced two-particle propagator; matrix-free in ``O(N_g^4 l^4)`` per step."""
    out = f
    for out in iter_multi_time_sliced(model, f, subdivision, cfg, cache, work_budget):
        pass
    return out


def relative_distance(a: MultiParticleState, b: MultiParticleState):
    den = b.norm()
    return float(np.sqrt(a.grid.cell**a.particles * np.sum(np.abs(a.values - b.values) ** 2)) / den)


def symmetry_check(model: MultiParticleModel, f: MultiParticleState, subdivision,
                   cfg=PropagatorConfig(), cache=None):
    """``(||P Kf - Kf|| / ||Kf||, ||P Kf + Kf|| / ||Kf||)`` with ``P`` the exchange of slots 0, 1."""
    if not model.identical:
        raise NotIdenticalParticles("symmetry check needs identical particles")
    Kf = multi_time_sliced(model, f, subdivision, cfg, cache)
    PKf = exchange(Kf, 0, 1)
    sym = relative_distance(PKf, Kf)
    anti = relative_distance(PKf.with_values(-PKf.values), Kf)
    return sym, anti


def exchange_commutator(model, f, subdivision, cfg=PropagatorConfig(), cache=None):
    """Relative defect between ``P K f`` and ``K P f``."""
    if not model.identical:
        raise NotIdenticalParticles("exchange commutation needs identical particles")
    cache = KernelCache() if cache is None else cache
    a = exchange(multi_time_sliced(model, f, subdivision, cfg, cache), 0, 1)
    b = multi_time_sliced(model, exchange(f, 0, 1), subdivision, cfg, cache)
    return relative_distance(a, b)


# ---------------------------------------------------------------------------
# joint fields on the configuration space, for the finite-difference oracle


def joint_potential(model: MultiParticleModel) -> Potential:
    d, N = model.dim, model.particles

    def parts(x):
        x = np.asarray(x, dtype=float)
        return [x[..., j * d:(j + 1) * d] for j in range(N)]

    def V(t, x):
        xs = parts(x)
        out = sum(p.scalar(t, xj) for p, xj in zip(model.potentials, xs))
        if model.pair is not None:
            for j in range(N):
                for k in range(N):
                    if j != k:
                        out = out + model.pair(xs[j] - xs[k])
        return out

    A = None
    if any(p.A is not None for p in model.potentials):
        def A(t, x):
            xs = parts(x)
            return np.concatenate([p.vector(t, xj) for p, xj in zip(model.potentials, xs)], axis=-1)

    return Potential(d * N, V, A, name="joint", static=model.static)


def joint_weight(model: MultiParticleModel) -> WeightConfig:
    d, N = model.dim, model.particles
    if all(w.is_zero for w in model.weights):
        return zero_weight(d * N)

    def W(t, x):
        x = np.asarray(x, dtype=float)
        return sum(w(t, x[..., j * d:(j + 1) * d]) for j, w in enumerate(model.weights))

    low = sum(w.lower_bound for w in model.weights)
    return WeightConfig(d * N, W, lower_bound=low, name="joint",
                        static=all(w.static for w in model.weights))


def joint_spin(model: MultiParticleModel) -> Optional[SpinSystem]:
    """Kronecker-sum spin system on the joint configuration space."""
    if model.spins is None:
        return None
    d, N, l = model.dim, model.particles, model.levels

    def ksum(field_name):
        def fn(t, x):
            x = np.asarray(x, dtype=float)
            out = 0
            for j, sys in enumerate(model.spins):
                M = np.asarray(getattr(sys, field_name)(t, x[..., j * d:(j + 1) * d]))
                left, right = np.eye(l**j), np.eye(l ** (N - j - 1))
                term = np.einsum("ab,...cd,ef->...acebdf", left, M, right)
                out = out + term.reshape(M.shape[:-2] + (l**N, l**N))
            return out
        return fn

    return SpinSystem(l**N, ksum("H"), ksum("W"), static=all(s.static for s in model.spins),
                      name="joint")


def joint_cn_state(f: MultiParticleState):
    """View a two-particle state as a (spinor) wave function on the joint grid."""
    jg = f.joint_grid
    if f.levels == 1:
        return WaveFunction(jg, f.values.reshape(jg.shape), f.t)
    return SpinorWaveFunction(jg, f.values.reshape((f.levels**f.particles,) + jg.shape), f.t)


def from_joint(f_template: MultiParticleState, g):
    return f_template.with_values(np.asarray(g.values).reshape(f_template.values.shape), g.t)
