"""Grid realisation of the one-step weighted propagator and its compositions.

The one-step operator maps ``f`` to

    out(x) = sum_y  h^d * Free(x - y) * exp(i phi(x, y) - w(x, y)) * f(y)

where ``phi`` is the non-kinetic part of the straight-line action, ``w`` the
accumulated weight and ``Free`` the free Fresnel factor.  Two rules are
available for ``Free``:

``"filon"`` (default)
    the free kernel integrated exactly against the sinc interpolant of the
    smooth factor ``exp(i phi - w) f``; it is the band-limited free propagator
    and stays accurate for arbitrarily short steps.
``"trapezoid"``
    the free kernel sampled pointwise; only valid when the Fresnel phase is
    resolved across the whole box, ``m (2 L) h / rho <= pi``.

Kernels are applied matrix-free in row blocks.  Rows are independent, so the
threaded and serial paths produce identical results.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import fresnel

from .action import QuadratureRule, StraightLine, line_integrals, weight_integral
from .errors import BoundaryLeak, GridTooCoarse, InvalidParameter, NonFinite, UndersampledKernel
from .grid import Grid, SpinorWaveFunction, Subdivision, WaveFunction, random_band_limited
from .model import GaugeFunction, PhysicalConstants, Potential, WeightConfig, gauge_transform


@dataclass(frozen=True)
class PropagatorConfig:
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    quad: QuadratureRule = field(default_factory=QuadratureRule)
    max_step: float = math.inf  # advisory only
    cutoff: str = "truncation"  # or "compact"
    cutoff_scale: float = 0.02
    boundary_mass_tol: float = 1e-8
    boundary_fraction: float = 0.05
    quadrature: str = "filon"
    phase_step_limit: float = math.pi / 2
    spin_substeps: int = 16
    threads: int = 1
    chunk_pairs: int = 1 << 20
    cache_entries: int = 1 << 23

    def __post_init__(self):
        if not self.max_step > 0:
            raise InvalidParameter("max_step must be positive")
        if not 0 < self.boundary_mass_tol < 1:
            raise InvalidParameter("boundary_mass_tol must lie in (0, 1)")
        if self.cutoff not in ("truncation", "compact"):
            raise InvalidParameter(f"unknown cutoff {self.cutoff!r}")
        if self.quadrature not in ("filon", "trapezoid"):
            raise InvalidParameter(f"unknown quadrature {self.quadrature!r}")

    @property
    def mass(self):
        return self.constants.mass


@dataclass
class StabilityReport:
    k0: float
    ratios: list
    refinement: dict = field(default_factory=dict)
    spread: float = 1.0
    refinement_unstable: bool = False


# ---------------------------------------------------------------------------
# free factor


def band_limited_free_kernel(z, rho, m, h):
    """Free propagator restricted to wavenumbers ``|k| < pi/h``.

    Equals ``(1/2pi) int_{-pi/h}^{pi/h} exp(-i rho k^2/(2m) + i k z) dk``,
    written with Fresnel integrals.
    """
    z = np.asarray(z, dtype=float)
    a = rho / (2.0 * m)
    k0 = m * z / rho
    kc = np.pi / h
    sc = np.sqrt(2.0 * a / np.pi)

    def E(xi):
        S, C = fresnel(xi)
        return C - 1j * S

    span = E((kc - k0) * sc) - E((-kc - k0) * sc)
    return np.exp(1j * m * z**2 / (2.0 * rho)) * span * np.sqrt(np.pi / (2.0 * a)) / (2.0 * np.pi)


def free_factor_axis(grid: Grid, rho, m, rule="filon"):
    """``h * Free(k h)`` for offsets ``k = -(N-1) .. N-1``."""
    h = grid.spacing
    z = h * np.arange(-(grid.points - 1), grid.points)
    if rule == "filon":
        return h * band_limited_free_kernel(z, rho, m, h)
    return h * np.sqrt(m / (2j * np.pi * rho)) * np.exp(1j * m * z**2 / (2.0 * rho))


def check_fresnel_sampling(grid: Grid, rho, m):
    """Whole-box Nyquist condition for the pointwise-sampled kernel."""
    crit = m * 2 * grid.half_width * grid.spacing / rho
    if crit > np.pi:
        raise UndersampledKernel(
            f"m*(2L)*h/rho = {crit:.3g} exceeds pi; step {rho:.3g} too short for this grid")


# ---------------------------------------------------------------------------
# kernel assembly


class KernelCache:
    """Per-call cache of assembled kernels keyed by step geometry."""

    def __init__(self):
        self.store = {}

    def get(self, key):
        return self.store.get(key)

    def put(self, key, value):
        self.store[key] = value


def _row_blocks(n, per_row, budget):
    step = max(1, budget // max(1, per_row))
    return [(i, min(n, i + step)) for i in range(0, n, step)]


class _StepKernel:
    """Kernel rows of one step, optionally carrying an ``l x l`` matrix factor.

    ``pair_matrix(line)`` returns ``(..., l, l)`` for a batched StraightLine.
    """

    def __init__(self, p, w, grid, s, t, cfg, pair_matrix=None, levels=1):
        self.p, self.w, self.grid, self.s, self.t, self.cfg = p, w, grid, s, t, cfg
        self.rho = t - s
        self.pair_matrix = pair_matrix
        self.levels = levels
        m = cfg.mass
        if cfg.quadrature == "trapezoid":
            check_fresnel_sampling(grid, self.rho, m)
        self.free_axis = free_factor_axis(grid, self.rho, m, cfg.quadrature)
        self.multi = np.unravel_index(np.arange(grid.size), grid.shape)

    def rows(self, i0, i1):
        g = self.grid
        X = g.coords
        xo = X[i0:i1, None, :]
        line = StraightLine(y=X[None, :, :], x=xo, s=self.s, t=self.t)
        a_term, v_term = line_integrals(self.p, line, self.cfg.quad)
        phi = a_term - self.rho * v_term
        if self.cfg.quadrature == "filon":
            self._check_phase(phi, i1 - i0)
        expo = 1j * phi
        if not self.w.is_zero:
            expo = expo - weight_integral(self.w, line, self.cfg.quad)
        N = g.points
        free = np.ones((i1 - i0, g.size), dtype=complex)
        for ax in range(g.dim):
            off = self.multi[ax][i0:i1, None] - self.multi[ax][None, :] + N - 1
            free = free * self.free_axis[off]
        K = free * np.exp(expo)
        if not np.all(np.isfinite(K)):
            raise NonFinite("non-finite kernel entries")
        if self.pair_matrix is not None:
            F = self.pair_matrix(line)
            K = K[..., None, None] * F
        return K

    def _check_phase(self, phi, rows):
        phi = phi.reshape((rows,) + self.grid.shape)
        worst = 0.0
        for ax in range(self.grid.dim):
            worst = max(worst, float(np.max(np.abs(np.diff(phi, axis=1 + ax)), initial=0.0)))
        if worst > self.cfg.phase_step_limit:
            raise UndersampledKernel(
                f"action phase changes by {worst:.3g} rad between neighbouring source points "
                f"(limit {self.cfg.phase_step_limit:.3g}); refine the grid")


def _static(p, w, extra_static=True):
    return bool(p.static and w.static and extra_static)


def _apply_kernel(kernel: _StepKernel, flat, cfg: PropagatorConfig, cache=None, key=None):
    """``flat`` has shape ``(n,)`` or ``(n, l)``; returns the same shape."""
    n = kernel.grid.size
    per_row = n * kernel.levels**2
    full = None
    if cache is not None and key is not None:
        full = cache.get(key)
        if full is None and n * per_row <= cfg.cache_entries:
            blocks = _row_blocks(n, per_row, cfg.chunk_pairs)
            full = np.concatenate([kernel.rows(a, b) for a, b in blocks], axis=0)
            cache.put(key, full)
    if full is not None:
        return _contract(full, flat)
    blocks = _row_blocks(n, per_row, cfg.chunk_pairs)

    def work(ab):
        return _contract(kernel.rows(*ab), flat)

    if cfg.threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            parts = list(ex.map(work, blocks))
    else:
        parts = [work(ab) for ab in blocks]
    return np.concatenate(parts, axis=0)


def _contract(K, flat):
    if K.ndim == 2:
        return K @ flat
    if K.shape[-1] == 1:
        # single level: same matrix product as the scalar kernel
        return (K[..., 0, 0] @ flat[:, 0])[:, None]
    return np.einsum("ijab,jb->ia", K, flat)


def _guard_boundary(grid, values, cfg):
    frac = grid.boundary_mass(values, cfg.boundary_fraction)
    if frac > cfg.boundary_mass_tol:
        raise BoundaryLeak(
            f"boundary mass fraction {frac:.3g} exceeds tolerance {cfg.boundary_mass_tol:.3g}")


def _step_values(p, w, grid, values, s, t, cfg, cache=None, pair_matrix=None,
                 levels=1, matrix_static=True):
    """Shared one-step core on raw arrays (scalar ``grid.shape`` or ``(l, *grid.shape)``)."""
    if not 0 <= s <= t:
        raise InvalidParameter(f"need 0 <= s <= t, got s={s}, t={t}")
    if t == s:
        return values.copy()
    _guard_boundary(grid, values, cfg)
    kernel = _StepKernel(p, w, grid, s, t, cfg, pair_matrix, levels)
    if pair_matrix is None:
        flat = values.reshape(grid.size)
    else:
        flat = values.reshape(levels, grid.size).T
    key = None
    if cache is not None:
        key = ("static", round(t - s, 14)) if _static(p, w, matrix_static) else (s, t)
    out = _apply_kernel(kernel, flat, cfg, cache, key)
    if pair_matrix is None:
        return out.reshape(grid.shape)
    return out.T.reshape((levels,) + grid.shape)


def compact_profile(u):
    """Smooth compactly supported profile with value 1 at the origin."""
    r2 = np.sum(np.asarray(u) ** 2, axis=-1)
    out = np.zeros_like(r2)
    inside = r2 < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


def _apply_cutoff(grid, values, cfg):
    if cfg.cutoff != "compact":
        return values
    chi = compact_profile(cfg.cutoff_scale * grid.coords).reshape(grid.shape)
    return values * chi


# ---------------------------------------------------------------------------
# public operations


def one_step(p: Potential, w: WeightConfig, f: WaveFunction, s, t,
             cfg: PropagatorConfig = PropagatorConfig(), cache=None) -> WaveFunction:
    """Apply the one-step weighted propagator from time ``s`` to ``t``."""
    if t == s:
        return WaveFunction(f.grid, f.values.copy(), t)
    vals = _step_values(p, w, f.grid, f.values, s, t, cfg, cache)
    return WaveFunction(f.grid, vals, t)


def iter_time_sliced(p, w, f, subdivision: Subdivision, cfg=PropagatorConfig(), cache=None):
    """Yield the state at every subdivision time, starting with ``f`` itself."""
    cache = KernelCache() if cache is None else cache
    _warn_mesh(subdivision, cfg)
    cur = f.values
    yield WaveFunction(f.grid, cur, 0.0)
    steps = subdivision.steps()
    for k, (s, t) in enumerate(steps):
        cur = _step_values(p, w, f.grid, cur, s, t, cfg, cache)
        if k < len(steps) - 1 and t > s:
            cur = _apply_cutoff(f.grid, cur, cfg)
        yield WaveFunction(f.grid, cur, t)


def _warn_mesh(subdivision, cfg):
    if subdivision.mesh > cfg.max_step:
        warnings.warn(
            f"mesh {subdivision.mesh:.3g} exceeds advisory max step {cfg.max_step:.3g}",
            RuntimeWarning, stacklevel=3)


def time_sliced(p, w, f, subdivision: Subdivision, cfg=PropagatorConfig(), cache=None):
    """Left-to-right composition of one-step propagators over ``subdivision``."""
    out = f
    for out in iter_time_sliced(p, w, f, subdivision, cfg, cache):
        pass
    return out


def convergence_study(p, w, f, t, meshes, cfg=PropagatorConfig(), oracle=None):
    """Error table of time-sliced approximations against a reference state.

    ``oracle`` is a WaveFunction, an array, or a callable ``t -> state``.
    Each row holds ``nu, mesh, l2_error, order, norm_ratio, fitted_K0``; the
    order compares consecutive rows.
    """
    meshes = list(meshes)
    if any(b <= a for a, b in zip(meshes, meshes[1:])):
        raise InvalidParameter("meshes must be strictly increasing")
    ref = oracle(t) if callable(oracle) else oracle
    ref_vals = getattr(ref, "values", ref)
    n0 = f.norm()
    rows = []
    for nu in meshes:
        sub = Subdivision.uniform(t, nu)
        u = time_sliced(p, w, f, sub, cfg)
        err = f.grid.norm(u.values - ref_vals) if ref_vals is not None else float("nan")
        ratio = u.norm() / n0
        row = {
            "nu": nu,
            "mesh": sub.mesh,
            "l2_error": err,
            "order": float("nan"),
            "norm_ratio": ratio,
            "fitted_K0": math.log(ratio) / t if ratio > 0 and t > 0 else float("nan"),
        }
        if rows and err > 0 and rows[-1]["l2_error"] > 0:
            row["order"] = math.log(rows[-1]["l2_error"] / err) / math.log(nu / rows[-1]["nu"])
        rows.append(row)
    return rows


def stability_estimate(p, w, rho, cfg=PropagatorConfig(), grid: Grid = None, trials=8, seed=0,
                       s=0.0, refine=()) -> StabilityReport:
    """Fit the growth constant ``K0`` of one step from random band-limited states.

    ``K0 = max_trials log(|C f| / |f|) / rho``.  With ``refine`` (extra grid
    point counts) the fit is repeated per grid and the spread reported.
    """
    if trials < 1:
        raise InvalidParameter("trials must be >= 1")
    if grid is None:
        raise InvalidParameter("a grid is required")

    def fit(g):
        rng = np.random.default_rng(seed)
        ratios = []
        cache = KernelCache()
        for _ in range(trials):
            f = random_band_limited(g, rng)
            out = one_step(p, w, f, s, s + rho, cfg, cache)
            ratios.append(out.norm() / f.norm())
        return max(math.log(r) / rho for r in ratios), ratios

    k0, ratios = fit(grid)
    report = StabilityReport(k0=k0, ratios=ratios)
    if refine:
        for n in refine:
            g = Grid(grid.dim, grid.half_width, n)
            report.refinement[n] = fit(g)[0] if n != grid.points else k0
        vals = list(report.refinement.values())
        same_sign = all(v > 0 for v in vals) or all(v < 0 for v in vals)
        mags = [abs(v) for v in vals]
        report.spread = max(mags) / min(mags) if same_sign and min(mags) > 0 else math.inf
        report.refinement_unstable = report.spread > 2.0
    return report


def gauge_check(p: Potential, psi: GaugeFunction, w, f: WaveFunction, subdivision,
                cfg=PropagatorConfig()):
    """Relative L2 defect of the gauge covariance identity of the time-sliced propagator."""
    X = f.grid.coords
    t = subdivision.t
    lhs = time_sliced(gauge_transform(p, psi), w, f, subdivision, cfg)
    phase0 = np.exp(-1j * psi(0.0, X)).reshape(f.grid.shape)
    phase_t = np.exp(1j * psi(t, X)).reshape(f.grid.shape)
    inner = time_sliced(p, w, f.with_values(phase0 * f.values), subdivision, cfg)
    rhs = phase_t * inner.values
    return f.grid.norm(lhs.values - rhs) / f.grid.norm(rhs)


# ---------------------------------------------------------------------------
# weighted Sobolev norm

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def _diff(values, axis, h):
    """Fourth-order centred first derivative with zero padding outside the box."""
    pad = [(0, 0)] * values.ndim
    pad[axis] = (2, 2)
    v = np.pad(values, pad)
    n = values.shape[axis]
    out = np.zeros_like(values)
    for k, c in enumerate(_D1):
        if c:
            out = out + c * np.take(v, np.arange(k, k + n), axis=axis)
    return out / h


def _multi_indices_upto(d, order):
    out = [()]
    for _ in range(d):
        out = [a + (k,) for a in out for k in range(order + 1)]
    return [a for a in out if sum(a) <= order]


def sobolev_norm(f, a: int) -> float:
    """Discrete weighted Sobolev norm of order ``a``.

    ``|f| + sum_{|alpha| <= 2a} |d^alpha f| + |<x>^{2a} f|``; ``a = 0`` gives
    the plain L2 norm.  Spinors combine component norms in quadrature.
    """
    if a < 0:
        raise InvalidParameter("order must be nonnegative")
    g = f.grid
    if a == 0:
        return f.norm()
    if g.points < 4 * 2 * a + 1:
        raise GridTooCoarse(f"{g.points} points cannot hold {2 * a} nested 5-point stencils")
    comps = f.values[None] if isinstance(f, WaveFunction) else f.values
    bracket = (1.0 + np.sum(g.coords**2, axis=-1)).reshape(g.shape) ** a
    total = 0.0
    for c in comps:
        acc = g.norm(c)
        for alpha in _multi_indices_upto(g.dim, 2 * a):
            v = c
            for ax, k in enumerate(alpha):
                for _ in range(k):
                    v = _diff(v, ax, g.spacing)
            acc += g.norm(v)
        acc += g.norm(bracket * c)
        total += acc**2
    return math.sqrt(total)
