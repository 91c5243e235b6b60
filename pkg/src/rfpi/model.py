"""Physical inputs: potentials, fields, measurement weights, gauge functions.

Every callable here follows one convention: ``fn(t, x)`` with ``t`` a float
(or an array broadcastable against the leading axes of ``x``) and ``x`` an
array of shape ``(..., d)``.  Scalar fields return shape ``(...)``, vector
fields ``(..., d)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidParameter, NonFinite

ScalarField = Callable[[float, np.ndarray], np.ndarray]
VectorField = Callable[[float, np.ndarray], np.ndarray]

FD_REL_STEP = 1e-4


@dataclass(frozen=True)
class PhysicalConstants:
    mass: float = 1.0
    hbar: float = 1.0
    charge: float = 1.0

    def __post_init__(self):
        if not self.mass > 0:
            raise InvalidParameter(f"mass must be positive, got {self.mass}")
        if self.hbar != 1.0 or self.charge != 1.0:
            raise InvalidParameter("units are fixed to hbar = 1 and unit charge")


# ---------------------------------------------------------------------------
# finite differences


def _fd_step(center, rel=FD_REL_STEP):
    return rel * (1.0 + np.abs(center))


def fd_partial_x(fn, t, x, axis, rel=FD_REL_STEP):
    """Fourth-order central difference of ``fn(t, x)`` along spatial ``axis``."""
    x = np.asarray(x, dtype=float)
    hh = _fd_step(x[..., axis], rel)
    e = np.zeros(x.shape[-1])
    e[axis] = 1.0

    def at(k):
        return fn(t, x + (k * hh)[..., None] * e)

    shape = np.shape(at(0))
    hb = np.reshape(hh, hh.shape + (1,) * (len(shape) - hh.ndim))
    return (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * hb)


def fd_partial_t(fn, t, x, rel=FD_REL_STEP):
    x = np.asarray(x, dtype=float)
    ht = rel * (1.0 + np.abs(t))
    vals = [fn(t + k * ht, x) for k in (2, 1, -1, -2)]
    return (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * ht)


def fd_multi(fn, t, x, alpha, rel=1e-3):
    """Nested central differences for a multi-index ``alpha``.

    Each nesting level uses a larger relative step to keep round-off in check.
    """
    g = fn
    level = 0
    for axis, count in enumerate(alpha):
        for _ in range(count):
            g = _bind_partial(g, axis, rel * (10.0 ** level))
            level += 1
    return g(t, x)


def _bind_partial(g, axis, rel):
    return lambda t, x: fd_partial_x(g, t, x, axis, rel)


# ---------------------------------------------------------------------------
# potentials and fields


@dataclass(frozen=True)
class Potential:
    """Electromagnetic potential ``(V, A)`` in ``d`` dimensions.

    Optional analytic derivatives override the finite-difference defaults.
    ``A_jac(t, x)[..., k, j]`` is the derivative of ``A_k`` along ``x_j``.
    """

    dim: int
    V: ScalarField
    A: Optional[VectorField] = None
    V_grad: Optional[VectorField] = None
    V_dt: Optional[ScalarField] = None
    A_jac: Optional[Callable] = None
    A_dt: Optional[VectorField] = None
    name: str = "custom"
    static: bool = True

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidParameter("dimension must be positive")

    def vector(self, t, x):
        x = np.asarray(x, dtype=float)
        if self.A is None:
            return np.zeros(x.shape)
        return np.broadcast_to(self.A(t, x), x.shape)

    def scalar(self, t, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.V(t, x), x.shape[:-1])

    def grad_V(self, t, x):
        if self.V_grad is not None:
            return np.broadcast_to(self.V_grad(t, x), np.shape(x))
        return np.stack([fd_partial_x(self.scalar, t, x, j) for j in range(self.dim)], axis=-1)

    def dV_dt(self, t, x):
        if self.V_dt is not None:
            return np.broadcast_to(self.V_dt(t, x), np.shape(x)[:-1])
        if self.static:
            return np.zeros(np.shape(x)[:-1])
        return fd_partial_t(self.scalar, t, x)

    def jac_A(self, t, x):
        x = np.asarray(x, dtype=float)
        if self.A is None:
            return np.zeros(x.shape + (self.dim,))
        if self.A_jac is not None:
            return np.broadcast_to(self.A_jac(t, x), x.shape + (self.dim,))
        return np.stack([fd_partial_x(self.vector, t, x, j) for j in range(self.dim)], axis=-1)

    def dA_dt(self, t, x):
        x = np.asarray(x, dtype=float)
        if self.A is None:
            return np.zeros(x.shape)
        if self.A_dt is not None:
            return np.broadcast_to(self.A_dt(t, x), x.shape)
        if self.static:
            return np.zeros(x.shape)
        return fd_partial_t(self.vector, t, x)


@dataclass(frozen=True)
class FieldValues:
    E: np.ndarray
    B: np.ndarray


def magnetic_pairs(d):
    return [(j, k) for j in range(d) for k in range(j + 1, d)]


def electric_field(p: Potential, t, x):
    return -p.dA_dt(t, x) - p.grad_V(t, x)


def magnetic_field(p: Potential, t, x):
    x = np.asarray(x, dtype=float)
    pairs = magnetic_pairs(p.dim)
    if not pairs:
        return np.zeros(x.shape[:-1] + (0,))
    J = p.jac_A(t, x)
    return np.stack([J[..., k, j] - J[..., j, k] for j, k in pairs], axis=-1)


def eval_fields(p: Potential, t, x) -> FieldValues:
    """Electric strength and magnetic tensor (components ``j < k``) at ``(t, x)``."""
    E = np.asarray(electric_field(p, t, x), dtype=float)
    B = np.asarray(magnetic_field(p, t, x), dtype=float)
    if not (np.all(np.isfinite(E)) and np.all(np.isfinite(B))):
        raise NonFinite("field evaluation produced non-finite values")
    return FieldValues(E=E, B=B)


# built-in potential families


def free_potential(d=1):
    return Potential(
        dim=d,
        V=lambda t, x: np.zeros(np.shape(x)[:-1]),
        V_grad=lambda t, x: np.zeros(np.shape(x)),
        name="free",
    )


def uniform_field(E0):
    """Constant electric field ``E0`` generated by ``V = -E0 . x``."""
    E0 = np.atleast_1d(np.asarray(E0, dtype=float))
    return Potential(
        dim=E0.size,
        V=lambda t, x: -np.asarray(x) @ E0,
        V_grad=lambda t, x: np.broadcast_to(-E0, np.shape(x)),
        name="uniform-field",
    )


def harmonic(omega=1.0, mass=1.0, d=1, center=None):
    k = mass * omega**2
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    return Potential(
        dim=d,
        V=lambda t, x: 0.5 * k * np.sum((np.asarray(x) - c) ** 2, axis=-1),
        V_grad=lambda t, x: k * (np.asarray(x) - c),
        name="harmonic",
    )


def quartic(coeff=1.0, d=1):
    """``V = coeff |x|^4``, the simplest polynomially growing potential."""
    return Potential(
        dim=d,
        V=lambda t, x: coeff * np.sum(np.asarray(x) ** 2, axis=-1) ** 2,
        V_grad=lambda t, x: 4 * coeff * np.sum(np.asarray(x) ** 2, axis=-1)[..., None] * np.asarray(x),
        name="quartic",
    )


def symmetric_gauge_magnetic(B0=1.0, omega=0.0, mass=1.0):
    """Uniform magnetic field ``B0`` in the plane, ``A = (-B0 x2/2, B0 x1/2)``.

    An optional harmonic confinement ``omega`` keeps packets inside a box.
    """
    k = mass * omega**2

    def A(t, x):
        x = np.asarray(x)
        return np.stack([-0.5 * B0 * x[..., 1], 0.5 * B0 * x[..., 0]], axis=-1)

    def A_jac(t, x):
        J = np.zeros(np.shape(x) + (2,))
        J[..., 0, 1] = -0.5 * B0
        J[..., 1, 0] = 0.5 * B0
        return J

    return Potential(
        dim=2,
        V=lambda t, x: 0.5 * k * np.sum(np.asarray(x) ** 2, axis=-1),
        V_grad=lambda t, x: k * np.asarray(x),
        A=A,
        A_jac=A_jac,
        A_dt=lambda t, x: np.zeros(np.shape(x)),
        name="symmetric-gauge-magnetic",
    )


POTENTIAL_FAMILIES = {
    "free": free_potential,
    "uniform-field": uniform_field,
    "harmonic": harmonic,
    "quartic": quartic,
    "symmetric-gauge-magnetic": symmetric_gauge_magnetic,
}


# ---------------------------------------------------------------------------
# gauge functions


@dataclass(frozen=True)
class GaugeFunction:
    """Real gauge function with optional analytic first derivatives."""

    psi: ScalarField
    dt: Optional[ScalarField] = None
    grad: Optional[VectorField] = None
    name: str = "custom"

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.psi(t, x), x.shape[:-1])

    def time_derivative(self, t, x):
        if self.dt is not None:
            return np.broadcast_to(self.dt(t, x), np.shape(x)[:-1])
        return fd_partial_t(self, t, x)

    def gradient(self, t, x):
        if self.grad is not None:
            return np.broadcast_to(self.grad(t, x), np.shape(x))
        x = np.asarray(x, dtype=float)
        return np.stack([fd_partial_x(self, t, x, j) for j in range(x.shape[-1])], axis=-1)


def constant_gauge(c=1.0):
    return GaugeFunction(
        psi=lambda t, x: np.full(np.shape(x)[:-1], float(c)),
        dt=lambda t, x: np.zeros(np.shape(x)[:-1]),
        grad=lambda t, x: np.zeros(np.shape(x)),
        name="constant",
    )


def linear_gauge(k):
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return GaugeFunction(
        psi=lambda t, x: np.asarray(x) @ k,
        dt=lambda t, x: np.zeros(np.shape(x)[:-1]),
        grad=lambda t, x: np.broadcast_to(k, np.shape(x)),
        name="linear",
    )


def time_gauge(c=1.0):
    return GaugeFunction(
        psi=lambda t, x: np.full(np.shape(x)[:-1], c * t),
        dt=lambda t, x: np.full(np.shape(x)[:-1], float(c)),
        grad=lambda t, x: np.zeros(np.shape(x)),
        name="time-linear",
    )


def bump_gauge(amplitude=1.0, width=1.0, center=0.0, rate=1.0):
    """``amplitude * cos(rate t) * exp(-|x - center|^2 / (2 width^2))``."""

    def env(x):
        r2 = np.sum((np.asarray(x) - center) ** 2, axis=-1)
        return np.exp(-r2 / (2 * width**2))

    return GaugeFunction(
        psi=lambda t, x: amplitude * np.cos(rate * t) * env(x),
        dt=lambda t, x: -amplitude * rate * np.sin(rate * t) * env(x),
        grad=lambda t, x: (amplitude * np.cos(rate * t) * env(x))[..., None]
        * (-(np.asarray(x) - center) / width**2),
        name="bump",
    )


GAUGE_FAMILIES = {
    "constant": constant_gauge,
    "linear": linear_gauge,
    "time-linear": time_gauge,
    "bump": bump_gauge,
}


def gauge_transform(p: Potential, psi: GaugeFunction) -> Potential:
    """Return ``(V - dpsi/dt, A + grad psi)``.

    The transformed potential carries no analytic derivatives; field
    evaluation on it falls back to finite differences.
    """

    def V(t, x):
        return p.scalar(t, x) - psi.time_derivative(t, x)

    def A(t, x):
        return p.vector(t, x) + psi.gradient(t, x)

    return Potential(dim=p.dim, V=V, A=A, name=f"{p.name}+gauge:{psi.name}", static=False)


# ---------------------------------------------------------------------------
# measurement weights


def _as_path(a, d=None):
    """Normalise a record path to a callable ``t -> (d,)`` plus a static flag."""
    if callable(a):
        return a, False
    arr = np.atleast_1d(np.asarray(a, dtype=float))
    if d is not None and arr.size != d:
        raise InvalidParameter(f"record point has {arr.size} components, expected {d}")
    return (lambda t: arr), True


@dataclass(frozen=True)
class WeightConfig:
    """Position-measurement weight ``W(t, x)`` bounded below by ``-lower_bound``."""

    dim: int
    W: ScalarField
    lower_bound: float = 0.0
    record_path: Optional[Callable] = None
    resolution: Optional[float] = None
    horizon: Optional[float] = None
    grad: Optional[VectorField] = None
    name: str = "custom"
    static: bool = True

    def __post_init__(self):
        if self.lower_bound < 0:
            raise InvalidParameter("lower bound constant C(W) must be nonnegative")

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.W(t, x), x.shape[:-1])

    def gradient(self, t, x):
        if self.grad is not None:
            return np.broadcast_to(self.grad(t, x), np.shape(x))
        x = np.asarray(x, dtype=float)
        return np.stack([fd_partial_x(self, t, x, j) for j in range(self.dim)], axis=-1)

    @property
    def is_zero(self):
        return self.name == "zero"


def zero_weight(d=1):
    return WeightConfig(dim=d, W=lambda t, x: np.zeros(np.shape(x)[:-1]),
                        grad=lambda t, x: np.zeros(np.shape(x)), name="zero")


def constant_weight(c, d=1):
    c = float(c)
    return WeightConfig(
        dim=d,
        W=lambda t, x: np.full(np.shape(x)[:-1], c),
        grad=lambda t, x: np.zeros(np.shape(x)),
        lower_bound=max(0.0, -c),
        name="constant",
    )


def quadratic_weight(a, delta_a, horizon, d=None) -> WeightConfig:
    """Gaussian-resolution weight ``2 |x - a(t)|^2 / (T delta_a^2)``.

    ``a`` is either a constant record point or a callable ``t -> (d,)``.
    """
    if not delta_a > 0:
        raise InvalidParameter(f"resolution must be positive, got {delta_a}")
    if not horizon > 0:
        raise InvalidParameter(f"horizon must be positive, got {horizon}")
    path, static = _as_path(a, d)
    if d is None:
        d = np.atleast_1d(path(0.0)).size
    kappa = 2.0 / (horizon * delta_a**2)

    def W(t, x):
        return kappa * np.sum((np.asarray(x) - path(t)) ** 2, axis=-1)

    def grad(t, x):
        return 2 * kappa * (np.asarray(x) - path(t))

    return WeightConfig(dim=d, W=W, lower_bound=0.0, record_path=path, resolution=delta_a,
                        horizon=horizon, grad=grad, name="quadratic", static=static)


# ---------------------------------------------------------------------------
# clamped spin weights


def _smoothstep(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)

    def phi(v):
        out = np.zeros_like(v)
        pos = v > 0
        out[pos] = np.exp(-1.0 / v[pos])
        return out

    a, b = phi(u), phi(1.0 - u)
    return a / (a + b)


@dataclass(frozen=True)
class ClampProfile:
    """Smooth nondecreasing clamp: identity on [0, 1], constant ``ceiling`` past 2."""

    ceiling: float = 4.0

    def __post_init__(self):
        if not self.ceiling >= 2.0:
            raise InvalidParameter("ceiling must be at least 2 for a monotone clamp")

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta < 0):
            raise InvalidParameter("clamp profile is defined on [0, inf)")
        s = _smoothstep(theta - 1.0)
        return theta + (self.ceiling - theta) * s


def clamped_spin_weight(paths: Sequence, delta_a, horizon, profile: ClampProfile, d=None):
    """Diagonal matrix weight with entries ``profile(2|x - a_j(t)|^2 / (T delta_a^2))``.

    Returns a callable ``(t, x) -> (..., l, l)``.
    """
    if len(paths) < 1:
        raise InvalidParameter("need at least one record path")
    if not delta_a > 0 or not horizon > 0:
        raise InvalidParameter("resolution and horizon must be positive")
    fns = [_as_path(a, d)[0] for a in paths]
    kappa = 2.0 / (horizon * delta_a**2)
    l = len(fns)

    def Ws(t, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (l, l))
        for j, a in enumerate(fns):
            out[..., j, j] = profile(kappa * np.sum((x - a(t)) ** 2, axis=-1))
        return out

    Ws.levels = l
    Ws.static = all(_as_path(a, d)[1] for a in paths)
    return Ws


WEIGHT_FAMILIES = {
    "zero": zero_weight,
    "constant": constant_weight,
    "quadratic": quadratic_weight,
}


# ---------------------------------------------------------------------------
# sampled assumption checks


@dataclass
class ClauseResult:
    name: str
    statistic: float
    verdict: str
    detail: str = ""


@dataclass
class ValidationReport:
    clauses: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    samples: int = 0

    def verdict(self, name):
        for c in self.clauses:
            if c.name == name:
                return c.verdict
        raise KeyError(name)

    @property
    def all_pass(self):
        return all(c.verdict == "pass" for c in self.clauses)

    def as_dict(self):
        return {
            "samples": self.samples,
            "clauses": [c.__dict__ for c in self.clauses],
            "notes": list(self.notes),
        }


def _multi_indices(d, order):
    if order == 0:
        return [(0,) * d]
    out = []
    for j in range(d):
        for rest in _multi_indices(d, order - 1):
            a = list(rest)
            a[j] += 1
            t = tuple(a)
            if t not in out:
                out.append(t)
    return out


def _growth_verdict(stat, radius, rmax, growth_tol=1.25, floor=1e-6):
    """Compare the maximum over the full box with the maximum over its inner half.

    Bounded quantities saturate; anything that keeps growing past ``growth_tol``
    per doubling of the radius is flagged.
    """
    inner = radius <= 0.5 * rmax + 1e-12
    full_max = float(np.max(stat))
    inner_max = float(np.max(stat[inner])) if np.any(inner) else full_max
    if full_max <= floor:
        return full_max, "pass", "negligible"
    ratio = full_max / max(inner_max, floor)
    verdict = "pass" if ratio <= growth_tol else "warn"
    return full_max, verdict, f"growth ratio {ratio:.3g} per radius doubling"


def validate_assumptions(p: Potential, w: WeightConfig, box, samples=2000, seed=0,
                         horizon=None, exponent=2.0, decay=0.5) -> ValidationReport:
    """Sampled evidence for the regularity hypotheses on ``(V, A, W)``.

    ``box`` is a half-width (scalar or per-axis).  Samples combine a lattice
    with uniform random points; growth-type clauses compare the full box with
    its inner half.  Passing is evidence, never proof.
    """
    if samples < 1:
        raise InvalidParameter("samples must be >= 1")
    d = p.dim
    half = np.broadcast_to(np.asarray(box, dtype=float), (d,))
    T = horizon or w.horizon or 1.0
    rng = np.random.default_rng(seed)
    per_axis = max(3, int(round(samples ** (1.0 / d))) | 1)
    axes = [np.linspace(-h, h, per_axis) for h in half]
    lattice = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    random_pts = rng.uniform(-half, half, size=(samples, d))
    X = np.concatenate([lattice, random_pts])
    times = np.concatenate([np.full(len(lattice), 0.5 * T), rng.uniform(0, T, samples)])
    radius = np.max(np.abs(X) / half, axis=-1)
    rmax = 1.0
    bracket = np.sqrt(1.0 + np.sum(X**2, axis=-1))

    def per_time(fn):
        # evaluate fn(t, x) for each sample's own time
        out = []
        for t in np.unique(times):
            sel = times == t
            out.append((sel, fn(float(t), X[sel])))
        first = out[0][1]
        res = np.zeros((len(X),) + np.shape(first)[1:])
        for sel, val in out:
            res[sel] = val
        return res

    report = ValidationReport(samples=len(X))

    # electric field gradients, orders 1 and 2
    def E_comp(j):
        return lambda t, x: electric_field(p, t, x)[..., j]

    stat = np.zeros(len(X))
    for j in range(d):
        for order in (1, 2):
            for alpha in _multi_indices(d, order):
                vals = per_time(lambda t, x, j=j, alpha=alpha: fd_multi(E_comp(j), t, x, alpha))
                stat = np.maximum(stat, np.abs(vals))
    _check_finite(stat)
    val, verdict, detail = _growth_verdict(stat, radius, rmax)
    report.clauses.append(ClauseResult("electric_gradients_bounded", val, verdict, detail))
    if verdict != "pass":
        report.notes.append(
            "polynomially growing potential: bounded-gradient hypotheses fail; "
            "only the polynomial-growth variant of the theory covers this family"
        )

    # magnetic gradients times <x>^(1 + decay)
    pairs = magnetic_pairs(d)
    stat = np.zeros(len(X))
    for idx in range(len(pairs)):
        for order in (1, 2):
            for alpha in _multi_indices(d, order):
                vals = per_time(lambda t, x, idx=idx, alpha=alpha: fd_multi(
                    lambda tt, xx: magnetic_field(p, tt, xx)[..., idx], t, x, alpha))
                stat = np.maximum(stat, np.abs(vals) * bracket ** (1 + decay))
    _check_finite(stat)
    val, verdict, detail = _growth_verdict(stat, radius, rmax)
    report.clauses.append(ClauseResult("magnetic_gradients_decay", val, verdict,
                                       detail if pairs else "no magnetic components"))

    # weight lower bound
    Wv = per_time(lambda t, x: w(t, x))
    _check_finite(Wv)
    wmin = float(np.min(Wv))
    ok = wmin >= -w.lower_bound - 1e-12
    report.clauses.append(ClauseResult(
        "weight_lower_bound", wmin, "pass" if ok else "fail",
        f"min W = {wmin:.6g}, required >= {-w.lower_bound:.6g}"))

    # weight derivative ratio and linear growth
    ratio_stat = np.zeros(len(X))
    lin_stat = np.zeros(len(X))
    for order in (1, 2):
        for alpha in _multi_indices(d, order):
            if order == 1:
                j = alpha.index(1)
                vals = per_time(lambda t, x, j=j: w.gradient(t, x)[..., j])
            else:
                j = next(i for i, a in enumerate(alpha) if a)
                rest = list(alpha)
                rest[j] -= 1
                vals = per_time(lambda t, x, j=j, rest=tuple(rest): fd_multi(
                    lambda tt, xx: w.gradient(tt, xx)[..., j], t, x, rest))
            vals = np.abs(vals)
            ratio_stat = np.maximum(ratio_stat, vals**exponent / np.maximum(1 + w.lower_bound + Wv, 1e-12))
            lin_stat = np.maximum(lin_stat, vals / bracket)
    _check_finite(ratio_stat)
    val, verdict, detail = _growth_verdict(ratio_stat, radius, rmax)
    report.clauses.append(ClauseResult("weight_gradient_ratio", val, verdict,
                                       f"exponent {exponent}; {detail}"))
    val, verdict, detail = _growth_verdict(lin_stat, radius, rmax)
    report.clauses.append(ClauseResult("weight_gradient_linear_growth", val, verdict, detail))
    return report


def _check_finite(arr):
    if not np.all(np.isfinite(arr)):
        raise NonFinite("non-finite value during assumption sampling")
