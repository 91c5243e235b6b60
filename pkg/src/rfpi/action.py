"""Straight-line paths and the actions evaluated along them.

All integrals over a segment are written in the end-anchored form
``q(theta) = x - theta (x - y)`` at time ``t - theta rho`` with ``theta`` in
[0, 1], and evaluated with a Gauss-Legendre rule.  Endpoints may be batched:
``x`` and ``y`` broadcast against each other with a trailing axis of length d.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateInterval, InvalidParameter, NonFinite
from .model import Potential, WeightConfig


@dataclass(frozen=True)
class StraightLine:
    y: np.ndarray
    x: np.ndarray
    s: float
    t: float

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        if self.t < self.s:
            raise InvalidParameter("line must run forward in time (s <= t)")

    @property
    def rho(self):
        return self.t - self.s

    @property
    def displacement(self):
        return self.x - self.y


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""

    n: int = 8

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameter("quadrature needs at least one node")

    @cached_property
    def nodes_weights(self):
        z, w = np.polynomial.legendre.leggauss(self.n)
        return 0.5 * (z + 1.0), 0.5 * w

    @property
    def nodes(self):
        return self.nodes_weights[0]

    @property
    def weights(self):
        return self.nodes_weights[1]


@dataclass(frozen=True)
class ActionValue:
    S: np.ndarray
    w_int: np.ndarray

    @property
    def S_w(self):
        return self.S + 1j * self.w_int


def line_point(line: StraightLine, theta):
    if line.t == line.s:
        if not np.allclose(line.x, line.y):
            raise DegenerateInterval("zero-length interval joining distinct points")
        return line.y
    if not (line.s <= theta <= line.t):
        raise InvalidParameter("theta outside [s, t]")
    return line.y + (theta - line.s) / (line.t - line.s) * (line.x - line.y)


def _require_interval(line):
    if not line.t > line.s:
        raise DegenerateInterval("action needs t > s")


def _finite(a):
    if not np.all(np.isfinite(a)):
        raise NonFinite("non-finite action integrand")
    return a


def line_integrals(p: Potential, line: StraightLine, quad: QuadratureRule):
    """Return ``(int_0^1 A . (x - y) dtheta, int_0^1 V dtheta)`` along the segment."""
    _require_interval(line)
    rho = line.rho
    D = line.displacement
    a_term = 0.0
    v_term = 0.0
    for th, wt in zip(quad.nodes, quad.weights):
        q = line.x - th * D
        tt = line.t - th * rho
        v_term = v_term + wt * p.scalar(tt, q)
        if p.A is not None:
            a_term = a_term + wt * np.sum(p.vector(tt, q) * D, axis=-1)
    return _finite(np.asarray(a_term)), _finite(np.asarray(v_term))


def classical_action(p: Potential, line: StraightLine, quad: QuadratureRule = QuadratureRule(),
                     m: float = 1.0):
    """Classical action of the straight segment from ``(s, y)`` to ``(t, x)``."""
    _require_interval(line)
    rho = line.rho
    D = line.displacement
    a_term, v_term = line_integrals(p, line, quad)
    return m * np.sum(D**2, axis=-1) / (2 * rho) + a_term - rho * v_term


def weight_integral(w: WeightConfig, line: StraightLine, quad: QuadratureRule = QuadratureRule()):
    """``rho * int_0^1 W(t - theta rho, x - theta (x - y)) dtheta``."""
    _require_interval(line)
    rho = line.rho
    D = line.displacement
    acc = 0.0
    for th, wt in zip(quad.nodes, quad.weights):
        acc = acc + wt * w(line.t - th * rho, line.x - th * D)
    return _finite(rho * np.asarray(acc))


def damping_factor(w: WeightConfig, line: StraightLine, quad: QuadratureRule = QuadratureRule()):
    return np.exp(-weight_integral(w, line, quad))


def weighted_action(p, w, line, quad=QuadratureRule(), m=1.0) -> ActionValue:
    return ActionValue(S=classical_action(p, line, quad, m), w_int=weight_integral(w, line, quad))
