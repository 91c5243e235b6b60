"""Uniform grids, sampled wave functions and time subdivisions."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import InvalidParameter, NonFinite


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[-half_width, half_width)^dim`` with ``points`` per axis."""

    dim: int
    half_width: float
    points: int

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidParameter("grid dimension must be >= 1")
        if self.points < 2:
            raise InvalidParameter("grid needs at least two points per axis")
        if not self.half_width > 0:
            raise InvalidParameter("half width must be positive")

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.points

    h = spacing

    @property
    def shape(self):
        return (self.points,) * self.dim

    @property
    def size(self):
        return self.points**self.dim

    @property
    def cell(self):
        return self.spacing**self.dim

    @cached_property
    def axis(self):
        return -self.half_width + self.spacing * np.arange(self.points)

    @cached_property
    def coords(self):
        """Point coordinates, shape ``(size, dim)`` in C order."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def mesh(self):
        return np.meshgrid(*([self.axis] * self.dim), indexing="ij")

    def norm(self, values, spatial_axes=None):
        """Discrete L2 norm over all entries (components included)."""
        return float(np.sqrt(self.cell * np.sum(np.abs(values) ** 2)))

    def boundary_mass(self, values, fraction=0.05):
        """Fraction of |values|^2 within ``fraction`` of any box edge."""
        v = np.abs(np.asarray(values)) ** 2
        total = float(np.sum(v))
        if total == 0.0:
            return 0.0
        k = max(1, int(np.ceil(fraction * self.points)))
        near = np.zeros(self.points, dtype=bool)
        near[:k] = near[self.points - k:] = True
        edge = np.zeros(self.shape, dtype=bool)
        for ax in range(self.dim):
            edge |= near.reshape([-1 if j == ax else 1 for j in range(self.dim)])
        return float(np.sum(v[..., edge])) / total


@dataclass
class WaveFunction:
    grid: Grid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise InvalidParameter(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise NonFinite("wave function has non-finite entries")

    def norm(self):
        return self.grid.norm(self.values)

    def copy(self):
        return replace(self, values=self.values.copy())

    def with_values(self, values, t=None):
        return WaveFunction(self.grid, values, self.t if t is None else t)


@dataclass
class SpinorWaveFunction:
    """``l`` component wave functions stacked on axis 0."""

    grid: Grid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != self.grid.dim + 1 or self.values.shape[1:] != self.grid.shape:
            raise InvalidParameter("spinor values must have shape (l, *grid.shape)")
        if not np.all(np.isfinite(self.values)):
            raise NonFinite("spinor has non-finite entries")

    @property
    def levels(self):
        return self.values.shape[0]

    def component(self, j):
        return WaveFunction(self.grid, self.values[j], self.t)

    def norm(self):
        return self.grid.norm(self.values)

    def copy(self):
        return replace(self, values=self.values.copy())

    def with_values(self, values, t=None):
        return SpinorWaveFunction(self.grid, values, self.t if t is None else t)

    @classmethod
    def from_components(cls, comps, t=0.0):
        comps = list(comps)
        return cls(comps[0].grid, np.stack([c.values for c in comps]), t)


def l2_distance(a, b):
    return a.grid.norm(a.values - b.values)


@dataclass(frozen=True)
class Subdivision:
    """Partition ``0 = tau_0 <= tau_1 <= ... <= tau_nu = t``; zero gaps allowed."""

    times: tuple = field(default=(0.0, 1.0))

    def __post_init__(self):
        ts = tuple(float(v) for v in self.times)
        if len(ts) < 2:
            raise InvalidParameter("subdivision needs at least the two end points")
        if ts[0] != 0.0:
            raise InvalidParameter("subdivision must start at 0")
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise InvalidParameter("subdivision times must be nondecreasing")
        object.__setattr__(self, "times", ts)

    @classmethod
    def uniform(cls, t, nu):
        if nu < 1:
            raise InvalidParameter("nu must be >= 1")
        return cls(tuple(np.linspace(0.0, t, nu + 1)))

    @classmethod
    def from_interior(cls, t, interior):
        return cls((0.0, *sorted(interior), t))

    @property
    def t(self):
        return self.times[-1]

    @property
    def nu(self):
        return len(self.times) - 1

    @property
    def gaps(self):
        return np.diff(self.times)

    @property
    def mesh(self):
        return float(np.max(self.gaps))

    def steps(self):
        return list(zip(self.times[:-1], self.times[1:]))


def gaussian_packet(grid: Grid, center=0.0, momentum=0.0, width=1.0, t=0.0):
    """Normalised Gaussian ``(pi w^2)^(-d/4) exp(-|x-c|^2/(2w^2) + i p.(x-c))``."""
    d = grid.dim
    c = np.broadcast_to(np.asarray(center, dtype=float), (d,))
    p = np.broadcast_to(np.asarray(momentum, dtype=float), (d,))
    X = grid.coords
    vals = (np.pi * width**2) ** (-d / 4) * np.exp(
        -np.sum((X - c) ** 2, axis=-1) / (2 * width**2) + 1j * (X - c) @ p)
    return WaveFunction(grid, vals.reshape(grid.shape), t)


def random_band_limited(grid: Grid, rng, packets=4, spread=None):
    """Random normalised superposition of Gaussian packets.

    Packet parameters depend only on ``rng`` and the box, so the same seed gives
    the same continuum state on any refinement of the grid.
    """
    spread = grid.half_width / 3 if spread is None else spread
    d = grid.dim
    X = grid.coords
    vals = np.zeros(grid.size, dtype=complex)
    for _ in range(packets):
        c = rng.uniform(-spread, spread, d)
        p = rng.uniform(-2.0, 2.0, d)
        w = rng.uniform(0.6, 1.4)
        a = rng.normal() + 1j * rng.normal()
        vals += a * np.exp(-np.sum((X - c) ** 2, axis=-1) / (2 * w**2) + 1j * (X - c) @ p)
    f = WaveFunction(grid, vals.reshape(grid.shape))
    return f.with_values(f.values / f.norm())
