"""Periodic grids on the flat torus and the probability measures they carry.

Sites are stored row-major over the axes: on a 2-D grid the site with
multi-index ``(i, j)`` has flat index ``i * n + j`` and coordinates
``(i / n, j / n)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np

from app.errors import ValidationError

if TYPE_CHECKING:
    from app.transport.plan import TransportPlan

WEIGHT_TOL = 1e-12
_ALIGN_TOL = 1e-9
_TIE_TOL = 1e-9


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def minimal_image(vector) -> np.ndarray:
    """Representative of *vector* modulo 1 with every component in (-1/2, 1/2]."""
    v = np.asarray(vector, dtype=np.float64)
    return v - np.ceil(v - 0.5)


def periodic_distance(x, y) -> float:
    """Euclidean norm of the minimal-image displacement from *x* to *y*."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape:
        raise ValidationError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(np.linalg.norm(minimal_image(y - x)))


@dataclass(frozen=True)
class TorusDisplacement:
    """A translation of the torus, stored as its minimal-image representative."""

    vector: tuple[float, ...]

    def __post_init__(self):
        v = minimal_image(np.atleast_1d(np.asarray(self.vector, dtype=np.float64)))
        object.__setattr__(self, "vector", tuple(float(c) for c in v))

    @property
    def dim(self) -> int:
        return len(self.vector)

    def as_array(self) -> np.ndarray:
        return np.array(self.vector)


@dataclass(frozen=True)
class TorusGrid:
    """The regular grid {0, 1/n, ..., (n-1)/n}^dim on the unit torus."""

    dim: int
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"dim must be 1 or 2, got {self.dim!r}")
        if int(self.points_per_axis) != self.points_per_axis or self.points_per_axis < 2:
            raise ValidationError(f"points_per_axis must be an integer >= 2, got {self.points_per_axis!r}")

    @property
    def n(self) -> int:
        return self.points_per_axis

    @property
    def size(self) -> int:
        return self.n ** self.dim

    @cached_property
    def multi_indices(self) -> np.ndarray:
        idx = np.array(list(itertools.product(range(self.n), repeat=self.dim)), dtype=np.int64)
        idx.setflags(write=False)
        return idx

    @cached_property
    def coordinates(self) -> np.ndarray:
        coords = self.multi_indices / self.n
        coords.setflags(write=False)
        return coords

    def point(self, site: int) -> np.ndarray:
        self._check_site(site)
        return self.coordinates[site].copy()

    def flat_index(self, multi) -> np.ndarray:
        """Flat site index of integer multi-indices (last axis fastest)."""
        multi = np.mod(np.asarray(multi, dtype=np.int64), self.n)
        if self.dim == 1:
            return multi[..., 0]
        return multi[..., 0] * self.n + multi[..., 1]

    def nearest_site(self, points) -> np.ndarray:
        """Snap torus points (shape ``(..., dim)``) to grid sites.

        Exact half-way ties go to the lexicographically smaller site index.
        """
        pts = np.asarray(points, dtype=np.float64)
        scaled = np.mod(pts, 1.0) * self.n
        lo = np.floor(scaled)
        frac = scaled - lo
        lo = lo.astype(np.int64)
        hi = lo + 1
        pick = np.where(frac > 0.5, hi, lo)
        ties = np.abs(frac - 0.5) <= _TIE_TOL
        if np.any(ties):
            pick = np.where(ties, np.minimum(np.mod(lo, self.n), np.mod(hi, self.n)), pick)
        return self.flat_index(pick)

    def diameter(self) -> float:
        """Largest minimal-image distance between two grid sites."""
        return float(np.sqrt(self.dim) * (self.n // 2) / self.n)

    def _check_site(self, site: int) -> None:
        if not 0 <= int(site) < self.size:
            raise ValidationError(f"site index {site} out of range for {self.size} sites")


def torus_diameter(grid: TorusGrid) -> float:
    return grid.diameter()


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------

class GridMeasure:
    """Nonnegative weights on the sites of a :class:`TorusGrid`, summing to one.

    Instances are immutable: the weight array is copied and frozen, so
    measures can be hashed, cached and shared across threads.
    """

    __slots__ = ("_grid", "_weights", "_hash")

    def __init__(self, grid: TorusGrid, weights):
        w = np.array(weights, dtype=np.float64).reshape(-1)
        if w.shape != (grid.size,):
            raise ValidationError(f"expected {grid.size} weights, got {w.size}")
        if not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite")
        if np.any(w < 0.0):
            raise ValidationError(f"negative weight {w.min()!r}")
        total = w.sum()
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValidationError(f"weights sum to {total!r}, expected 1")
        w.setflags(write=False)
        self._grid = grid
        self._weights = w
        self._hash = None

    @classmethod
    def from_mass(cls, grid: TorusGrid, mass) -> "GridMeasure":
        """Build a measure from accumulated mass, renormalizing rounding drift."""
        m = np.clip(np.asarray(mass, dtype=np.float64).reshape(-1), 0.0, None)
        total = m.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"mass sums to {total!r}, expected 1")
        if abs(total - 1.0) > WEIGHT_TOL / 2:
            m = m / total
        return cls(grid, m)

    @property
    def grid(self) -> TorusGrid:
        return self._grid

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self._weights > 0.0)

    def key(self) -> bytes:
        return self._weights.tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridMeasure):
            return NotImplemented
        return self._grid == other._grid and np.array_equal(self._weights, other._weights)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._grid, self.key()))
        return self._hash

    def __repr__(self) -> str:
        return f"GridMeasure(dim={self._grid.dim}, n={self._grid.n}, support={self.support.tolist()})"


def check_same_grid(*measures: GridMeasure) -> TorusGrid:
    grid = measures[0].grid
    for m in measures[1:]:
        if m.grid != grid:
            raise ValidationError(f"grid mismatch: {grid} vs {m.grid}")
    return grid


def dirac(grid: TorusGrid, site_index: int) -> GridMeasure:
    grid._check_site(site_index)
    w = np.zeros(grid.size)
    w[int(site_index)] = 1.0
    return GridMeasure(grid, w)


def uniform(grid: TorusGrid) -> GridMeasure:
    return GridMeasure(grid, np.full(grid.size, 1.0 / grid.size))


def atoms(grid: TorusGrid, sites) -> GridMeasure:
    """Equal-weight measure on the given (distinct) sites."""
    sites = [int(s) for s in sites]
    if not sites or len(set(sites)) != len(sites):
        raise ValidationError(f"sites must be distinct and non-empty: {sites}")
    for s in sites:
        grid._check_site(s)
    w = np.zeros(grid.size)
    w[sites] = 1.0 / len(sites)
    return GridMeasure.from_mass(grid, w)


def random_measure(grid: TorusGrid, rng: np.random.Generator, n_atoms: int | None = None,
                   equal_weights: bool = False) -> GridMeasure:
    """Random measure; with *n_atoms* the support is a random subset of that size."""
    if n_atoms is None:
        return GridMeasure.from_mass(grid, rng.dirichlet(np.ones(grid.size)))
    sites = rng.choice(grid.size, size=n_atoms, replace=False)
    if equal_weights:
        return atoms(grid, sites)
    w = np.zeros(grid.size)
    w[sites] = rng.dirichlet(np.ones(n_atoms))
    return GridMeasure.from_mass(grid, w)


# ---------------------------------------------------------------------------
# Translations and interpolation
# ---------------------------------------------------------------------------

def _roll(m: GridMeasure, steps) -> GridMeasure:
    grid = m.grid
    shaped = m.weights.reshape((grid.n,) * grid.dim)
    rolled = np.roll(shaped, tuple(int(s) for s in steps), axis=tuple(range(grid.dim)))
    return GridMeasure(grid, rolled.reshape(-1))


def pushforward_translate(m: GridMeasure, shift) -> GridMeasure:
    """Exact pushforward of *m* by a grid-aligned translation."""
    vec = shift.as_array() if isinstance(shift, TorusDisplacement) else np.atleast_1d(
        np.asarray(shift, dtype=np.float64))
    if vec.shape != (m.grid.dim,):
        raise ValidationError(f"shift of dimension {vec.size} on a {m.grid.dim}-D grid")
    scaled = vec * m.grid.n
    steps = np.round(scaled)
    if np.any(np.abs(scaled - steps) > _ALIGN_TOL):
        raise ValidationError(f"shift {vec.tolist()} is not a multiple of 1/{m.grid.n}")
    return _roll(m, steps.astype(np.int64))


def snap_translate(m: GridMeasure, offset) -> GridMeasure:
    """Pushforward by an arbitrary real offset, snapped to the nearest grid shift."""
    vec = np.atleast_1d(np.asarray(offset, dtype=np.float64))
    if vec.shape != (m.grid.dim,):
        raise ValidationError(f"offset of dimension {vec.size} on a {m.grid.dim}-D grid")
    site = int(m.grid.nearest_site(vec))
    return _roll(m, m.grid.multi_indices[site])


def displacement_interpolate(plan: "TransportPlan", s: float) -> GridMeasure:
    """Measure at parameter *s* along the displacement interpolation of *plan*.

    Every coupled mass element travels along its minimal-image segment and is
    snapped to the nearest site; the endpoints return the plan marginals.
    """
    if not 0.0 <= s <= 1.0:
        raise ValidationError(f"interpolation parameter {s!r} outside [0, 1]")
    if s == 0.0:
        return plan.source
    if s == 1.0:
        return plan.target
    grid = plan.source.grid
    rows, cols, mass = plan.support()
    coords = grid.coordinates
    positions = coords[rows] + s * minimal_image(coords[cols] - coords[rows])
    sites = grid.nearest_site(positions)
    w = np.zeros(grid.size)
    np.add.at(w, sites, mass)
    return GridMeasure.from_mass(grid, w)
