"""Transport plans between grid measures and the periodic cost they are scored with."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from app.errors import ValidationError
from app.model.torus import GridMeasure, TorusGrid, minimal_image

logger = logging.getLogger(__name__)

MARGINAL_TOL = 1e-9


# ---------------------------------------------------------------------------
# Cost
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def displacement_tensor(grid: TorusGrid) -> np.ndarray:
    """Minimal-image displacements ``y_j - x_i`` for every site pair, shape (N, N, dim)."""
    coords = grid.coordinates
    disp = minimal_image(coords[None, :, :] - coords[:, None, :])
    disp.setflags(write=False)
    return disp


@lru_cache(maxsize=32)
def cost_matrix(grid: TorusGrid, k: float) -> np.ndarray:
    """Periodic power cost ``|x_i - y_j|^k`` on the torus, shape (N, N)."""
    if k < 1:
        raise ValidationError(f"cost exponent must be >= 1, got {k!r}")
    dist = np.linalg.norm(displacement_tensor(grid), axis=-1)
    m = dist if k == 1 else dist ** k
    m.setflags(write=False)
    return m


# ---------------------------------------------------------------------------
# Duals
# ---------------------------------------------------------------------------

def complete_duals(phi, psi, a, b, M) -> tuple[np.ndarray, np.ndarray]:
    """Make dual potentials feasible on zero-weight sites and fix their constant.

    Zero-weight target columns get the c-transform over positive source rows,
    zero-weight source rows the c-transform over every column. The pair is then
    shifted so that phi vanishes at the first source site carrying mass.
    """
    phi = np.array(phi, dtype=np.float64)
    psi = np.array(psi, dtype=np.float64)
    rows = a > 0
    cols = b > 0
    if not np.all(cols):
        psi[~cols] = np.min(M[np.ix_(rows, ~cols)] - phi[rows, None], axis=0)
    if not np.all(rows):
        phi[~rows] = np.min(M[~rows, :] - psi[None, :], axis=1)
    anchor = phi[np.flatnonzero(rows)[0]]
    return phi - anchor, psi + anchor


# ---------------------------------------------------------------------------
# Plan
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TransportPlan:
    """A coupling of two grid measures together with its cost and duals."""

    source: GridMeasure
    target: GridMeasure
    coupling: np.ndarray
    cost_exponent: float
    total_cost: float
    dual_potential_source: np.ndarray
    dual_potential_target: np.ndarray
    exact: bool = True
    iterations: int = 0
    _support: tuple = field(default=None, init=False, repr=False)

    def __post_init__(self):
        for arr in (self.coupling, self.dual_potential_source, self.dual_potential_target):
            arr.setflags(write=False)

    @property
    def grid(self) -> TorusGrid:
        return self.source.grid

    def support(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Row indices, column indices and masses of the positive coupling entries."""
        if self._support is None:
            rows, cols = np.nonzero(self.coupling > 0.0)
            object.__setattr__(self, "_support", (rows, cols, self.coupling[rows, cols]))
        return self._support

    def displacements(self) -> np.ndarray:
        """Minimal-image displacement of every support entry, shape (M, dim)."""
        rows, cols, _ = self.support()
        return displacement_tensor(self.grid)[rows, cols]

    def barycentric_displacement(self) -> np.ndarray:
        """Mass-weighted mean displacement leaving each source site; zero where no mass."""
        rows, _, mass = self.support()
        out = np.zeros((self.grid.size, self.grid.dim))
        np.add.at(out, rows, mass[:, None] * self.displacements())
        w = self.source.weights
        pos = w > 0
        out[pos] /= w[pos, None]
        return out

    def marginal_violation(self) -> float:
        """L1 distance of the coupling marginals from the source and target weights."""
        rv = np.abs(self.coupling.sum(axis=1) - self.source.weights).sum()
        cv = np.abs(self.coupling.sum(axis=0) - self.target.weights).sum()
        return float(rv + cv)

    def dual_objective(self) -> float:
        return float(self.dual_potential_source @ self.source.weights
                     + self.dual_potential_target @ self.target.weights)


def optimal_velocity_field(plan: TransportPlan, remaining_time: float) -> np.ndarray:
    """Per-site drift realizing the plan's geodesic in *remaining_time*."""
    if remaining_time <= 0:
        raise ValidationError(f"remaining time must be positive, got {remaining_time!r}")
    return plan.barycentric_displacement() / remaining_time


def is_monge(plan: TransportPlan) -> bool:
    """True when every source atom sends all of its mass to a single site."""
    rows, _, _ = plan.support()
    counts = np.bincount(rows, minlength=plan.grid.size)
    return bool(np.all(counts[plan.source.weights > 0] == 1))
