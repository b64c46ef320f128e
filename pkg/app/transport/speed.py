"""Relaxed controls: a finite distribution of velocities attached to each site."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.errors import ValidationError
from app.model.torus import TorusGrid

PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SpeedDistribution:
    """Flat list of ``(site, velocity, probability)`` atoms.

    Sites that never appear carry the empty distribution. Probabilities at
    each listed site sum to one and every velocity norm is at most ``bound``.
    """

    grid: TorusGrid
    sites: np.ndarray
    velocities: np.ndarray
    probabilities: np.ndarray
    bound: float

    def __post_init__(self):
        sites = np.asarray(self.sites, dtype=np.int64).reshape(-1)
        vel = np.asarray(self.velocities, dtype=np.float64).reshape(len(sites), self.grid.dim)
        prob = np.asarray(self.probabilities, dtype=np.float64).reshape(-1)
        if prob.shape != sites.shape:
            raise ValidationError("one probability per velocity atom is required")
        if np.any(prob < 0):
            raise ValidationError("probabilities must be nonnegative")
        if len(sites) and (sites.min() < 0 or sites.max() >= self.grid.size):
            raise ValidationError("site index out of range")
        totals = np.bincount(sites, weights=prob, minlength=self.grid.size)
        listed = np.bincount(sites, minlength=self.grid.size) > 0
        if np.any(np.abs(totals[listed] - 1.0) > PROB_TOL):
            raise ValidationError("probabilities at a site must sum to 1")
        if len(sites) and np.linalg.norm(vel, axis=1).max() > self.bound + 1e-12:
            raise ValidationError(f"velocity exceeds the support bound {self.bound!r}")
        for name, arr in (("sites", sites), ("velocities", vel), ("probabilities", prob)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_field(cls, grid: TorusGrid, velocities, active, bound: float | None = None) -> "SpeedDistribution":
        """Dirac-valued distribution from a per-site velocity field on the *active* sites."""
        active = np.flatnonzero(np.asarray(active, dtype=bool))
        vel = np.asarray(velocities, dtype=np.float64).reshape(grid.size, grid.dim)[active]
        if bound is None:
            bound = float(np.linalg.norm(vel, axis=1).max()) if len(active) else 0.0
        return cls(grid, active, vel, np.ones(len(active)), bound)

    def at(self, site: int) -> tuple[np.ndarray, np.ndarray]:
        sel = self.sites == site
        return self.velocities[sel], self.probabilities[sel]

    def active_sites(self) -> np.ndarray:
        return np.unique(self.sites)

    def mean(self) -> np.ndarray:
        """Mean velocity per site, zero on sites with the empty distribution."""
        out = np.zeros((self.grid.size, self.grid.dim))
        np.add.at(out, self.sites, self.probabilities[:, None] * self.velocities)
        return out

    def second_moment(self) -> np.ndarray:
        sq = np.sum(self.velocities ** 2, axis=1)
        return np.bincount(self.sites, weights=self.probabilities * sq, minlength=self.grid.size)
