"""Super-differentials of ``1/2 W_2^2(., nu)`` built from optimal plans, and their checks."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from app.errors import ValidationError
from app.model.torus import GridMeasure, check_same_grid, minimal_image, random_measure
from app.transport.exact import exact_ot
from app.transport.plan import MARGINAL_TOL, TransportPlan, displacement_tensor
from app.transport.speed import SpeedDistribution
from app.value.deterministic import transport_cost

logger = logging.getLogger(__name__)

SLACK = 1e-9


@dataclass(frozen=True)
class SuperDiffCandidate:
    base_measure: GridMeasure
    psi: SpeedDistribution

    @property
    def bound(self) -> float:
        return self.psi.bound


def candidate_from_optimal_plan(plan: TransportPlan) -> SuperDiffCandidate:
    """Disintegrate the plan: at each source atom ``x``, mass ``gamma(x, y) / mu(x)`` on ``x - y``."""
    if not plan.exact or plan.cost_exponent != 2.0:
        raise ValidationError("a super-differential candidate needs an exact quadratic plan")
    rows, cols, mass = plan.support()
    coords = plan.grid.coordinates
    z = minimal_image(coords[rows] - coords[cols])
    prob = mass / plan.source.weights[rows]
    # renormalize per site so the probabilities add up exactly
    totals = np.bincount(rows, weights=prob, minlength=plan.grid.size)
    prob = prob / totals[rows]
    bound = np.sqrt(plan.grid.dim) / 2
    return SuperDiffCandidate(plan.source, SpeedDistribution(plan.grid, rows, z, prob, bound))


def product_coupling(mu: GridMeasure, mu_prime: GridMeasure) -> np.ndarray:
    check_same_grid(mu, mu_prime)
    return np.outer(mu.weights, mu_prime.weights)


@dataclass(frozen=True)
class SuperDiffCheck:
    lhs: float
    rhs: float
    holds: bool

    @property
    def excess(self) -> float:
        return self.lhs - self.rhs


def check_superdiff_inequality(cand: SuperDiffCandidate, nu_ref: GridMeasure, mu_prime: GridMeasure,
                               gamma) -> SuperDiffCheck:
    """Exact first-order upper bound along the coupling *gamma* of ``(mu, mu_prime)``.

    ``lhs = W_2^2(mu', nu) - W_2^2(mu, nu)`` and
    ``rhs = 2 sum gamma(x, y) E_psi(x)[z] . (y - x) + sum gamma(x, y) |y - x|^2``
    with minimal-image displacements; holds within ``SLACK``.
    """
    mu = cand.base_measure
    grid = check_same_grid(mu, nu_ref, mu_prime)
    g = gamma.coupling if isinstance(gamma, TransportPlan) else np.asarray(gamma, dtype=np.float64)
    if g.shape != (grid.size, grid.size):
        raise ValidationError(f"coupling has shape {g.shape}, expected {(grid.size, grid.size)}")
    if np.abs(g.sum(axis=1) - mu.weights).sum() > MARGINAL_TOL \
            or np.abs(g.sum(axis=0) - mu_prime.weights).sum() > MARGINAL_TOL:
        raise ValidationError("gamma is not a coupling of (mu, mu_prime)")
    disp = displacement_tensor(grid)
    mean_z = cand.psi.mean()
    first = np.einsum("xy,xd,xyd->", g, mean_z, disp)
    second = np.einsum("xy,xy->", g, np.sum(disp ** 2, axis=-1))
    lhs = transport_cost(mu_prime, nu_ref, 2.0) - transport_cost(mu, nu_ref, 2.0)
    rhs = 2.0 * first + second
    return SuperDiffCheck(float(lhs), float(rhs), bool(lhs <= rhs + SLACK))


def hamiltonian_integral(cand: SuperDiffCandidate) -> float:
    """``sum_x mu(x) E_psi(x) |z|^2``."""
    return float(cand.base_measure.weights @ cand.psi.second_moment())


def mean_velocity_candidate(cand: SuperDiffCandidate) -> SuperDiffCandidate:
    """Replace every ``psi(x)`` by the Dirac at its mean."""
    active = np.zeros(cand.base_measure.grid.size, dtype=bool)
    active[cand.psi.active_sites()] = True
    psi = SpeedDistribution.from_field(cand.base_measure.grid, cand.psi.mean(), active, cand.bound)
    return SuperDiffCandidate(cand.base_measure, psi)


@dataclass(frozen=True)
class SweepResult:
    instances: int
    violations: int
    max_excess: float
    jensen_violations: int


def superdiff_sweep(grid, n_instances: int, rng: np.random.Generator, max_atoms: int | None = None) -> SweepResult:
    """Random ``(mu, nu, mu', gamma)`` instances; gamma alternates between product and optimal couplings."""
    violations = 0
    jensen = 0
    worst = -np.inf
    for i in range(n_instances):
        atoms = None if max_atoms is None else int(rng.integers(1, max_atoms + 1))
        mu = random_measure(grid, rng, atoms)
        nu = random_measure(grid, rng, atoms)
        mu_prime = random_measure(grid, rng, atoms)
        cand = candidate_from_optimal_plan(exact_ot(mu, nu, 2.0))
        gamma = product_coupling(mu, mu_prime) if i % 2 == 0 else exact_ot(mu, mu_prime, 2.0)
        check = check_superdiff_inequality(cand, nu, mu_prime, gamma)
        worst = max(worst, check.excess)
        violations += not check.holds
        if hamiltonian_integral(mean_velocity_candidate(cand)) > hamiltonian_integral(cand) + SLACK:
            jensen += 1
    logger.info("superdiff_sweep: %d instances, %d violations, max excess %.3e", n_instances, violations, worst)
    return SweepResult(n_instances, violations, float(worst), jensen)
