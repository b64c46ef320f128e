"""Super-differential candidates read off optimal plans."""
import math
import sys

import numpy as np
import pytest

from app.analysis.superdiff import (
    candidate_from_optimal_plan,
    check_superdiff_inequality,
    hamiltonian_integral,
    mean_velocity_candidate,
    product_coupling,
    superdiff_sweep,
)
from app.errors import ValidationError
from app.model.torus import GridMeasure, TorusGrid, atoms, dirac, random_measure, uniform
from app.transport.exact import exact_ot
from app.transport.sinkhorn import sinkhorn

LINE = TorusGrid(1, 4)


def test_identity_plan_gives_zero_speeds():
    m = uniform(LINE)
    cand = candidate_from_optimal_plan(exact_ot(m, m))
    assert np.all(cand.psi.velocities == 0.0)
    assert hamiltonian_integral(cand) == 0.0


def test_antipodal_tie_points_forward():
    cand = candidate_from_optimal_plan(exact_ot(dirac(LINE, 0), dirac(LINE, 2)))
    vel, prob = cand.psi.at(0)
    assert vel[:, 0].tolist() == [0.5]
    assert prob.tolist() == [1.0]
    assert cand.bound == 0.5


def test_split_mass_disintegrates():
    cand = candidate_from_optimal_plan(exact_ot(dirac(LINE, 0), atoms(LINE, [1, 3])))
    vel, prob = cand.psi.at(0)
    assert sorted(vel[:, 0].tolist()) == [-0.25, 0.25]
    assert prob.tolist() == [0.5, 0.5]
    assert hamiltonian_integral(cand) == pytest.approx(0.0625)
    # Jensen: the averaged candidate has no speed left
    assert hamiltonian_integral(mean_velocity_candidate(cand)) == 0.0


def test_candidate_needs_exact_quadratic_plan():
    with pytest.raises(ValidationError):
        candidate_from_optimal_plan(exact_ot(dirac(LINE, 0), dirac(LINE, 1), 3.0))
    with pytest.raises(ValidationError):
        candidate_from_optimal_plan(sinkhorn(dirac(LINE, 0), dirac(LINE, 1), 2.0, 0.01))


def test_staying_put_is_tight():
    rng = np.random.default_rng(0)
    grid = TorusGrid(2, 3)
    mu, nu = random_measure(grid, rng), random_measure(grid, rng)
    cand = candidate_from_optimal_plan(exact_ot(mu, nu))
    check = check_superdiff_inequality(cand, nu, mu, np.diag(mu.weights))
    assert check.lhs == 0.0 and check.rhs == 0.0 and check.holds


def test_single_step_perturbation():
    grid = TorusGrid(1, 8)
    mu = GridMeasure(grid, [0.25, 0.25, 0.5, 0, 0, 0, 0, 0])
    nu = atoms(grid, [4, 5])
    mu_prime = GridMeasure(grid, [0.25, 0.25, 0.25, 0.25, 0, 0, 0, 0])
    gamma = np.diag(mu.weights)
    gamma[2, 2] = 0.25
    gamma[2, 3] = 0.25
    cand = candidate_from_optimal_plan(exact_ot(mu, nu))
    check = check_superdiff_inequality(cand, nu, mu_prime, gamma)
    assert check.holds
    assert check.excess <= 1e-9
    assert check.lhs < 0


def test_inequality_rejects_bad_couplings():
    mu, nu = dirac(LINE, 0), dirac(LINE, 2)
    cand = candidate_from_optimal_plan(exact_ot(mu, nu))
    with pytest.raises(ValidationError):
        check_superdiff_inequality(cand, nu, dirac(LINE, 1), np.diag(mu.weights))
    with pytest.raises(ValidationError):
        check_superdiff_inequality(cand, nu, dirac(LINE, 1), np.ones((3, 3)))
    with pytest.raises(ValidationError):
        check_superdiff_inequality(cand, dirac(TorusGrid(1, 5), 0), mu, np.diag(mu.weights))


def test_product_coupling_marginals():
    rng = np.random.default_rng(4)
    a, b = random_measure(LINE, rng), random_measure(LINE, rng)
    g = product_coupling(a, b)
    assert np.allclose(g.sum(axis=1), a.weights)
    assert np.allclose(g.sum(axis=0), b.weights)


@pytest.mark.parametrize("grid", [TorusGrid(1, 4), TorusGrid(1, 8), TorusGrid(2, 4)])
def test_sweep_finds_no_violation(grid):
    result = superdiff_sweep(grid, 1000, np.random.default_rng(grid.size), max_atoms=4)
    assert result.instances == 1000
    assert result.violations == 0
    assert result.jensen_violations == 0
    assert result.max_excess <= 1e-9


def test_sweep_with_full_supports():
    result = superdiff_sweep(TorusGrid(2, 3), 200, np.random.default_rng(1))
    assert result.violations == 0
    assert math.isfinite(result.max_excess)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
