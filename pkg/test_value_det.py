"""Deterministic value, its envelope and the quadratic HJB residual."""
import sys

import numpy as np
import pytest

from app.errors import SingularTimeError, ValidationError
from app.model.torus import GridMeasure, TorusGrid, dirac, random_measure, uniform
from app.transport.exact import exact_ot
from app.value.deterministic import (
    Horizon,
    PowerCost,
    du_det_dt,
    hjb_residual_quadratic,
    omega_envelope,
    time_rescale_check,
    u_det,
)

LINE = TorusGrid(1, 4)
QUAD = PowerCost()
UNIT = Horizon(1.0)


def test_dirac_pair_values():
    mu, nu = dirac(LINE, 0), dirac(LINE, 2)
    assert u_det(0.0, mu, nu, QUAD, UNIT) == pytest.approx(0.125, abs=1e-15)
    assert u_det(0.5, mu, nu, QUAD, UNIT) == pytest.approx(0.25, abs=1e-15)


def test_identical_measures_are_free():
    m = uniform(TorusGrid(2, 3))
    assert u_det(0.999, m, m, QUAD, UNIT) == 0.0
    assert du_det_dt(0.5, m, m, QUAD, UNIT) == 0.0


def test_singular_time():
    with pytest.raises(SingularTimeError):
        u_det(1.0, dirac(LINE, 0), dirac(LINE, 1), QUAD, UNIT)
    with pytest.raises(SingularTimeError):
        omega_envelope(1.5, LINE, QUAD, UNIT)


def test_cost_and_horizon_validation():
    with pytest.raises(ValidationError):
        PowerCost(exponent=1.0)
    with pytest.raises(ValidationError):
        PowerCost(scale=0.0)
    with pytest.raises(ValidationError):
        Horizon(0.0)


def test_omega_envelope():
    assert omega_envelope(0.0, LINE, QUAD, UNIT) == pytest.approx(0.125)
    assert omega_envelope(0.0, TorusGrid(2, 4), QUAD, UNIT) == pytest.approx(0.25)
    assert omega_envelope(0.5, LINE, QUAD, UNIT) == pytest.approx(2 * omega_envelope(0.0, LINE, QUAD, UNIT))


@pytest.mark.parametrize("n", [4, 5, 8])
def test_omega_is_the_worst_dirac_pair(n):
    grid = TorusGrid(1, n)
    t = 0.3
    worst = max(u_det(t, dirac(grid, 0), dirac(grid, j), QUAD, UNIT) for j in range(n))
    assert worst == pytest.approx(omega_envelope(t, grid, QUAD, UNIT), rel=1e-12)


@pytest.mark.parametrize("exponent", [2.0, 3.0])
def test_time_rescaling_is_constant(exponent):
    cost = PowerCost(exponent=exponent, scale=0.5)
    rng = np.random.default_rng(7)
    grid = TorusGrid(2, 4)
    mu, nu = random_measure(grid, rng), random_measure(grid, rng)
    t_list = [0.0, 0.1, 0.5, 0.9, 0.99]
    assert time_rescale_check(mu, nu, cost, UNIT, t_list) <= 1e-12
    assert time_rescale_check(mu, nu, cost, UNIT, []) == 0.0


def test_value_is_symmetric_and_increasing():
    rng = np.random.default_rng(1)
    grid = TorusGrid(1, 8)
    mu, nu = random_measure(grid, rng), random_measure(grid, rng)
    assert u_det(0.2, mu, nu, QUAD, UNIT) == pytest.approx(u_det(0.2, nu, mu, QUAD, UNIT), rel=1e-9)
    values = [u_det(t, mu, nu, QUAD, UNIT) for t in (0.0, 0.25, 0.5, 0.75)]
    assert all(a < b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("exponent", [2.0, 3.0])
def test_time_derivative_matches_finite_difference(exponent):
    cost = PowerCost(exponent=exponent)
    mu, nu = dirac(LINE, 0), dirac(LINE, 1)
    t, h = 0.4, 1e-6
    fd = (u_det(t + h, mu, nu, cost, UNIT) - u_det(t - h, mu, nu, cost, UNIT)) / (2 * h)
    assert du_det_dt(t, mu, nu, cost, UNIT) == pytest.approx(fd, rel=1e-4)


def test_hjb_residual_on_identical_measures():
    res = hjb_residual_quadratic(0.5, uniform(LINE), uniform(LINE), UNIT)
    assert res.residual == 0.0 and res.monge


def test_hjb_residual_dirac_pair():
    res = hjb_residual_quadratic(0.25, dirac(LINE, 0), dirac(LINE, 1), UNIT)
    assert res.monge
    assert abs(res.residual) <= 1e-9
    assert res.time_derivative == pytest.approx(0.0625 / (2 * 0.75 ** 2))


def test_hjb_residual_vanishes_on_monge_plans():
    rng = np.random.default_rng(17)
    checked = 0
    for grid in (TorusGrid(1, 8), TorusGrid(2, 4)):
        for _ in range(25):
            n_atoms = int(rng.integers(1, 5))
            mu = random_measure(grid, rng, n_atoms, equal_weights=True)
            nu = random_measure(grid, rng, n_atoms, equal_weights=True)
            res = hjb_residual_quadratic(float(rng.uniform(0, 0.9)), mu, nu, UNIT)
            if not res.monge:
                continue
            checked += 1
            assert abs(res.residual) <= 1e-7 * max(1.0, abs(res.time_derivative))
    assert checked > 0


def test_hjb_residual_on_sixteen_site_pairs_at_three_times():
    rng = np.random.default_rng(31)
    grid = TorusGrid(2, 4)
    checked = 0
    for _ in range(100):
        n_atoms = int(rng.integers(1, 5))
        mu = random_measure(grid, rng, n_atoms, equal_weights=True)
        nu = random_measure(grid, rng, n_atoms, equal_weights=True)
        for t in (0.0, 0.5, 0.9):
            res = hjb_residual_quadratic(t, mu, nu, UNIT)
            if not res.monge:
                continue
            checked += 1
            assert abs(res.residual) <= 1e-7 * max(1.0, abs(res.time_derivative))
    assert checked > 0


def test_hjb_residual_needs_exact_quadratic_plan():
    plan = exact_ot(dirac(LINE, 0), dirac(LINE, 1), 3.0)
    with pytest.raises(ValidationError):
        hjb_residual_quadratic(0.0, dirac(LINE, 0), dirac(LINE, 1), UNIT, plan)


def test_split_mass_plan_is_not_monge():
    mu = dirac(LINE, 0)
    nu = GridMeasure(LINE, [0.0, 0.5, 0.0, 0.5])
    res = hjb_residual_quadratic(0.0, mu, nu, UNIT)
    assert not res.monge
    # the barycentric drift cancels, the Hamiltonian misses the whole cost
    assert res.hamiltonian == pytest.approx(0.0, abs=1e-15)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
