"""Quantitative experiments built on the Monte Carlo estimator and the closed forms."""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from app.errors import HypothesisViolation, ValidationError
from app.model.torus import GridMeasure, TorusGrid, dirac, displacement_interpolate
from app.simulate.montecarlo import SimConfig, estimate_value
from app.simulate.seeding import mean_and_stderr, path_key
from app.targets.operators import JumpOperator
from app.targets.processes import PoissonJumpTarget
from app.targets.rates import PowerRate, RateSpec
from app.targets.sampling import brownian_increments, expected_jump_count, make_rng, time_grid
from app.transport.exact import exact_ot
from app.transport.plan import TransportPlan
from app.value.deterministic import Horizon, PowerCost, transport_cost, u_det

logger = logging.getLogger(__name__)

MAX_PATHS = 10 ** 6
DEFAULT_CUTOFFS = (1e-2, 1e-3, 1e-4, 1e-5)


# ---------------------------------------------------------------------------
# Value gap near the horizon
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GapPoint:
    t: float
    T_minus_t: float
    mean_cost: float
    std_error: float
    u_det: float
    gap: float
    n_paths: int


def value_gap_curve(template: SimConfig, t_list, threads: int | None = None,
                    rel_tol: float | None = None, max_paths: int = MAX_PATHS) -> list[GapPoint]:
    """Policy cost minus the deterministic value toward the target's reference measure.

    With *rel_tol*, ``n_paths`` is quadrupled at each time until the standard
    error is at most ``rel_tol * |gap|`` or *max_paths* would be exceeded.
    """
    t_list = [float(t) for t in t_list]
    if rel_tol is not None and not rel_tol > 0:
        raise ValidationError(f"rel_tol must be positive, got {rel_tol!r}")
    if any(b <= a for a, b in zip(t_list[:-1], t_list[1:])):
        raise ValidationError("t_list must be strictly increasing")
    horizon = template.horizon
    reference = template.target.reference_measure(horizon)
    points = []
    for t in t_list:
        rem = horizon.remaining(t)
        dt = min(template.dt_coarse, rem / 4)
        cfg = dataclasses.replace(template, t0=t, dt_coarse=dt, dt_min=min(template.dt_min, dt))
        ud = u_det(t, template.mu, reference, template.cost, horizon)
        while True:
            report = estimate_value(cfg, threads)
            gap = report.mean_cost - ud
            if rel_tol is None or report.std_error <= rel_tol * abs(gap) or cfg.n_paths * 4 > max_paths:
                break
            cfg = dataclasses.replace(cfg, n_paths=cfg.n_paths * 4)
            logger.info("value_gap_curve: t=%g raising n_paths to %d", t, cfg.n_paths)
        points.append(GapPoint(t, rem, report.mean_cost, report.std_error, ud, gap, cfg.n_paths))
    return points


def fit_gap_exponent(points) -> float:
    """Least-squares slope of ``log gap`` against ``log (T - t)``."""
    points = list(points)
    if len(points) < 2:
        raise ValidationError("need at least two points to fit an exponent")
    gaps = np.array([p.gap for p in points])
    if np.any(gaps <= 0):
        raise ValidationError("gaps must be positive for a log-log fit")
    rem = np.array([p.T_minus_t for p in points])
    return float(np.polyfit(np.log(rem), np.log(gaps), 1)[0])


def compensated_intensity(C: float, gamma: float, grid: TorusGrid, cost: PowerCost) -> PowerRate:
    """Jump rate whose product with the envelope ``omega(t)`` is ``C (T - t)^gamma``."""
    k = cost.exponent
    return PowerRate(C / (cost.scale * grid.diameter() ** k), gamma + k - 1)


def no_jump_lower_bound(t: float, mu: GridMeasure, target: PoissonJumpTarget, cost: PowerCost,
                        horizon: Horizon) -> float:
    """``P(no jump on [t, T]) * u_det(t, mu, nu0)``, a lower bound on the value."""
    lam = expected_jump_count(target, t, horizon)
    return math.exp(-lam) * u_det(t, mu, target.nu0, cost, horizon)


# ---------------------------------------------------------------------------
# Blow-up of the value when one jump is always possible
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlowupPoint:
    epsilon: float
    lower_bound: float
    floor_bound: float


def pair_cost_floor(nu: GridMeasure, operator: JumpOperator) -> float:
    """Smallest ``W_2^2(delta_x, nu) + W_2^2(delta_x, T nu)`` over grid Diracs."""
    shifted = operator.apply(nu)
    return min(transport_cost(dirac(nu.grid, s), nu, 2.0) + transport_cost(dirac(nu.grid, s), shifted, 2.0)
               for s in range(nu.grid.size))


def _snap_breaks(plan: TransportPlan) -> np.ndarray:
    """Interpolation parameters in (0, 1) where some mass element changes site."""
    n = plan.grid.n
    rows, _, _ = plan.support()
    x = plan.grid.coordinates[rows].reshape(-1) * n
    d = plan.displacements().reshape(-1) * n
    breaks = [0.0, 1.0]
    for xi, di in zip(x, d):
        if di == 0:
            continue
        lo, hi = sorted((xi, xi + di))
        m = np.arange(math.ceil(lo - 0.5), math.floor(hi - 0.5) + 1)
        s = (m + 0.5 - xi) / di
        breaks.extend(s[(s > 0) & (s < 1)].tolist())
    return np.unique(breaks)


def blowup_probe(lam_const: float, nu: GridMeasure, operator: JumpOperator, mu: GridMeasure, t: float,
                 horizon: Horizon, epsilons=DEFAULT_CUTOFFS) -> list[BlowupPoint]:
    """Lower bound on the value with constant jump rate, cut off at ``T - epsilon``.

    The bound is ``P(n = 1) * int_t^{T-eps} f(s) / (T - s) * rho(s) ds`` with
    ``rho`` the uniform density of the single jump time and
    ``f(s) = W_2^2(mu_s, nu) + W_2^2(mu_s, T nu)`` along the geodesic from
    *mu* to *nu*. ``f`` is piecewise constant, so the integral is summed in
    closed form. ``floor_bound`` replaces ``f`` by :func:`pair_cost_floor`.
    """
    if not lam_const > 0:
        raise ValidationError(f"jump rate must be positive, got {lam_const!r}")
    shifted = operator.apply(nu)
    if shifted == nu:
        raise HypothesisViolation("blow-up hypothesis violated: the jump operator leaves the target unchanged")
    T = horizon.T
    rem = horizon.remaining(t)
    epsilons = sorted((float(e) for e in epsilons), reverse=True)
    if not epsilons or not 0 < epsilons[-1] <= epsilons[0] < rem:
        raise ValidationError(f"cutoffs must lie in (0, {rem!r})")

    lam = lam_const * rem
    weight = lam * math.exp(-lam) / rem
    plan = exact_ot(mu, nu, 2.0)
    breaks = _snap_breaks(plan)
    pieces = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        m = displacement_interpolate(plan, 0.5 * (a + b))
        f = transport_cost(m, nu, 2.0) + transport_cost(m, shifted, 2.0)
        pieces.append((t + a * rem, t + b * rem, f))
    floor = pair_cost_floor(nu, operator)

    out = []
    for eps in epsilons:
        cut = T - eps
        total = 0.0
        for a, b, f in pieces:
            if a >= cut:
                break
            total += f * math.log((T - a) / (T - min(b, cut)))
        out.append(BlowupPoint(eps, weight * total, weight * floor * math.log(rem / eps)))
    return out


# ---------------------------------------------------------------------------
# Steering identity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SteeringCheck:
    lhs: float
    rhs: float
    std_error: float
    z_score: float


def steering_identity_check(sigma: RateSpec, t0: float, horizon: Horizon, n_paths: int,
                            x0_offset: float, dt: float = 1e-3, dt_min: float | None = None,
                            refine_ratio: float = 1.0, base_seed: int = 0,
                            chunk: int = 1000) -> SteeringCheck:
    """Compare the mean kinetic energy of the steering ODE with its closed form.

    ``X`` starts at ``W_{t0} - x0_offset`` and follows ``dX = (W - X) / (T - t) dt``
    (explicit Euler, stopped at ``T - dt_min``). The closed form is
    ``x0_offset^2 / (T - t0) + int sigma^2 / (T - s) ds``.
    """
    T = horizon.T
    rem0 = horizon.remaining(t0)
    if not math.isfinite(sigma.square_over_remaining(t0, T)):
        raise HypothesisViolation("identity is +inf = +inf: int sigma^2 / (T - s) diverges")
    if n_paths < 1:
        raise ValidationError(f"n_paths must be >= 1, got {n_paths!r}")
    tail, _ = integrate.quad(lambda s: float(sigma.value(s, T)) ** 2 / (T - s), t0, T,
                             epsrel=1e-10, limit=200)
    rhs = x0_offset ** 2 / rem0 + tail

    grid = time_grid(t0, T, dt, dt_min, refine_ratio)
    last = len(grid) - 2
    remaining = T - grid[:last + 1]
    steps = np.diff(grid[:last + 1])
    costs = np.empty(n_paths)
    for start in range(0, n_paths, chunk):
        stop = min(start + chunk, n_paths)
        dW = np.stack([brownian_increments(sigma, grid, T, make_rng(path_key(base_seed, i)), 1)[:last, 0]
                       for i in range(start, stop)])
        v = np.empty((stop - start, last + 1))
        v[:, 0] = x0_offset / remaining[0]
        v[:, 1:] = v[:, :1] + np.cumsum(dW / remaining[1:], axis=1)
        # row-wise sum, so identical paths round identically
        costs[start:stop] = np.sum(v[:, :-1] ** 2 * steps, axis=1)
    lhs, se = mean_and_stderr(costs)
    diff = lhs - rhs
    if se > 1e-12 * max(1.0, abs(lhs)):
        z = diff / se
    else:
        z = 0.0 if abs(diff) <= 1e-3 else math.copysign(math.inf, diff)
    logger.info("steering_identity_check: lhs=%.6g rhs=%.6g se=%.3g z=%.2f", lhs, rhs, se, z)
    return SteeringCheck(lhs, rhs, se, z)
