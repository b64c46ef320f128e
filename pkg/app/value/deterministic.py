"""Closed-form deterministic value for power running costs, its envelope and HJB checks."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from app.errors import SingularTimeError, ValidationError
from app.model.torus import GridMeasure, TorusGrid, check_same_grid
from app.transport.exact import exact_ot
from app.transport.plan import TransportPlan, is_monge

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PowerCost:
    """Running cost ``L(alpha) = scale * |alpha|^exponent``."""

    exponent: float = 2.0
    scale: float = 0.5

    def __post_init__(self):
        if not self.exponent > 1:
            raise ValidationError(f"cost exponent must be > 1, got {self.exponent!r}")
        if not self.scale > 0:
            raise ValidationError(f"cost scale must be > 0, got {self.scale!r}")

    @property
    def is_quadratic(self) -> bool:
        return self.exponent == 2.0

    def lagrangian(self, speed) -> np.ndarray:
        return self.scale * np.abs(speed) ** self.exponent


@dataclass(frozen=True)
class Horizon:
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValidationError(f"horizon must be positive, got {self.T!r}")

    def remaining(self, t: float) -> float:
        if not t < self.T:
            raise SingularTimeError(t, self.T)
        return self.T - t


def transport_cost(mu: GridMeasure, nu: GridMeasure, k: float) -> float:
    """``W_k(mu, nu)^k``, exactly zero on identical measures."""
    check_same_grid(mu, nu)
    if mu == nu:
        return 0.0
    return exact_ot(mu, nu, k).total_cost


def u_det_at(t: float, cost_k: float, cost: PowerCost, horizon: Horizon) -> float:
    """Deterministic value from a precomputed ``W_k^k``."""
    rem = horizon.remaining(t)
    if cost_k == 0.0:
        return 0.0
    return cost.scale * cost_k / rem ** (cost.exponent - 1)


def u_det(t: float, mu: GridMeasure, nu: GridMeasure, cost: PowerCost, horizon: Horizon) -> float:
    """Minimal cost of steering *mu* to *nu* in the time left before the horizon."""
    horizon.remaining(t)
    return u_det_at(t, transport_cost(mu, nu, cost.exponent), cost, horizon)


def du_det_dt(t: float, mu: GridMeasure, nu: GridMeasure, cost: PowerCost, horizon: Horizon) -> float:
    rem = horizon.remaining(t)
    k = cost.exponent
    return (k - 1) * cost.scale * transport_cost(mu, nu, k) / rem ** k


def omega_envelope(t: float, grid: TorusGrid, cost: PowerCost, horizon: Horizon) -> float:
    """Largest deterministic value over all pairs of grid measures at times up to *t*.

    The maximum is attained by two Diracs at maximal periodic distance, and the
    value grows with time, so the supremum sits at *t* itself.
    """
    rem = horizon.remaining(t)
    return cost.scale * grid.diameter() ** cost.exponent / rem ** (cost.exponent - 1)


def time_rescale_check(mu: GridMeasure, nu: GridMeasure, cost: PowerCost, horizon: Horizon,
                       t_list) -> float:
    """Max drift of ``u_det(t) * (T - t)^(k-1)`` across *t_list*."""
    t_list = list(t_list)
    if not t_list:
        return 0.0
    cost_k = transport_cost(mu, nu, cost.exponent)
    scaled = [u_det_at(t, cost_k, cost, horizon) * horizon.remaining(t) ** (cost.exponent - 1)
              for t in t_list]
    return float(max(abs(s - scaled[0]) for s in scaled))


# ---------------------------------------------------------------------------
# HJB residual (quadratic cost)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HJBResidual:
    residual: float
    time_derivative: float
    hamiltonian: float
    monge: bool


def hjb_residual_quadratic(t: float, mu: GridMeasure, nu: GridMeasure, horizon: Horizon,
                           plan: TransportPlan | None = None) -> HJBResidual:
    """Residual of ``-dU/dt + 1/2 * int |D_mu U|^2 dmu`` for ``U = W_2^2 / (2 (T - t))``.

    The measure gradient is read off the exact plan as the barycentric
    displacement over the remaining time, so the residual vanishes whenever the
    plan moves every atom to a single site.
    """
    rem = horizon.remaining(t)
    check_same_grid(mu, nu)
    if mu == nu:
        return HJBResidual(0.0, 0.0, 0.0, True)
    if plan is None:
        plan = exact_ot(mu, nu, 2.0)
    elif plan.cost_exponent != 2.0 or not plan.exact:
        raise ValidationError("the HJB residual needs an exact quadratic plan")
    dt_u = plan.total_cost / (2.0 * rem ** 2)
    grad = plan.barycentric_displacement() / rem
    ham = 0.5 * float(np.sum(mu.weights * np.sum(grad ** 2, axis=1)))
    return HJBResidual(ham - dt_u, dt_u, ham, is_monge(plan))
