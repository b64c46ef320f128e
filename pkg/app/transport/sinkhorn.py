"""Entropic optimal transport, log-domain Sinkhorn restricted to the supports."""
from __future__ import annotations

import logging

import numpy as np
from scipy.special import logsumexp

from app.errors import ConvergenceError, ValidationError
from app.model.torus import GridMeasure, check_same_grid
from app.transport.plan import TransportPlan, complete_duals, cost_matrix

logger = logging.getLogger(__name__)

CHECK_EVERY = 10


def sinkhorn(mu: GridMeasure, nu: GridMeasure, k: float = 2.0, epsilon: float = 1e-2,
             max_iters: int = 100_000, tol: float = 1e-9) -> TransportPlan:
    """Entropic plan between *mu* and *nu*.

    Zero-weight sites are dropped from the Gibbs kernel. The reported
    ``total_cost`` is the transport part ``<coupling, cost>`` only.
    """
    grid = check_same_grid(mu, nu)
    if epsilon <= 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon!r}")
    if max_iters < 1:
        raise ValidationError(f"max_iters must be >= 1, got {max_iters!r}")
    M_full = cost_matrix(grid, float(k))
    rows, cols = mu.support, nu.support
    a = mu.weights[rows]
    b = nu.weights[cols]
    M = M_full[np.ix_(rows, cols)]
    log_a = np.log(a)
    log_b = np.log(b)

    f = np.zeros(len(rows))
    g = np.zeros(len(cols))
    violation = np.inf
    it = 0
    while it < max_iters:
        it += 1
        g = epsilon * (log_b - logsumexp((f[:, None] - M) / epsilon, axis=0))
        f = epsilon * (log_a - logsumexp((g[None, :] - M) / epsilon, axis=1))
        if it % CHECK_EVERY == 0 or it == max_iters:
            # rows are exact right after the f update, so only columns can be off
            P = np.exp((f[:, None] + g[None, :] - M) / epsilon)
            violation = float(np.abs(P.sum(axis=0) - b).sum())
            if violation <= tol:
                break
    if violation > tol:
        raise ConvergenceError(violation, it)

    coupling = np.zeros((grid.size, grid.size))
    coupling[np.ix_(rows, cols)] = P
    phi = np.zeros(grid.size)
    psi = np.zeros(grid.size)
    phi[rows] = f
    psi[cols] = g
    phi, psi = complete_duals(phi, psi, mu.weights, nu.weights, M_full)
    total = float(np.sum(P * M))
    logger.debug("sinkhorn: eps=%g iterations=%d violation=%.3e cost=%.12g", epsilon, it, violation, total)
    return TransportPlan(
        source=mu,
        target=nu,
        coupling=coupling,
        cost_exponent=float(k),
        total_cost=total,
        dual_potential_source=phi,
        dual_potential_target=psi,
        exact=False,
        iterations=it,
    )
