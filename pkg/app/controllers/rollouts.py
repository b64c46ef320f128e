"""Explicit admissible controls: geodesics, replanning after jumps, transport then steer."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from app.errors import ValidationError
from app.model.torus import GridMeasure, check_same_grid, minimal_image
from app.targets.processes import DiffusionTranslateTarget
from app.targets.sampling import TargetPath
from app.transport.exact import exact_ot
from app.value.deterministic import Horizon, PowerCost, transport_cost, u_det
from app.controllers.trajectory import (
    ControlledTrajectory,
    GeodesicSegment,
    HoldSegment,
    TranslationSegment,
)

logger = logging.getLogger(__name__)

REPLANNING_MODES = ("inter_jump", "horizon")


def geodesic_rollout(mu: GridMeasure, nu: GridMeasure, t0: float, t1: float, steps: int,
                     cost: PowerCost) -> ControlledTrajectory:
    """Move *mu* onto *nu* along the exact plan's displacement interpolation over ``[t0, t1]``."""
    if not t0 < t1:
        raise ValidationError(f"rollout needs t0 < t1, got {t0!r}, {t1!r}")
    check_same_grid(mu, nu)
    plan = exact_ot(mu, nu, cost.exponent)
    return ControlledTrajectory((GeodesicSegment(plan, t0, t1, t1, steps, cost),), cost)


def replanning_rollout(mu: GridMeasure, path: TargetPath, t0: float, horizon: Horizon, cost: PowerCost,
                       steps_per_segment: int = 8, mode: str = "inter_jump") -> ControlledTrajectory:
    """Restart a deterministic geodesic toward the observed target after every jump.

    ``inter_jump`` spends each whole interval between observed jumps on the
    geodesic, reaching the current target at the next jump. ``horizon`` aims
    every geodesic at ``T`` and interrupts it when the target jumps. While the
    target is unrevealed the state holds still.
    """
    if mode not in REPLANNING_MODES:
        raise ValidationError(f"unknown replanning mode {mode!r}; expected one of {REPLANNING_MODES}")
    if path.is_diffusion:
        raise ValidationError("replanning needs a jump-type target path")
    T = horizon.T
    horizon.remaining(t0)
    bounds = [t0] + [s for s in path.event_times if t0 < s < T] + [T]
    current = mu
    segments = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        target = path.measure_at(a)
        if target is None:
            segments.append(HoldSegment(current, a, b))
            continue
        arrival = b if mode == "inter_jump" else T
        seg = GeodesicSegment(exact_ot(current, target, cost.exponent), a, b, arrival, steps_per_segment, cost)
        segments.append(seg)
        current = seg.end_measure
    return ControlledTrajectory(tuple(segments), cost)


def steer_rollout(mu: GridMeasure, path: TargetPath, t0: float, horizon: Horizon, cost: PowerCost,
                  theta: float, steps: int = 16) -> ControlledTrajectory:
    """Transport onto the observed target, then track its diffusing offset.

    The first phase lasts ``delta = (T - t0) - (T - t0)**theta`` (rounded up to
    the path grid). The second translates the whole state with the common
    velocity ``(W_t - X_t) / (T - t)``, Euler on the path grid, from
    ``X = W_{t0}``. The step into ``T`` is replaced by an uncosted jump onto
    ``W_T`` whose size is reported as ``terminal_gap``.
    """
    if not cost.is_quadratic:
        raise ValidationError("steering needs the quadratic cost")
    if not path.is_diffusion:
        raise ValidationError("steering needs a diffusion target path")
    if not theta > 1:
        raise ValidationError(f"theta must be > 1, got {theta!r}")
    T = horizon.T
    rem = horizon.remaining(t0)
    delta = rem - rem ** theta
    if not 0 < delta < rem:
        raise ValidationError(f"theta={theta!r} gives a transport phase of {delta!r} outside (0, {rem!r})")

    times = path.grid_times
    W = path.offsets
    last = len(times) - 2
    idx = min(max(int(np.searchsorted(times, t0 + delta, side="left")), 1), last)
    t_switch = float(times[idx])
    phase1 = GeodesicSegment(exact_ot(mu, path.initial, 2.0), t0, t_switch, t_switch, steps, cost)

    remaining = T - times[idx:last + 1]
    v = np.empty((last - idx + 1, W.shape[1]))
    v[0] = (W[idx] - W[0]) / remaining[0]
    if last > idx:
        dW = np.diff(W[idx:last + 1], axis=0)
        v[1:] = v[0] + np.cumsum(dW / remaining[1:, None], axis=0)
    X = W[idx:last + 1] - v * remaining[:, None]
    gap = float(np.linalg.norm(minimal_image(W[-1] - X[-1])))
    offsets = np.vstack([X, W[-1][None, :]])
    velocities = np.vstack([v[:-1], np.zeros((1, W.shape[1]))])
    phase2 = TranslationSegment(path.base, np.asarray(times[idx:]), offsets, velocities, cost)
    return ControlledTrajectory((phase1, phase2), cost, terminal_gap=gap)


def lower_bound_projection(trajectories, cost: PowerCost, horizon: Horizon) -> float:
    """Deterministic value toward the averaged terminal target.

    By convexity of the transport cost in its target this never exceeds the
    mean running cost of an admissible family sharing ``(t0, mu)``.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise ValidationError("no trajectories given")
    first = trajectories[0]
    mu = first.initial_measure
    terminals = [tr.terminal_measure for tr in trajectories]
    grid = check_same_grid(mu, *terminals)
    for tr in trajectories[1:]:
        if tr.t_start != first.t_start or tr.initial_measure != mu:
            raise ValidationError("trajectories do not share their starting time and state")
    mean_target = GridMeasure.from_mass(grid, np.mean([m.weights for m in terminals], axis=0))
    return u_det(first.t_start, mu, mean_target, cost, horizon)


# ---------------------------------------------------------------------------
# Closed-form expectation of the transport-then-steer policy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SteeringBound:
    delta: float
    transport: float
    drift: float
    diffusion: float

    @property
    def total(self) -> float:
        return self.transport + self.drift + self.diffusion


def steering_cost_expectation(mu: GridMeasure, target: DiffusionTranslateTarget, t0: float,
                              horizon: Horizon, cost: PowerCost, theta: float) -> SteeringBound:
    """Expected cost of :func:`steer_rollout` in continuous time.

    ``transport`` is the deterministic first phase, ``drift`` the start-up
    cost of the offset ``W`` accumulated during it and ``diffusion`` the
    tracking cost ``int sigma^2 / (T - s)`` over the steering phase.
    """
    if not cost.is_quadratic:
        raise ValidationError("steering needs the quadratic cost")
    T = horizon.T
    rem = horizon.remaining(t0)
    delta = rem - rem ** theta
    if not 0 < delta < rem:
        raise ValidationError(f"theta={theta!r} gives a transport phase of {delta!r} outside (0, {rem!r})")
    s = t0 + delta
    c, dim = cost.scale, target.grid.dim
    start = target.reference_measure(horizon)
    transport = c * transport_cost(mu, start, 2.0) / delta
    accumulated, _ = integrate.quad(lambda r: float(target.sigma.value(r, T)) ** 2, t0, s, epsrel=1e-10)
    drift = c * dim * accumulated / (T - s)
    diffusion = c * dim * target.sigma.square_over_remaining(s, T)
    return SteeringBound(delta, transport, drift, diffusion)
