"""Controlled trajectories built from geodesic, translation and hold segments.

Segments price themselves in closed form; per-step measures and controls
are produced on request only, so Monte Carlo rollouts never pay for them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from app.errors import ValidationError
from app.model.torus import GridMeasure, displacement_interpolate, snap_translate
from app.transport.plan import TransportPlan
from app.value.deterministic import PowerCost


@dataclass(frozen=True)
class StepControl:
    """Velocities applied on one time step to the moving mass elements.

    ``positions`` are the element locations at the start of the step.
    """

    t: float
    dt: float
    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray

    def cost(self, cost: PowerCost) -> float:
        speed = np.linalg.norm(self.velocities, axis=1)
        return self.dt * float(np.sum(self.masses * cost.lagrangian(speed)))


# ---------------------------------------------------------------------------
# Segments
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GeodesicSegment:
    """Motion along the displacement interpolation of *plan*.

    The geodesic is timed to reach the plan target at ``arrival``; a segment
    interrupted by a replanning event ends earlier, at ``t_end``.
    """

    plan: TransportPlan
    t_start: float
    t_end: float
    arrival: float
    steps: int
    cost_model: PowerCost

    def __post_init__(self):
        if not self.t_start < self.t_end <= self.arrival:
            raise ValidationError(
                f"segment needs t_start < t_end <= arrival, got {self.t_start}, {self.t_end}, {self.arrival}")
        if self.steps < 1:
            raise ValidationError("a segment needs at least one step")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def cost(self) -> float:
        c, k = self.cost_model.scale, self.cost_model.exponent
        w = self.plan.total_cost
        if w == 0.0:
            return 0.0
        if self.t_end == self.arrival:
            return c * w / self.duration ** (k - 1)
        return c * w * self.duration / (self.arrival - self.t_start) ** k

    def fraction(self, t: float) -> float:
        return (t - self.t_start) / (self.arrival - self.t_start)

    @property
    def start_measure(self) -> GridMeasure:
        return self.plan.source

    @property
    def end_measure(self) -> GridMeasure:
        return displacement_interpolate(self.plan, self.fraction(self.t_end))

    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.steps + 1)

    def measures(self) -> list[GridMeasure]:
        return [displacement_interpolate(self.plan, self.fraction(t)) for t in self.times()]

    def controls(self) -> list[StepControl]:
        rows, _, mass = self.plan.support()
        disp = self.plan.displacements()
        start = self.plan.grid.coordinates[rows]
        vel = disp / (self.arrival - self.t_start)
        times = self.times()
        return [StepControl(t, dt, start + self.fraction(t) * disp, vel, mass)
                for t, dt in zip(times[:-1], np.diff(times))]


@dataclass(frozen=True, eq=False)
class TranslationSegment:
    """Rigid translation of ``base`` by ``offsets[j]`` at each node ``times[j]``.

    ``velocities[j]`` is the common velocity on ``[times[j], times[j+1]]``;
    steps with zero velocity but a change of offset are jumps and cost nothing.
    """

    base: GridMeasure
    times: np.ndarray
    offsets: np.ndarray
    velocities: np.ndarray
    cost_model: PowerCost

    def __post_init__(self):
        if len(self.times) < 2 or self.offsets.shape[0] != len(self.times) \
                or self.velocities.shape[0] != len(self.times) - 1:
            raise ValidationError("translation segment arrays are inconsistent")

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def cost(self) -> float:
        speed = np.linalg.norm(self.velocities, axis=1)
        return float(np.sum(np.diff(self.times) * self.cost_model.lagrangian(speed)))

    @property
    def start_measure(self) -> GridMeasure:
        return snap_translate(self.base, self.offsets[0])

    @property
    def end_measure(self) -> GridMeasure:
        return snap_translate(self.base, self.offsets[-1])

    def measures(self) -> list[GridMeasure]:
        return [snap_translate(self.base, x) for x in self.offsets]

    def controls(self) -> list[StepControl]:
        sites = self.base.support
        start = self.base.grid.coordinates[sites]
        mass = self.base.weights[sites]
        return [StepControl(float(t), float(dt), start + x, np.broadcast_to(v, start.shape), mass)
                for t, dt, x, v in zip(self.times[:-1], np.diff(self.times), self.offsets[:-1], self.velocities)]


@dataclass(frozen=True, eq=False)
class HoldSegment:
    """The state stays put on ``[t_start, t_end]``."""

    measure: GridMeasure
    t_start: float
    t_end: float

    cost = 0.0

    @property
    def start_measure(self) -> GridMeasure:
        return self.measure

    @property
    def end_measure(self) -> GridMeasure:
        return self.measure

    def times(self) -> np.ndarray:
        return np.array([self.t_start, self.t_end])

    def measures(self) -> list[GridMeasure]:
        return [self.measure, self.measure]

    def controls(self) -> list[StepControl]:
        sites = self.measure.support
        pos = self.measure.grid.coordinates[sites]
        return [StepControl(self.t_start, self.t_end - self.t_start, pos, np.zeros_like(pos),
                            self.measure.weights[sites])]


def _segment_times(seg) -> np.ndarray:
    return np.asarray(seg.times() if callable(seg.times) else seg.times)


# ---------------------------------------------------------------------------
# Trajectory
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ControlledTrajectory:
    """A sequence of contiguous segments with its running cost.

    ``terminal_gap`` is the size of the final uncosted jump onto the target,
    zero unless a steering phase had to be closed.
    """

    segments: tuple
    cost_model: PowerCost
    terminal_gap: float = 0.0
    _cost: float = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not self.segments:
            raise ValidationError("a trajectory needs at least one segment")
        for prev, nxt in zip(self.segments[:-1], self.segments[1:]):
            if prev.t_end != nxt.t_start:
                raise ValidationError(f"segments are not contiguous at t={prev.t_end!r}")
        total = 0.0
        for seg in self.segments:
            total += seg.cost
        object.__setattr__(self, "_cost", total)

    @property
    def running_cost(self) -> float:
        return self._cost

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    @property
    def initial_measure(self) -> GridMeasure:
        return self.segments[0].start_measure

    @property
    def terminal_measure(self) -> GridMeasure:
        return self.segments[-1].end_measure

    def segment_costs(self) -> list[float]:
        return [seg.cost for seg in self.segments]

    def times(self) -> np.ndarray:
        parts = [_segment_times(self.segments[0])]
        parts += [_segment_times(seg)[1:] for seg in self.segments[1:]]
        return np.concatenate(parts)

    def measures(self) -> list[GridMeasure]:
        out = list(self.segments[0].measures())
        for seg in self.segments[1:]:
            out.extend(seg.measures()[1:])
        return out

    def controls(self) -> list[StepControl]:
        return [c for seg in self.segments for c in seg.controls()]

    def accumulated_cost(self) -> float:
        """Running cost summed step by step from the applied controls."""
        total = 0.0
        for step in self.controls():
            total += step.cost(self.cost_model)
        return total

    def concat(self, other: "ControlledTrajectory") -> "ControlledTrajectory":
        return ControlledTrajectory(self.segments + other.segments, self.cost_model, other.terminal_gap)
