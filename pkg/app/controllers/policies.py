"""Control policies: a rollout rule plus the preconditions it needs from the target."""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

from app.errors import ConfigError, HypothesisViolation, ValidationError
from app.model.torus import GridMeasure
from app.targets.processes import DiffusionTranslateTarget, TargetProcess
from app.targets.sampling import TargetPath
from app.value.deterministic import Horizon, PowerCost
from app.controllers.rollouts import (
    REPLANNING_MODES,
    geodesic_rollout,
    replanning_rollout,
    steer_rollout,
)
from app.controllers.trajectory import ControlledTrajectory, HoldSegment


class ControlPolicy(ABC):
    name: str = ""

    def validate(self, target: TargetProcess, cost: PowerCost) -> None:
        """Raise if the policy cannot be paired with *target* and *cost*."""

    def breakpoints(self, t0: float, horizon: Horizon) -> tuple[float, ...]:
        """Times the target's sampling grid must contain."""
        return ()

    @abstractmethod
    def rollout(self, mu: GridMeasure, path: TargetPath, t0: float, horizon: Horizon,
                cost: PowerCost) -> ControlledTrajectory:
        ...

    @abstractmethod
    def to_dict(self) -> dict:
        ...


@dataclass(frozen=True)
class DeterministicGeodesic(ControlPolicy):
    steps: int = 8

    name = "geodesic"

    def validate(self, target, cost):
        if target.kind == "diffusion_translate":
            raise ValidationError("the deterministic geodesic cannot follow a diffusing target")

    def rollout(self, mu, path, t0, horizon, cost):
        if path.jump_count or path.is_diffusion or path.initial is None:
            raise ValidationError("the deterministic geodesic needs a target that never moves")
        return geodesic_rollout(mu, path.initial, t0, horizon.T, self.steps, cost)

    def to_dict(self):
        return {"kind": self.name, "steps": self.steps}


@dataclass(frozen=True)
class Replanning(ControlPolicy):
    steps_per_segment: int = 8
    mode: str = "inter_jump"

    name = "replanning"

    def __post_init__(self):
        if self.mode not in REPLANNING_MODES:
            raise ValidationError(f"unknown replanning mode {self.mode!r}")

    def validate(self, target, cost):
        if target.kind == "diffusion_translate":
            raise ValidationError("replanning needs a jump-type target")

    def rollout(self, mu, path, t0, horizon, cost):
        return replanning_rollout(mu, path, t0, horizon, cost, self.steps_per_segment, self.mode)

    def to_dict(self):
        return {"kind": self.name, "steps_per_segment": self.steps_per_segment, "mode": self.mode}


@dataclass(frozen=True)
class TransportThenSteer(ControlPolicy):
    theta: float
    steps: int = 16

    name = "transport_then_steer"

    def __post_init__(self):
        if not self.theta > 1:
            raise ValidationError(f"theta must be > 1, got {self.theta!r}")

    def validate(self, target, cost):
        if not isinstance(target, DiffusionTranslateTarget):
            raise ValidationError("transport-then-steer needs a diffusion target")
        if not cost.is_quadratic:
            raise ValidationError("transport-then-steer needs the quadratic cost")
        gamma = target.sigma.decay_exponent
        if gamma is not None:
            if not 2 < self.theta < 1 + 2 * gamma:
                raise HypothesisViolation(
                    f"theta={self.theta!r} must lie in (2, {1 + 2 * gamma!r}) for sigma exponent {gamma!r}")

    def breakpoints(self, t0, horizon):
        rem = horizon.remaining(t0)
        delta = rem - rem ** self.theta
        return (t0 + delta,)

    def rollout(self, mu, path, t0, horizon, cost):
        return steer_rollout(mu, path, t0, horizon, cost, self.theta, self.steps)

    def to_dict(self):
        return {"kind": self.name, "theta": self.theta, "steps": self.steps}


@dataclass(frozen=True)
class Idle(ControlPolicy):
    """Zero control; admissible only when the state already is the terminal target."""

    name = "idle"

    def rollout(self, mu, path, t0, horizon, cost):
        if path.final_measure != mu:
            raise ValidationError("the idle policy does not reach the terminal target")
        return ControlledTrajectory((HoldSegment(mu, t0, horizon.T),), cost)

    def to_dict(self):
        return {"kind": self.name}


def policy_from_dict(data, field: str = "policy") -> ControlPolicy:
    if not isinstance(data, dict) or "kind" not in data:
        raise ConfigError("expected an object with a 'kind'", field)
    params = {k: v for k, v in data.items() if k != "kind"}
    kinds = {cls.name: cls for cls in (DeterministicGeodesic, Replanning, TransportThenSteer, Idle)}
    cls = kinds.get(data["kind"])
    if cls is None:
        raise ConfigError(f"unknown policy {data['kind']!r}; expected one of {sorted(kinds)}", f"{field}.kind")
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(str(exc), field) from exc
