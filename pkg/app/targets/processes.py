"""The four target-process models: constant, Bernoulli switch, Poisson jumps, diffusing translation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.errors import ValidationError
from app.model.torus import GridMeasure, TorusGrid, check_same_grid, snap_translate
from app.targets.operators import JumpOperator
from app.targets.rates import RateSpec
from app.value.deterministic import Horizon


@dataclass(frozen=True)
class ConstantTarget:
    nu: GridMeasure

    kind = "constant"

    @property
    def grid(self) -> TorusGrid:
        return self.nu.grid

    def reference_measure(self, horizon: Horizon) -> GridMeasure:
        return self.nu


@dataclass(frozen=True)
class BernoulliTarget:
    """Target revealed at ``switch_time``: ``nu1`` with probability ``p``, else ``nu2``.

    Before the reveal the target is ``nu_pre``; ``None`` leaves it unrevealed.
    ``switch_time`` defaults to half the horizon.
    """

    nu1: GridMeasure
    nu2: GridMeasure
    p: float
    nu_pre: GridMeasure | None = None
    switch_time: float | None = None

    kind = "bernoulli"

    def __post_init__(self):
        others = (self.nu2,) if self.nu_pre is None else (self.nu2, self.nu_pre)
        check_same_grid(self.nu1, *others)
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"p must lie in [0, 1], got {self.p!r}")

    @property
    def grid(self) -> TorusGrid:
        return self.nu1.grid

    def reveal_time(self, horizon: Horizon) -> float:
        s = horizon.T / 2 if self.switch_time is None else float(self.switch_time)
        if not 0 < s < horizon.T:
            raise ValidationError(f"switch time {s!r} must lie strictly inside (0, T)")
        return s

    def mixture(self) -> GridMeasure:
        return GridMeasure.from_mass(self.grid, self.p * self.nu1.weights + (1 - self.p) * self.nu2.weights)

    def reference_measure(self, horizon: Horizon) -> GridMeasure:
        return self.nu_pre if self.nu_pre is not None else self.mixture()


@dataclass(frozen=True)
class PoissonJumpTarget:
    """``nu0`` pushed by ``operator`` at the jump times of a Poisson process of rate ``intensity``."""

    nu0: GridMeasure
    intensity: RateSpec
    operator: JumpOperator
    lambda_max: float | None = None

    kind = "poisson_jump"

    def __post_init__(self):
        if self.lambda_max is not None and not self.lambda_max >= 0:
            raise ValidationError(f"lambda_max must be nonnegative, got {self.lambda_max!r}")

    @property
    def grid(self) -> TorusGrid:
        return self.nu0.grid

    def dominating_rate(self, t0: float, horizon: Horizon) -> float:
        if self.lambda_max is not None:
            return float(self.lambda_max)
        bound = self.intensity.bound(t0, horizon.T)
        if not np.isfinite(bound):
            raise ValidationError("intensity is unbounded on [t0, T]; set lambda_max")
        return float(bound)

    def reference_measure(self, horizon: Horizon) -> GridMeasure:
        return self.nu0


@dataclass(frozen=True)
class DiffusionTranslateTarget:
    """``nu0`` translated by a torus-valued Brownian path ``dW = sigma(t) dB`` started at ``w0``."""

    nu0: GridMeasure
    sigma: RateSpec
    w0: tuple[float, ...] | None = None

    kind = "diffusion_translate"

    def __post_init__(self):
        w0 = (0.0,) * self.nu0.grid.dim if self.w0 is None else tuple(float(c) for c in self.w0)
        if len(w0) != self.nu0.grid.dim:
            raise ValidationError(f"w0 has {len(w0)} components on a {self.nu0.grid.dim}-D grid")
        object.__setattr__(self, "w0", w0)

    @property
    def grid(self) -> TorusGrid:
        return self.nu0.grid

    def reference_measure(self, horizon: Horizon) -> GridMeasure:
        return snap_translate(self.nu0, self.w0)


TargetProcess = ConstantTarget | BernoulliTarget | PoissonJumpTarget | DiffusionTranslateTarget
