"""Time-dependent rates used for jump intensities and diffusion volatilities.

Both shapes are written against the time left before the horizon, ``T - t``.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from app.errors import ConfigError, ValidationError


class RateSpec(ABC):
    @abstractmethod
    def value(self, t, T: float):
        """Rate at time(s) *t*; accepts scalars or arrays."""

    @abstractmethod
    def integral(self, t0: float, T: float) -> float:
        """Closed-form integral over ``[t0, T]``."""

    @abstractmethod
    def bound(self, t0: float, T: float) -> float:
        """Supremum over ``[t0, T]`` (may be ``inf``)."""

    @abstractmethod
    def square_over_remaining(self, t0: float, T: float) -> float:
        """Closed form of ``int_t0^T rate(s)^2 / (T - s) ds`` (may be ``inf``)."""

    @property
    @abstractmethod
    def decay_exponent(self) -> float | None:
        """Exponent g with rate ~ (T - t)^g near the horizon; ``None`` for the zero rate."""

    @abstractmethod
    def to_dict(self) -> dict:
        ...


@dataclass(frozen=True)
class ConstantRate(RateSpec):
    level: float

    def __post_init__(self):
        if not np.isfinite(self.level) or self.level < 0:
            raise ValidationError(f"rate must be finite and nonnegative, got {self.level!r}")

    def value(self, t, T: float):
        return np.full_like(np.asarray(t, dtype=np.float64), self.level) if np.ndim(t) else float(self.level)

    def integral(self, t0: float, T: float) -> float:
        return self.level * (T - t0)

    def bound(self, t0: float, T: float) -> float:
        return float(self.level)

    def square_over_remaining(self, t0: float, T: float) -> float:
        return 0.0 if self.level == 0 else float("inf")

    @property
    def decay_exponent(self) -> float | None:
        return None if self.level == 0 else 0.0

    def to_dict(self) -> dict:
        return {"constant": self.level}


@dataclass(frozen=True)
class PowerRate(RateSpec):
    """``K * (T - t)^gamma``."""

    K: float
    gamma: float

    def __post_init__(self):
        if not np.isfinite(self.K) or self.K < 0:
            raise ValidationError(f"K must be finite and nonnegative, got {self.K!r}")
        if not self.gamma > -1:
            raise ValidationError(f"gamma must be > -1 for an integrable rate, got {self.gamma!r}")

    def value(self, t, T: float):
        rem = np.maximum(T - np.asarray(t, dtype=np.float64), 0.0)
        out = self.K * rem ** self.gamma
        return out if np.ndim(t) else float(out)

    def integral(self, t0: float, T: float) -> float:
        return self.K * (T - t0) ** (self.gamma + 1) / (self.gamma + 1)

    def bound(self, t0: float, T: float) -> float:
        if self.gamma >= 0:
            return self.K * (T - t0) ** self.gamma
        return float("inf") if self.K > 0 else 0.0

    def square_over_remaining(self, t0: float, T: float) -> float:
        if self.K == 0:
            return 0.0
        if self.gamma <= 0:
            return float("inf")
        return self.K ** 2 * (T - t0) ** (2 * self.gamma) / (2 * self.gamma)

    @property
    def decay_exponent(self) -> float | None:
        return None if self.K == 0 else self.gamma

    def to_dict(self) -> dict:
        return {"power": {"K": self.K, "gamma": self.gamma}}


def rate_from_dict(data, field: str = "rate") -> RateSpec:
    """Parse ``{"constant": v}`` or ``{"power": {"K": k, "gamma": g}}``."""
    if isinstance(data, (int, float)) and not isinstance(data, bool):
        data = {"constant": data}
    if not isinstance(data, dict) or len(data) != 1:
        raise ConfigError("expected {'constant': v} or {'power': {'K': k, 'gamma': g}}", field)
    try:
        if "constant" in data:
            return ConstantRate(float(data["constant"]))
        if "power" in data:
            p = data["power"]
            return PowerRate(float(p["K"]), float(p["gamma"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field) from exc
    raise ConfigError(f"unknown rate shape {next(iter(data))!r}", field)
