"""Jump operators: maps applied to the target measure at each jump."""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from app.errors import ConfigError, ValidationError
from app.model.torus import GridMeasure, TorusGrid, pushforward_translate


class JumpOperator(ABC):
    @abstractmethod
    def apply(self, m: GridMeasure) -> GridMeasure:
        ...

    @abstractmethod
    def to_dict(self) -> dict:
        ...

    def iterate(self, m: GridMeasure, times: int) -> list[GridMeasure]:
        """``[T m, T^2 m, ..., T^times m]``."""
        out = []
        for _ in range(times):
            m = self.apply(m)
            out.append(m)
        return out


@dataclass(frozen=True)
class TranslationOperator(JumpOperator):
    """Grid-aligned translation by ``steps[a] / n`` along each axis."""

    steps: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(int(s) for s in self.steps))

    def shift(self, grid: TorusGrid) -> np.ndarray:
        if len(self.steps) != grid.dim:
            raise ValidationError(f"translation has {len(self.steps)} axes, grid has {grid.dim}")
        return np.array(self.steps, dtype=np.float64) / grid.n

    def apply(self, m: GridMeasure) -> GridMeasure:
        return pushforward_translate(m, self.shift(m.grid))

    def to_dict(self) -> dict:
        return {"translate": list(self.steps)}


@dataclass(frozen=True)
class PermutationOperator(JumpOperator):
    """Pushforward by a site permutation: mass at site ``i`` moves to ``perm[i]``."""

    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValidationError("perm must be a permutation of 0..N-1")
        object.__setattr__(self, "perm", perm)

    def apply(self, m: GridMeasure) -> GridMeasure:
        if len(self.perm) != m.grid.size:
            raise ValidationError(f"permutation of {len(self.perm)} sites on a {m.grid.size}-site grid")
        w = np.empty(m.grid.size)
        w[list(self.perm)] = m.weights
        return GridMeasure(m.grid, w)

    def to_dict(self) -> dict:
        return {"permute": list(self.perm)}


def operator_from_dict(data, field: str = "operator") -> JumpOperator:
    if not isinstance(data, dict) or len(data) != 1:
        raise ConfigError("expected {'translate': [...]} or {'permute': [...]}", field)
    try:
        if "translate" in data:
            steps = data["translate"]
            return TranslationOperator(tuple(steps) if isinstance(steps, list) else (steps,))
        if "permute" in data:
            return PermutationOperator(tuple(data["permute"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field) from exc
    raise ConfigError(f"unknown operator {next(iter(data))!r}", field)
