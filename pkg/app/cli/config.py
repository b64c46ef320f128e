"""Run configuration: one JSON document per experiment, plus parsers for its parts."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from app.errors import ConfigError, ValidationError
from app.model.serializer import Serializer
from app.model.torus import GridMeasure, TorusGrid, atoms, dirac, uniform
from app.targets.operators import operator_from_dict
from app.targets.processes import (
    BernoulliTarget,
    ConstantTarget,
    DiffusionTranslateTarget,
    PoissonJumpTarget,
)
from app.targets.rates import rate_from_dict
from app.value.deterministic import Horizon, PowerCost

SEED_LIMIT = 1 << 64


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    parameters: dict = field(default_factory=dict)
    grid: dict | None = None
    seed: int = 0
    output_path: str = ""
    store: bool = False

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("the configuration must be a JSON object")
        unknown = set(data) - {"experiment", "parameters", "grid", "seed", "output_path", "store"}
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", sorted(unknown)[0])
        if "experiment" not in data:
            raise ConfigError("missing required key", "experiment")
        params = data.get("parameters", {})
        if not isinstance(params, dict):
            raise ConfigError("must be an object", "parameters")
        grid = data.get("grid")
        if grid is not None and not isinstance(grid, dict):
            raise ConfigError("must be an object with 'dim' and 'n'", "grid")
        return cls(
            experiment=str(data["experiment"]),
            parameters=copy.deepcopy(params),
            grid=copy.deepcopy(grid),
            seed=parse_seed(data.get("seed", 0)),
            output_path=str(data.get("output_path", "")),
            store=bool(data.get("store", False)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(Serializer.load(str(path)))

    def to_dict(self) -> dict:
        data = {"experiment": self.experiment, "seed": self.seed, "parameters": copy.deepcopy(self.parameters)}
        if self.grid is not None:
            data["grid"] = copy.deepcopy(self.grid)
        if self.output_path:
            data["output_path"] = self.output_path
        if self.store:
            data["store"] = True
        return data

    def sha256(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    # ------------------------------------------------------------------
    # Typed access to parameters
    # ------------------------------------------------------------------

    def require(self, name: str):
        if name not in self.parameters:
            raise ConfigError("missing required parameter", f"parameters.{name}")
        return self.parameters[name]

    def number(self, name: str, default=None, integer: bool = False):
        value = self.parameters.get(name, default) if default is not None else self.require(name)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", f"parameters.{name}")
        if isinstance(value, float) and not math.isfinite(value):
            raise ConfigError(f"expected a finite number, got {value!r}", f"parameters.{name}")
        if integer:
            if int(value) != value:
                raise ConfigError(f"expected an integer, got {value!r}", f"parameters.{name}")
            return int(value)
        return float(value)

    def optional_number(self, name: str, integer: bool = False):
        """Like :meth:`number`, but an absent or null entry gives ``None``."""
        if self.parameters.get(name) is None:
            return None
        return self.number(name, integer=integer)

    def number_list(self, name: str, default=None) -> list[float]:
        value = self.parameters.get(name, default) if default is not None else self.require(name)
        if not isinstance(value, list) or not value:
            raise ConfigError(f"expected a non-empty list of numbers, got {value!r}", f"parameters.{name}")
        for i, x in enumerate(value):
            if isinstance(x, bool) or not isinstance(x, (int, float)) \
                    or isinstance(x, float) and not math.isfinite(x):
                raise ConfigError(f"expected a number, got {x!r}", f"parameters.{name}[{i}]")
        return [float(x) for x in value]

    def torus(self) -> TorusGrid:
        if self.grid is None:
            raise ConfigError("this experiment needs a grid", "grid")
        try:
            return TorusGrid(int(self.grid["dim"]), int(self.grid["n"]))
        except KeyError as exc:
            raise ConfigError(f"missing key {exc.args[0]!r}", "grid") from exc
        except (TypeError, ValidationError) as exc:
            raise ConfigError(str(exc), "grid") from exc

    def measure(self, name: str, default=None) -> GridMeasure:
        spec = self.parameters.get(name, default) if default is not None else self.require(name)
        return parse_measure(spec, self.torus(), f"parameters.{name}")

    def cost(self) -> PowerCost:
        spec = self.parameters.get("cost", {})
        try:
            return PowerCost(float(spec.get("exponent", 2.0)), float(spec.get("scale", 0.5)))
        except (AttributeError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "parameters.cost") from exc

    def horizon(self) -> Horizon:
        try:
            return Horizon(self.number("T", 1.0))
        except ValidationError as exc:
            raise ConfigError(str(exc), "parameters.T") from exc


def parse_seed(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < SEED_LIMIT:
        raise ConfigError(f"expected an unsigned 64-bit integer, got {value!r}", "seed")
    return value


def parse_measure(spec, grid: TorusGrid, field: str = "measure") -> GridMeasure:
    """Inline weights or a preset: ``{"dirac": i}``, ``"uniform"``, ``{"two_atoms": [i, j]}``,
    ``{"atoms": [...]}``, ``{"weights": [...]}``."""
    try:
        if isinstance(spec, list):
            return GridMeasure(grid, spec)
        if spec == "uniform":
            return uniform(grid)
        if isinstance(spec, dict) and len(spec) == 1:
            key, value = next(iter(spec.items()))
            if key == "dirac":
                return dirac(grid, int(value))
            if key == "uniform" and value:
                return uniform(grid)
            if key == "two_atoms":
                if len(value) != 2:
                    raise ConfigError("two_atoms takes exactly two sites", field)
                return atoms(grid, value)
            if key == "atoms":
                return atoms(grid, value)
            if key == "weights":
                return GridMeasure(grid, value)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field) from exc
    raise ConfigError(f"unrecognized measure {spec!r}", field)


def parse_target(spec, grid: TorusGrid, field: str = "parameters.target"):
    """Build a target process from ``{"kind": ..., ...}``."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("expected an object with a 'kind'", field)
    kind = spec["kind"]

    def m(key, default=None):
        if key not in spec:
            if default is not None or key == "nu_pre":
                return default
            raise ConfigError("missing required key", f"{field}.{key}")
        return parse_measure(spec[key], grid, f"{field}.{key}")

    try:
        if kind == "constant":
            return ConstantTarget(m("nu"))
        if kind == "bernoulli":
            return BernoulliTarget(m("nu1"), m("nu2"), float(spec["p"]), m("nu_pre"),
                                   _optional_float(spec, "switch_time", field))
        if kind == "poisson_jump":
            return PoissonJumpTarget(m("nu0"), rate_from_dict(spec.get("intensity"), f"{field}.intensity"),
                                     operator_from_dict(spec.get("operator"), f"{field}.operator"),
                                     _optional_float(spec, "lambda_max", field))
        if kind == "diffusion_translate":
            return DiffusionTranslateTarget(m("nu0"), rate_from_dict(spec.get("sigma"), f"{field}.sigma"),
                                            spec.get("w0"))
    except KeyError as exc:
        raise ConfigError("missing required key", f"{field}.{exc.args[0]}") from exc
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field) from exc
    raise ConfigError(f"unknown target kind {kind!r}", f"{field}.kind")


def _optional_float(spec: dict, key: str, field: str) -> float | None:
    value = spec.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", f"{field}.{key}")
    return float(value)
