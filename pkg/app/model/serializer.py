"""JSON save/load for measures, plans and Monte Carlo reports."""
import json

import numpy as np

from app.errors import ConfigError
from app.model.torus import GridMeasure, TorusGrid


class Serializer:
    @staticmethod
    def measure_to_dict(m: GridMeasure) -> dict:
        return {
            "dim": m.grid.dim,
            "n": m.grid.n,
            "weights": [float(w) for w in m.weights],
        }

    @staticmethod
    def measure_from_dict(data: dict, field: str = "measure") -> GridMeasure:
        try:
            grid = TorusGrid(int(data["dim"]), int(data["n"]))
            return GridMeasure(grid, data["weights"])
        except KeyError as exc:
            raise ConfigError(f"missing key {exc.args[0]!r}", field) from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), field) from exc

    @staticmethod
    def plan_to_dict(plan, include_coupling: bool = False) -> dict:
        data = {
            "cost_exponent": plan.cost_exponent,
            "total_cost": plan.total_cost,
            "exact": plan.exact,
            "source": Serializer.measure_to_dict(plan.source),
            "target": Serializer.measure_to_dict(plan.target),
            "dual_potential_source": [float(v) for v in plan.dual_potential_source],
            "dual_potential_target": [float(v) for v in plan.dual_potential_target],
        }
        if include_coupling:
            data["coupling"] = np.asarray(plan.coupling).tolist()
        return data

    @staticmethod
    def dumps(data) -> str:
        return json.dumps(data, indent=2) + "\n"

    @staticmethod
    def load(path: str) -> dict:
        with open(path, "r") as f:
            text = f.read()
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, line=exc.lineno, column=exc.colno) from exc
