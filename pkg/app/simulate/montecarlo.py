"""Monte Carlo estimate of the stochastic value under an explicit policy."""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from app.errors import RolloutError, ValidationError
from app.model.torus import GridMeasure, check_same_grid
from app.controllers.policies import ControlPolicy
from app.simulate.seeding import mean_and_stderr, path_key
from app.targets.processes import TargetProcess
from app.targets.sampling import sample_path
from app.value.deterministic import Horizon, PowerCost

logger = logging.getLogger(__name__)

THREADS_ENV = "SOTLAB_THREADS"
CHUNK = 256


def resolve_threads(threads: int | None = None) -> int:
    """``threads`` if given, else ``$SOTLAB_THREADS``, else the CPU count."""
    if threads is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        if env:
            try:
                threads = int(env)
            except ValueError as exc:
                raise ValidationError(f"{THREADS_ENV}={env!r} is not an integer") from exc
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ValidationError(f"thread count must be >= 1, got {threads!r}")
    return threads


@dataclass(frozen=True)
class SimConfig:
    mu: GridMeasure
    target: TargetProcess
    policy: ControlPolicy
    t0: float
    horizon: Horizon
    cost: PowerCost = field(default_factory=PowerCost)
    n_paths: int = 1000
    base_seed: int = 0
    dt_coarse: float = 0.01
    dt_min: float | None = None
    refine_ratio: float = 0.5
    keep_paths: bool = False

    def __post_init__(self):
        T = self.horizon.T
        if self.dt_min is None:
            object.__setattr__(self, "dt_min", 1e-6 * T)
        if self.n_paths < 1:
            raise ValidationError(f"n_paths must be >= 1, got {self.n_paths!r}")
        if not 0 < self.dt_min <= self.dt_coarse < T - self.t0:
            raise ValidationError(
                f"need 0 < dt_min <= dt_coarse < T - t0, got {self.dt_min!r}, {self.dt_coarse!r}, {T - self.t0!r}")
        if not 0 < self.refine_ratio <= 1:
            raise ValidationError(f"refine_ratio must lie in (0, 1], got {self.refine_ratio!r}")
        check_same_grid(self.mu, self.target.reference_measure(self.horizon))
        self.policy.validate(self.target, self.cost)


@dataclass(frozen=True)
class SimReport:
    mean_cost: float
    std_error: float
    n_paths: int
    per_path_costs: tuple[float, ...] | None = None
    terminal_snap_gap: float = 0.0
    jump_count_histogram: tuple[int, ...] = ()
    runtime_seconds: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        """Reproducible fields only; the wall-clock runtime is left out."""
        out = {
            "mean_cost": self.mean_cost,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "terminal_snap_gap": self.terminal_snap_gap,
            "jump_count_histogram": list(self.jump_count_histogram),
        }
        if self.per_path_costs is not None:
            out["per_path_costs"] = list(self.per_path_costs)
        return out


def _run_chunk(cfg: SimConfig, breakpoints: tuple[float, ...], start: int, stop: int):
    costs = np.empty(stop - start)
    jumps = np.empty(stop - start, dtype=np.int64)
    gaps = np.empty(stop - start)
    for j, i in enumerate(range(start, stop)):
        key = path_key(cfg.base_seed, i)
        try:
            path = sample_path(cfg.target, cfg.t0, cfg.horizon, cfg.dt_coarse, key,
                               cfg.dt_min, cfg.refine_ratio, breakpoints)
            traj = cfg.policy.rollout(cfg.mu, path, cfg.t0, cfg.horizon, cfg.cost)
        except Exception as exc:
            raise RolloutError(i, key, exc) from exc
        costs[j] = traj.running_cost
        jumps[j] = path.jump_count
        gaps[j] = traj.terminal_gap
    return costs, jumps, gaps


def estimate_value(cfg: SimConfig, threads: int | None = None) -> SimReport:
    """Mean policy cost over ``cfg.n_paths`` sampled target paths.

    Path ``i`` draws from the stream keyed by ``(cfg.base_seed, i)`` and the
    reduction is a fixed pairwise tree, so the report does not depend on the
    number of worker threads.
    """
    threads = resolve_threads(threads)
    n = cfg.n_paths
    breakpoints = cfg.policy.breakpoints(cfg.t0, cfg.horizon)
    chunks = [(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]
    started = time.perf_counter()
    if threads == 1 or len(chunks) == 1:
        results = [_run_chunk(cfg, breakpoints, s, e) for s, e in chunks]
    else:
        with ThreadPoolExecutor(max_workers=min(threads, len(chunks))) as pool:
            futures = [pool.submit(_run_chunk, cfg, breakpoints, s, e) for s, e in chunks]
            results = [f.result() for f in futures]
    costs = np.concatenate([r[0] for r in results])
    jumps = np.concatenate([r[1] for r in results])
    gaps = np.concatenate([r[2] for r in results])
    runtime = time.perf_counter() - started

    mean, std_error = mean_and_stderr(costs)
    logger.info("estimate_value: %d paths on %d thread(s) in %.2fs, mean=%.6g se=%.3g",
                n, threads, runtime, mean, std_error)
    return SimReport(
        mean_cost=mean,
        std_error=std_error,
        n_paths=n,
        per_path_costs=tuple(float(c) for c in costs) if cfg.keep_paths else None,
        terminal_snap_gap=float(gaps.max()),
        jump_count_histogram=tuple(int(c) for c in np.bincount(jumps)),
        runtime_seconds=runtime,
    )
