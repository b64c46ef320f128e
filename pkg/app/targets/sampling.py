"""Sampling of target paths: Poisson thinning, Euler-Maruyama offsets, refined time grids."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, stats

from app.errors import HypothesisViolation, ValidationError
from app.model.torus import GridMeasure, snap_translate
from app.targets.processes import (
    BernoulliTarget,
    ConstantTarget,
    DiffusionTranslateTarget,
    PoissonJumpTarget,
    TargetProcess,
)
from app.targets.rates import RateSpec
from app.value.deterministic import Horizon

logger = logging.getLogger(__name__)

_RATE_SLACK = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by *seed* (up to 128 bits)."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


# ---------------------------------------------------------------------------
# Time grid
# ---------------------------------------------------------------------------

def time_grid(t0: float, T: float, dt: float, dt_min: float | None = None,
              refine_ratio: float = 1.0, breakpoints: tuple[float, ...] = ()) -> np.ndarray:
    """Time grid from *t0* to *T*, refined geometrically near *T*.

    The step is ``dt * refine_ratio**level`` where ``level`` counts how many
    times the remaining time has halved since *t0*; it never drops below
    *dt_min*. The last interior point is ``T - dt_min``. *breakpoints* inside
    ``(t0, T)`` are inserted as extra nodes.
    """
    if not t0 < T:
        raise ValidationError(f"t0={t0!r} must be before T={T!r}")
    if not 0 < dt < T - t0:
        raise ValidationError(f"dt={dt!r} must lie in (0, T - t0)")
    if dt_min is None:
        dt_min = 1e-6 * T
    if not 0 < dt_min <= dt:
        raise ValidationError(f"dt_min={dt_min!r} must lie in (0, dt]")
    if not 0 < refine_ratio <= 1:
        raise ValidationError(f"refine_ratio={refine_ratio!r} must lie in (0, 1]")
    return _time_grid(float(t0), float(T), float(dt), float(dt_min), float(refine_ratio),
                      tuple(sorted(float(b) for b in breakpoints)))


@lru_cache(maxsize=64)
def _time_grid(t0, T, dt, dt_min, ratio, breakpoints):
    span = T - t0
    last = T - dt_min
    times = [t0]
    t = t0
    while t < last:
        level = math.floor(math.log2(span / (T - t))) if ratio < 1 else 0
        step = max(dt_min, dt * ratio ** level)
        t = t + step
        if t > last - 0.5 * dt_min:
            t = last
        times.append(t)
    times.append(T)
    grid = np.array(times)
    inner = [b for b in breakpoints if t0 < b < T and not np.any(np.isclose(grid, b, rtol=0, atol=1e-15))]
    if inner:
        grid = np.sort(np.concatenate([grid, inner]))
    grid.setflags(write=False)
    return grid


def brownian_increments(sigma: RateSpec, times: np.ndarray, T: float, rng: np.random.Generator,
                        dim: int) -> np.ndarray:
    """Euler-Maruyama increments ``sigma(t_i) * sqrt(dt_i) * Z_i``, shape (len(times) - 1, dim)."""
    dt = np.diff(times)
    scale = np.asarray(sigma.value(times[:-1], T)) * np.sqrt(dt)
    return scale[:, None] * rng.standard_normal((len(dt), dim))


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TargetPath:
    """One realization of a target process on ``[t0, T]``.

    Jump variants are piecewise constant: ``initial`` until the first event,
    then ``event_measures[i]`` from ``event_times[i]`` on. Diffusion paths carry
    the offset ``W`` at every node of ``grid_times`` and snap ``base`` by it.
    ``initial`` is ``None`` while a Bernoulli target is still unrevealed.
    """

    kind: str
    t0: float
    T: float
    initial: GridMeasure | None
    event_times: tuple[float, ...] = ()
    event_measures: tuple[GridMeasure, ...] = ()
    grid_times: np.ndarray | None = None
    offsets: np.ndarray | None = None
    base: GridMeasure | None = None

    @property
    def jump_count(self) -> int:
        return len(self.event_times)

    @property
    def is_diffusion(self) -> bool:
        return self.grid_times is not None

    def offset_at(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.grid_times, t, side="right")) - 1
        return self.offsets[max(idx, 0)]

    def measure_at(self, t: float) -> GridMeasure | None:
        """Observed target at time *t* (right-continuous)."""
        if not self.t0 <= t <= self.T:
            raise ValidationError(f"time {t!r} outside [{self.t0}, {self.T}]")
        if self.is_diffusion:
            return snap_translate(self.base, self.offset_at(t))
        idx = int(np.searchsorted(np.asarray(self.event_times), t, side="right"))
        return self.initial if idx == 0 else self.event_measures[idx - 1]

    @property
    def final_measure(self) -> GridMeasure | None:
        return self.measure_at(self.T)


def sample_path(tp: TargetProcess, t0: float, horizon: Horizon, dt: float, rng_seed: int,
                dt_min: float | None = None, refine_ratio: float = 1.0,
                breakpoints: tuple[float, ...] = ()) -> TargetPath:
    """Draw one target path on ``[t0, T]``; bit-identical for a fixed seed."""
    T = horizon.T
    horizon.remaining(t0)
    if not 0 < dt < T - t0:
        raise ValidationError(f"dt={dt!r} must lie in (0, T - t0)")
    rng = make_rng(rng_seed)

    if isinstance(tp, ConstantTarget):
        return TargetPath(tp.kind, t0, T, tp.nu)

    if isinstance(tp, BernoulliTarget):
        s = tp.reveal_time(horizon)
        drawn = tp.nu1 if rng.random() < tp.p else tp.nu2
        if s <= t0:
            return TargetPath(tp.kind, t0, T, drawn)
        return TargetPath(tp.kind, t0, T, tp.nu_pre, (s,), (drawn,))

    if isinstance(tp, PoissonJumpTarget):
        times = _thinning(tp, t0, horizon, rng)
        return TargetPath(tp.kind, t0, T, tp.nu0, tuple(times),
                          tuple(tp.operator.iterate(tp.nu0, len(times))))

    if isinstance(tp, DiffusionTranslateTarget):
        grid_t = time_grid(t0, T, dt, dt_min, refine_ratio, breakpoints)
        inc = brownian_increments(tp.sigma, grid_t, T, rng, tp.grid.dim)
        offsets = np.vstack([np.asarray(tp.w0)[None, :], np.asarray(tp.w0) + np.cumsum(inc, axis=0)])
        offsets.setflags(write=False)
        return TargetPath(tp.kind, t0, T, snap_translate(tp.nu0, tp.w0),
                          grid_times=grid_t, offsets=offsets, base=tp.nu0)

    raise ValidationError(f"unknown target process {type(tp).__name__}")


def _thinning(tp: PoissonJumpTarget, t0: float, horizon: Horizon, rng: np.random.Generator) -> list[float]:
    T = horizon.T
    lam_max = tp.dominating_rate(t0, horizon)
    times: list[float] = []
    if lam_max == 0.0:
        if tp.intensity.bound(t0, T) > 0:
            raise HypothesisViolation("intensity exceeds lambda_max = 0")
        return times
    t = t0
    while True:
        t += rng.exponential(1.0 / lam_max)
        if t >= T:
            break
        lam = float(tp.intensity.value(t, T))
        if lam > lam_max * (1 + _RATE_SLACK):
            raise HypothesisViolation(f"intensity {lam!r} at t={t!r} exceeds lambda_max={lam_max!r}")
        if rng.random() * lam_max < lam:
            times.append(t)
    return times


# ---------------------------------------------------------------------------
# Jump-count law
# ---------------------------------------------------------------------------

def expected_jump_count(tp: PoissonJumpTarget, t0: float, horizon: Horizon) -> float:
    """``int_t0^T lambda(s) ds`` by adaptive quadrature."""
    T = horizon.T
    horizon.remaining(t0)
    value, err = integrate.quad(lambda s: float(tp.intensity.value(s, T)), t0, T,
                                epsabs=0.0, epsrel=1e-10, limit=200)
    logger.debug("expected_jump_count: %.12g (+/- %.1e)", value, err)
    return float(value)


@dataclass(frozen=True)
class JumpCountLaw:
    mean: float
    probabilities: np.ndarray
    tail: float


def jump_count_law(tp: PoissonJumpTarget, t0: float, horizon: Horizon, k_max: int) -> JumpCountLaw:
    """``P(n = k)`` for ``k <= k_max`` and the mass beyond."""
    if k_max < 0:
        raise ValidationError(f"k_max must be >= 0, got {k_max!r}")
    lam = expected_jump_count(tp, t0, horizon)
    ks = np.arange(k_max + 1)
    if lam == 0.0:
        probs = (ks == 0).astype(np.float64)
        return JumpCountLaw(0.0, probs, 0.0)
    return JumpCountLaw(lam, stats.poisson.pmf(ks, lam), float(stats.poisson.sf(k_max, lam)))
