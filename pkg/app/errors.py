"""Exception hierarchy shared by every sotlab module."""
from __future__ import annotations


class SotlabError(Exception):
    """Base class for all errors raised by the laboratory."""


class ValidationError(SotlabError, ValueError):
    """An input violates a documented precondition."""


class SingularTimeError(ValidationError):
    """A time at or beyond the horizon was passed where ``t < T`` is required."""

    def __init__(self, t: float, horizon: float):
        super().__init__(f"time t={t!r} is not before the horizon T={horizon!r}")
        self.t = t
        self.horizon = horizon


class ConfigError(ValidationError):
    """Malformed run configuration.

    ``field`` is the dotted path of the offending entry; ``line`` and
    ``column`` are set when the JSON decoder located the problem.
    """

    def __init__(self, message: str, field: str = "", line: int | None = None,
                 column: int | None = None):
        location = ""
        if line is not None:
            location = f" (line {line}, column {column})"
        prefix = f"{field}: " if field else ""
        super().__init__(f"{prefix}{message}{location}")
        self.field = field
        self.line = line
        self.column = column


class HypothesisViolation(ValidationError):
    """A mathematical hypothesis required by an experiment does not hold."""


class SolverError(SotlabError, RuntimeError):
    """An optimal transport solver failed to reach optimality."""

    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} after {iterations} iterations")
        self.iterations = iterations


class ConvergenceError(SolverError):
    """Sinkhorn stopped at ``max_iters`` with the marginals still violated."""

    def __init__(self, violation: float, iterations: int):
        super().__init__(f"marginal violation {violation:.3e} above tolerance", iterations)
        self.violation = violation


class RolloutError(SotlabError, RuntimeError):
    """A Monte Carlo path failed; carries what is needed to replay it."""

    def __init__(self, path_index: int, seed: int, cause: BaseException):
        super().__init__(f"path {path_index} (seed {seed}) failed: {cause}")
        self.path_index = path_index
        self.seed = seed
