from typing import Optional


class HiringSimError(Exception):
    """Base class for all errors raised by the hiring simulator."""

    exit_code = 2


class DomainError(HiringSimError, ValueError):
    """An argument lies outside the domain of the operation."""


class ZeroMassError(DomainError):
    """A conditional expectation was requested over an interval of zero probability."""


class MalformedInputError(DomainError):
    """Structurally invalid input, e.g. duplicate slopes in a line set."""


class TableMismatchError(DomainError):
    """A DP table was built for a different horizon than the one it is used with."""


class DivergenceError(HiringSimError, ArithmeticError):
    """Numerical quadrature did not converge."""


class StepLimitError(HiringSimError, RuntimeError):
    """A Markov chain simulation did not reach absorption within the step limit."""


class ResourceLimitError(HiringSimError, MemoryError):
    """The configured memory ceiling would be exceeded."""

    exit_code = 4


class CoverageViolation(HiringSimError, RuntimeError):
    """
    A step of the horizon was left without an active contract.

    This always means the policy is wrong; it is never swallowed.
    """

    exit_code = 3

    def __init__(
        self,
        step: int,
        message: str = "",
        seed: Optional[int] = None,
        stream: Optional[int] = None,
    ):
        self.step = step
        self.seed = seed
        self.stream = stream
        self.detail = message or f"step {step} is not covered"
        super().__init__(self._describe())

    def _describe(self) -> str:
        where = ""
        if self.seed is not None:
            where = f" (seed={self.seed}, stream={self.stream})"
        return f"{self.detail}{where}"

    def with_origin(self, seed: int, stream: int) -> "CoverageViolation":
        """Return a copy tagged with the replication that produced it."""
        return CoverageViolation(self.step, self.detail, seed=seed, stream=stream)
