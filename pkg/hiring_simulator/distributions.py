"""
Cost distributions and random streams.

Every law is continuous with support in the nonnegative reals. Concrete
classes provide closed forms; the base class carries the generic numerical
paths (bisection for quantiles, adaptive quadrature for integrals), which the
concrete classes fall back on and which the tests use as cross-checks.
"""

import logging
import math
from abc import ABC, abstractmethod
from typing import Any, Sequence, Union

import numpy as np
from scipy import integrate, optimize

from hiring_simulator.errors import DivergenceError, DomainError, ZeroMassError
from hiring_simulator.models import (
    DistributionSpec,
    EmpiricalSpec,
    ExponentialSpec,
    ParetoSpec,
    Uniform01Spec,
)

logger = logging.getLogger("hiring.distributions")

ArrayLike = Union[float, np.ndarray]

DEFAULT_INVERSION_TOLERANCE = 1e-12
QUADRATURE_RELATIVE_TOLERANCE = 1e-9
TAIL_EPSILON = 1e-12
ZERO_MASS_TOLERANCE = 1e-15


def _as_output(values: np.ndarray, like: Any) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(values)
    return values


class RngStream:
    """
    Single-owner random stream for one replication.

    The generator is a counter-based Philox keyed by the pair
    (seed, stream index), so the same pair replays the same sequence and
    distinct indices give independent sequences.
    """

    def __init__(self, seed: int, stream: int = 0):
        if not 0 <= seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if not 0 <= stream < 2**64:
            raise DomainError(f"stream index must be a 64-bit unsigned integer, got {stream}")
        self.seed = seed
        self.stream = stream
        sequence = np.random.SeedSequence(entropy=seed, spawn_key=(stream,))
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def uniform(self) -> float:
        return float(self.generator.random())

    def uniforms(self, size: int) -> np.ndarray:
        return self.generator.random(size)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"


class Distribution(ABC):
    """Continuous nonnegative cost law X with CDF F and quantiles δ_q."""

    kind: str = "abstract"

    def __init__(self, inversion_tolerance: float = DEFAULT_INVERSION_TOLERANCE):
        self.inversion_tolerance = inversion_tolerance

    # -- required closed forms ---------------------------------------------

    @abstractmethod
    def cdf(self, x: ArrayLike) -> ArrayLike:
        """F(x); zero for x < 0. Accepts scalars or arrays."""

    @abstractmethod
    def pdf(self, x: float) -> float:
        """Density f(x)."""

    @abstractmethod
    def mean(self) -> float:
        """E[x]."""

    @property
    @abstractmethod
    def support_upper(self) -> float:
        """Supremum of the support (``math.inf`` when unbounded)."""

    # -- sampling -----------------------------------------------------------

    def sample(self, rng: RngStream) -> float:
        """One draw from the law; advances ``rng``."""
        return float(self.sample_many(rng, 1)[0])

    def sample_many(self, rng: RngStream, size: int) -> np.ndarray:
        """``size`` i.i.d. draws by inverse transform."""
        return self._quantile_array(1.0 - rng.uniforms(size))

    def _quantile_array(self, q: np.ndarray) -> np.ndarray:
        return np.array([self.numeric_quantile(float(v)) for v in q])

    # -- quantiles ----------------------------------------------------------

    def quantile(self, q: float) -> float:
        """
        Smallest x with F(x) >= q.

        Args:
            q: Probability in (0, 1]

        Returns:
            The quantile δ_q; ``math.inf`` for q = 1 on an unbounded support

        Raises:
            DomainError: If q is outside (0, 1]
        """
        self._check_probability(q)
        if q == 1.0:
            return self.support_upper
        return self.numeric_quantile(q)

    def numeric_quantile(self, q: float) -> float:
        """Quantile by bracketing and Brent's method on F(x) - q."""
        self._check_probability(q)
        if q == 1.0:
            return self.support_upper
        upper = 1.0
        while float(self.cdf(upper)) < q:
            if upper >= self.support_upper:
                break
            upper = min(upper * 2.0, self.support_upper)
        root = optimize.brentq(
            lambda x: float(self.cdf(x)) - q,
            0.0,
            upper,
            xtol=self.inversion_tolerance,
            rtol=max(self.inversion_tolerance, 4 * np.finfo(float).eps),
        )
        return float(root)

    @staticmethod
    def _check_probability(q: float) -> None:
        if not 0.0 < q <= 1.0:
            raise DomainError(f"quantile level must lie in (0, 1], got {q}")

    # -- expectations -------------------------------------------------------

    def partial_expectation(self, lo: float, hi: float) -> float:
        """∫ x f(x) dx over (lo, hi]."""
        return self.numeric_partial_expectation(lo, hi)

    def numeric_partial_expectation(self, lo: float, hi: float) -> float:
        lo = max(lo, 0.0)
        hi = min(hi, self.support_upper)
        if hi <= lo:
            return 0.0
        value, _ = integrate.quad(
            lambda x: x * self.pdf(x), lo, hi, epsrel=QUADRATURE_RELATIVE_TOLERANCE, limit=200
        )
        return float(value)

    def mass(self, lo: float, hi: float) -> float:
        """P[lo < x <= hi]."""
        return float(self.cdf(hi)) - float(self.cdf(lo))

    def conditional_expectation(self, lo: float, hi: float) -> float:
        """
        E[x | lo < x <= hi].

        Args:
            lo: Lower end (exclusive); may be ``-math.inf``
            hi: Upper end (inclusive); may be ``math.inf``

        Raises:
            DomainError: If lo >= hi
            ZeroMassError: If the interval carries no probability
        """
        if not lo < hi:
            raise DomainError(f"empty interval ({lo}, {hi}]")
        mass = self.mass(lo, hi)
        if mass <= ZERO_MASS_TOLERANCE:
            raise ZeroMassError(f"P[{lo} < x <= {hi}] = {mass} for {self!r}")
        return self.partial_expectation(lo, hi) / mass

    def survival_power_integral(self, m: int) -> float:
        """∫_0^∞ (1 - F(x))^m dx, the expected minimum of m draws."""
        return self.numeric_survival_power_integral(m)

    def numeric_survival_power_integral(self, m: int) -> float:
        """Tail-truncated adaptive quadrature of (1 - F)^m up to δ_{1-ε}."""
        self._check_power(m)
        upper = self.quantile(1.0 - TAIL_EPSILON)
        result = integrate.quad(
            lambda x: (1.0 - float(self.cdf(x))) ** m,
            0.0,
            upper,
            epsrel=QUADRATURE_RELATIVE_TOLERANCE,
            limit=200,
            full_output=1,
        )
        if len(result) > 3:
            logger.warning(f"Quadrature warning for {self!r}, m={m}: {result[3]}")
            raise DivergenceError(f"survival power integral failed to converge: {result[3]}")
        return float(result[0])

    @staticmethod
    def _check_power(m: int) -> None:
        if m < 1:
            raise DomainError(f"power must be a positive integer, got {m}")

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class Uniform01(Distribution):
    kind = "uniform01"

    def cdf(self, x: ArrayLike) -> ArrayLike:
        return _as_output(np.clip(np.asarray(x, dtype=float), 0.0, 1.0), x)

    def pdf(self, x: float) -> float:
        return 1.0 if 0.0 <= x <= 1.0 else 0.0

    def mean(self) -> float:
        return 0.5

    @property
    def support_upper(self) -> float:
        return 1.0

    def sample_many(self, rng: RngStream, size: int) -> np.ndarray:
        return rng.uniforms(size)

    def quantile(self, q: float) -> float:
        self._check_probability(q)
        return float(q)

    def partial_expectation(self, lo: float, hi: float) -> float:
        lo = min(max(lo, 0.0), 1.0)
        hi = min(max(hi, 0.0), 1.0)
        return max(hi * hi - lo * lo, 0.0) / 2.0

    def survival_power_integral(self, m: int) -> float:
        self._check_power(m)
        return 1.0 / (m + 1)


class Exponential(Distribution):
    kind = "exponential"

    def __init__(self, rate: float = 1.0, inversion_tolerance: float = DEFAULT_INVERSION_TOLERANCE):
        super().__init__(inversion_tolerance)
        if not rate > 0:
            raise DomainError(f"exponential rate must be positive, got {rate}")
        self.rate = float(rate)

    def cdf(self, x: ArrayLike) -> ArrayLike:
        values = np.asarray(x, dtype=float)
        return _as_output(-np.expm1(-self.rate * np.maximum(values, 0.0)), x)

    def pdf(self, x: float) -> float:
        return self.rate * math.exp(-self.rate * x) if x >= 0 else 0.0

    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def support_upper(self) -> float:
        return math.inf

    def sample_many(self, rng: RngStream, size: int) -> np.ndarray:
        return rng.generator.exponential(1.0 / self.rate, size)

    def quantile(self, q: float) -> float:
        self._check_probability(q)
        if q == 1.0:
            return math.inf
        return -math.log1p(-q) / self.rate

    def partial_expectation(self, lo: float, hi: float) -> float:
        lo = max(lo, 0.0)
        if hi <= lo:
            return 0.0
        scale = 1.0 / self.rate

        def antiderivative(x: float) -> float:
            if math.isinf(x):
                return 0.0
            return (x + scale) * math.exp(-self.rate * x)

        return antiderivative(lo) - antiderivative(hi)

    def survival_power_integral(self, m: int) -> float:
        self._check_power(m)
        return 1.0 / (m * self.rate)

    def __repr__(self) -> str:
        return f"Exponential(rate={self.rate})"


class Pareto(Distribution):
    """Pareto law with F(x) = 1 - (scale / x)^shape on [scale, ∞)."""

    kind = "pareto"

    def __init__(
        self,
        shape: float,
        scale: float = 1.0,
        inversion_tolerance: float = DEFAULT_INVERSION_TOLERANCE,
    ):
        super().__init__(inversion_tolerance)
        if not shape > 1:
            raise DomainError(f"pareto shape must exceed 1 for a finite mean, got {shape}")
        if not scale > 0:
            raise DomainError(f"pareto scale must be positive, got {scale}")
        self.shape = float(shape)
        self.scale = float(scale)

    def cdf(self, x: ArrayLike) -> ArrayLike:
        values = np.asarray(x, dtype=float)
        safe = np.maximum(values, self.scale)
        result = np.where(values < self.scale, 0.0, 1.0 - (self.scale / safe) ** self.shape)
        return _as_output(result, x)

    def pdf(self, x: float) -> float:
        if x < self.scale:
            return 0.0
        return self.shape * self.scale**self.shape / x ** (self.shape + 1)

    def mean(self) -> float:
        return self.shape * self.scale / (self.shape - 1)

    @property
    def support_upper(self) -> float:
        return math.inf

    def sample_many(self, rng: RngStream, size: int) -> np.ndarray:
        return (rng.generator.pareto(self.shape, size) + 1.0) * self.scale

    def quantile(self, q: float) -> float:
        self._check_probability(q)
        if q == 1.0:
            return math.inf
        return self.scale * (1.0 - q) ** (-1.0 / self.shape)

    def partial_expectation(self, lo: float, hi: float) -> float:
        lo = max(lo, self.scale)
        if hi <= lo:
            return 0.0
        factor = self.shape * self.scale**self.shape / (self.shape - 1)
        upper_term = 0.0 if math.isinf(hi) else hi ** (1 - self.shape)
        return factor * (lo ** (1 - self.shape) - upper_term)

    def survival_power_integral(self, m: int) -> float:
        self._check_power(m)
        exponent = self.shape * m
        return self.scale + self.scale / (exponent - 1)

    def __repr__(self) -> str:
        return f"Pareto(shape={self.shape}, scale={self.scale})"


class Empirical(Distribution):
    """
    Piecewise-linear interpolation of an empirical CDF.

    The sorted sample values v_0 < ... < v_{m-1} get CDF values
    k / (m - 1), linearly interpolated, so the law is continuous with a
    piecewise-constant density.
    """

    kind = "empirical"

    def __init__(
        self,
        values: Sequence[float],
        inversion_tolerance: float = DEFAULT_INVERSION_TOLERANCE,
    ):
        super().__init__(inversion_tolerance)
        points = np.unique(np.asarray(values, dtype=float))
        if points.size < 2:
            raise DomainError("empirical law needs at least two distinct values")
        if points[0] < 0 or not np.all(np.isfinite(points)):
            raise DomainError("empirical values must be finite and nonnegative")
        self.values = points
        self.levels = np.linspace(0.0, 1.0, points.size)
        self._densities = np.diff(self.levels) / np.diff(self.values)

    def cdf(self, x: ArrayLike) -> ArrayLike:
        return _as_output(np.interp(x, self.values, self.levels, left=0.0, right=1.0), x)

    def pdf(self, x: float) -> float:
        if x < self.values[0] or x >= self.values[-1]:
            return 0.0
        index = int(np.searchsorted(self.values, x, side="right")) - 1
        return float(self._densities[index])

    def mean(self) -> float:
        return self.partial_expectation(0.0, self.support_upper)

    @property
    def support_upper(self) -> float:
        return float(self.values[-1])

    def sample_many(self, rng: RngStream, size: int) -> np.ndarray:
        return self._quantile_array(rng.uniforms(size))

    def _quantile_array(self, q: np.ndarray) -> np.ndarray:
        return np.interp(q, self.levels, self.values)

    def quantile(self, q: float) -> float:
        self._check_probability(q)
        return float(np.interp(q, self.levels, self.values))

    def partial_expectation(self, lo: float, hi: float) -> float:
        lo = max(lo, float(self.values[0]))
        hi = min(hi, self.support_upper)
        if hi <= lo:
            return 0.0
        left = np.clip(self.values[:-1], lo, hi)
        right = np.clip(self.values[1:], lo, hi)
        return float(np.sum(self._densities * (right**2 - left**2) / 2.0))

    def survival_power_integral(self, m: int) -> float:
        self._check_power(m)
        a = 1.0 - self.levels[:-1]
        b = 1.0 - self.levels[1:]
        widths = np.diff(self.values)
        segments = widths * (a ** (m + 1) - b ** (m + 1)) / ((m + 1) * (a - b))
        return float(self.values[0] + np.sum(segments))

    def __repr__(self) -> str:
        return f"Empirical({self.values.size} points on [{self.values[0]}, {self.values[-1]}])"


def from_spec(spec: DistributionSpec) -> Distribution:
    """
    Build the distribution described by a validated spec.

    Args:
        spec: One of the distribution spec models

    Returns:
        The matching Distribution instance
    """
    match spec:
        case Uniform01Spec():
            return Uniform01()
        case ExponentialSpec():
            return Exponential(rate=spec.params.rate)
        case ParetoSpec():
            return Pareto(shape=spec.params.shape, scale=spec.params.scale)
        case EmpiricalSpec():
            return Empirical(spec.params.values)
    raise DomainError(f"unknown distribution spec: {spec!r}")
