"""
Closed-form optima, bounds and constant checks.

Every check returns a BoundReport; nothing here simulates.
"""

import logging
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from hiring_simulator.distributions import Distribution, Exponential, Pareto, Uniform01
from hiring_simulator.errors import DomainError
from hiring_simulator.markov import mhat_total_transitions, nhat_h
from hiring_simulator.models import BoundReport

logger = logging.getLogger("hiring.analysis")


@dataclass(frozen=True)
class Constants:
    gamma: float = float(np.euler_gamma)
    e: float = math.e
    ln2: float = math.log(2.0)

    @property
    def eta(self) -> float:
        return 5.0 / 2.0 - 55.0 / (6.0 * self.e**2)


CONSTANTS = Constants()
ETA = CONSTANTS.eta

EXACT_HARMONIC_LIMIT = 10_000
GM_OFFSET = 1.767
CHECK_TOLERANCE = 1e-12

_harmonic_lock = threading.Lock()
_harmonic_cache: List[Fraction] = [Fraction(0)]


def ceil_log2(n: int) -> int:
    """Smallest e >= 0 with 2^e >= n."""
    if n < 1:
        raise DomainError(f"logarithm of {n}")
    return (n - 1).bit_length()


def floor_log2(n: int) -> int:
    if n < 1:
        raise DomainError(f"logarithm of {n}")
    return n.bit_length() - 1


# -- harmonic numbers -------------------------------------------------------


def harmonic_fraction(n: int) -> Fraction:
    """H_n as an exact fraction; the partial sums are cached."""
    if n < 0:
        raise DomainError(f"harmonic number of {n}")
    with _harmonic_lock:
        while len(_harmonic_cache) <= n:
            i = len(_harmonic_cache)
            _harmonic_cache.append(_harmonic_cache[-1] + Fraction(1, i))
        return _harmonic_cache[n]


def harmonic(n: int) -> float:
    """
    H_n as a float.

    Exact rational summation up to EXACT_HARMONIC_LIMIT, compensated
    floating point summation above.
    """
    if n <= EXACT_HARMONIC_LIMIT:
        return float(harmonic_fraction(n))
    return math.fsum(1.0 / i for i in range(1, n + 1))


def harmonic_array(n_max: int) -> np.ndarray:
    """H_0 .. H_{n_max} via the digamma function, for long vectorised sweeps."""
    indices = np.arange(n_max + 1, dtype=float)
    return special.digamma(indices + 1.0) + np.euler_gamma


# -- offline optimum --------------------------------------------------------


def opt_uniform(n: int) -> float:
    """E[Opt_n] = H_{n+1} - 1 for uniform costs."""
    if n < 1:
        raise DomainError(f"horizon must be positive, got {n}")
    if n + 1 <= EXACT_HARMONIC_LIMIT:
        return float(harmonic_fraction(n + 1) - 1)
    return math.fsum(1.0 / i for i in range(2, n + 2))


def opt_general(distribution: Distribution, n: int) -> float:
    """E[Opt_n] = sum over i <= n of the integral of (1 - F)^i."""
    if n < 1:
        raise DomainError(f"horizon must be positive, got {n}")
    return math.fsum(distribution.survival_power_integral(i) for i in range(1, n + 1))


def opt_lower_bound_quantile_bands(distribution: Distribution, n: int) -> float:
    """
    Lower bound on E[Opt_n] from conditional means over quantile bands.

    With k = ceil(log n) - 2, band r < k is (δ_{2^-(r+1)}, δ_{2^-r}] with
    weight 2^(r-1), and the bottom band [0, δ_{2^-k}] has weight η 2^(k-1).

    Raises:
        DomainError: For n <= 4
    """
    k = ceil_log2(n) - 2
    if k < 1:
        raise DomainError(f"quantile band bound needs n >= 5, got {n}")
    terms = []
    for r in range(k):
        lo = distribution.quantile(2.0 ** -(r + 1))
        hi = distribution.quantile(2.0**-r)
        terms.append(2.0 ** (r - 1) * distribution.conditional_expectation(lo, hi))
    bottom = distribution.quantile(2.0**-k)
    terms.append(ETA * 2.0 ** (k - 1) * distribution.conditional_expectation(-math.inf, bottom))
    return math.fsum(terms)


def opt_lower_bound_survival_powers(distribution: Distribution, n: int) -> float:
    """E[x] + sum over 1 <= i <= floor(log n) of 2^(i-1) ∫ (1 - F)^(2^i)."""
    terms = [distribution.mean()]
    for i in range(1, floor_log2(n) + 1):
        terms.append(2.0 ** (i - 1) * distribution.survival_power_integral(2**i))
    return math.fsum(terms)


# -- relaxation lower bound -------------------------------------------------


def gilbert_mosteller_h(t: int) -> float:
    return 2.0 / (t + math.log(t + 1) + GM_OFFSET)


def gilbert_mosteller_lower_curve(n: int) -> float:
    """Sum over t <= n of h(t), relative to H_{n+1} - 1."""
    if n < 1:
        raise DomainError(f"horizon must be positive, got {n}")
    return math.fsum(gilbert_mosteller_h(t) for t in range(1, n + 1)) / opt_uniform(n)


def gilbert_mosteller_curve_array(n_max: int) -> np.ndarray:
    """The lower curve for every n in 1..n_max (index n - 1)."""
    t = np.arange(1, n_max + 1, dtype=float)
    sums = np.cumsum(2.0 / (t + np.log(t + 1.0) + GM_OFFSET))
    return sums / (harmonic_array(n_max + 1)[2:] - 1.0)


def relaxation_curve_array(n_max: int) -> np.ndarray:
    """
    Exact relaxed optimum over H_{n+1} - 1 for every n in 1..n_max.

    Slot t costs 1 - τ_t, the optimal single-stopping cost with t uniform
    draws. h(t) only bounds this cost from above (τ_t >= 1 - h(t)), so this
    curve, not the h(t) curve, lower-bounds the optimal online ratio at
    every n.
    """
    if n_max < 1:
        raise DomainError(f"horizon must be positive, got {n_max}")
    costs = np.empty(n_max)
    u = 1.0
    for t in range(n_max):
        # u = 1 - τ, so τ -> (1 + τ^2) / 2 becomes u -> u - u^2 / 2
        u -= u * u / 2.0
        costs[t] = u
    return np.cumsum(costs) / (harmonic_array(n_max + 1)[2:] - 1.0)


def gm_threshold(t: int) -> float:
    """τ_0 = 0, τ_{i+1} = (1 + τ_i^2) / 2."""
    if t < 0:
        raise DomainError(f"threshold index must be nonnegative, got {t}")
    tau = 0.0
    for _ in range(t):
        tau = (1.0 + tau * tau) / 2.0
    return tau


# -- sequential employment --------------------------------------------------


@dataclass(frozen=True)
class SequentialTable:
    """
    Expected optimal sequential costs E_1 .. E_n.

    ``expected[m - 1]`` is E_m. The hiring threshold with r steps left after
    the current one is τ_r = E_r / r; τ_0 is the sentinel τ_1 + 1.
    """

    expected: List[float]

    @property
    def n(self) -> int:
        return len(self.expected)

    def cost(self, m: int) -> float:
        return 0.0 if m == 0 else self.expected[m - 1]

    def threshold(self, r: int) -> float:
        if r == 0:
            return self.expected[0] + 1.0
        return self.expected[r - 1] / r

    @property
    def thresholds(self) -> List[float]:
        """τ_1 .. τ_{n-1}."""
        return [self.threshold(r) for r in range(1, self.n)]


def sequential_expected_cost(distribution: Distribution, n: int) -> SequentialTable:
    """
    Expected cost of the optimal sequential policy for every horizon up to n.

    Uniform costs use E_m = E_{m-1} + 1/2 - E_{m-1}^2 / (2(m-1)); other laws
    the general recursion with τ = E_{m-1} / (m-1):
    E_m = m E[x; x < τ] + E[x; x >= τ] + P[x >= τ] E_{m-1}.
    """
    if n < 1:
        raise DomainError(f"horizon must be positive, got {n}")
    expected = [distribution.mean()]
    uniform = isinstance(distribution, Uniform01)
    mean = distribution.mean()
    for m in range(2, n + 1):
        previous = expected[-1]
        if uniform:
            expected.append(previous + 0.5 - previous * previous / (2 * (m - 1)))
            continue
        tau = previous / (m - 1)
        below = distribution.partial_expectation(-math.inf, tau)
        survival = 1.0 - float(distribution.cdf(tau))
        expected.append(m * below + (mean - below) + survival * previous)
    return SequentialTable(expected=expected)


def sequential_grid_costs(n: int, m: int = 200) -> Tuple[float, float]:
    """
    Brute-force check of the sequential policy on an m-point uniform grid.

    Returns:
        (optimal sequential cost by backward induction over every contract
        length, cost of the threshold policy on the same grid)
    """
    if n < 1:
        raise DomainError(f"horizon must be positive, got {n}")
    x = (np.arange(m) + 0.5) / m
    table = sequential_expected_cost(Uniform01(), n)
    optimal = [0.0]
    threshold_policy = [0.0]
    for i in range(1, n + 1):
        options = np.stack([t * x + optimal[i - t] for t in range(1, i + 1)])
        optimal.append(float(options.min(axis=0).mean()))
        tau = table.threshold(i - 1)
        threshold_policy.append(float(np.where(x < tau, i * x, x + threshold_policy[i - 1]).mean()))
    return optimal[n], threshold_policy[n]


# -- checks -----------------------------------------------------------------


def _report_at_most(name: str, value: float, bound: float, n: Optional[int] = None) -> BoundReport:
    return BoundReport(
        name=name, n=n, value=value, bound=bound, satisfied=value <= bound + CHECK_TOLERANCE
    )


def _report_at_least(name: str, value: float, bound: float, n: Optional[int] = None) -> BoundReport:
    return BoundReport(
        name=name, n=n, value=value, bound=bound, satisfied=value >= bound - CHECK_TOLERANCE
    )


def alg1_constant() -> float:
    """(1 + 20/29 (5/6 - γ)) · (1 / ln 2) · (e / (e - 2) + 1)."""
    e = CONSTANTS.e
    return harmonic_log_ratio_bound() / CONSTANTS.ln2 * (e / (e - 2) + 1)


def harmonic_log_ratio_bound() -> float:
    return 1 + 20 / 29 * (5 / 6 - CONSTANTS.gamma)


def alg3_constant() -> float:
    e = CONSTANTS.e
    head = (8 * e - 8) / (2 * e - 3)
    numerator = 1 - ETA * (e - 1) / (2 * e - 3)
    denominator = 0.5 * (1 - 3 / e**4) + (1 / 5) ** 5 - 1 / 5
    return head + numerator / denominator


def alg4_constant(lam: int) -> float:
    return max(4 * (lam + 1) ** 2 / (lam - 1), 8 * lam * (lam + 1) / (lam - 1))


def alg2_ratio_sweep(n_max: int, c: float = 0.75) -> Tuple[float, int]:
    """
    Max over 1 <= n <= n_max of (3 h c - c) / (H_{n+1} - 1).

    h is the expected A->B transition count of N_hat(p, k) with
    p = 1 - e^(-3/4) and k = ceil(log(n / c)) - 2.

    Returns:
        (maximum, maximizing n)
    """
    p = -math.expm1(-0.75)
    scale = Fraction(c).limit_denominator(10**6)
    n = np.arange(1, n_max + 1, dtype=np.int64)
    target = n * scale.denominator
    levels = np.ceil(np.log2(target / scale.numerator)).astype(np.int64)
    # exact correction of the float logarithm: smallest e with 2^e num >= n den
    levels += (np.ldexp(float(scale.numerator), levels) < target).astype(np.int64)
    levels -= (np.ldexp(float(scale.numerator), levels - 1) >= target).astype(np.int64)
    k = levels - 2
    h_by_level = {int(level): float(nhat_h(p, int(level))) for level in np.unique(k)}
    h = np.vectorize(h_by_level.__getitem__, otypes=[float])(k)
    opt = harmonic_array(n_max + 1)[2:] - 1.0
    ratios = (3 * h * c - c) / opt
    best = int(np.argmax(ratios))
    return float(ratios[best]), best + 1


def verify_ratio_constants(sweep_max: int = 10**6) -> List[BoundReport]:
    """Re-evaluate the constant chains behind the competitive ratios."""
    reports = [_report_at_most("alg1_constant", alg1_constant(), 8.122)]

    n = np.arange(1, sweep_max + 1, dtype=float)
    log_ratio = np.log(n) / (harmonic_array(sweep_max + 1)[2:] - 1.0)
    worst = int(np.argmax(log_ratio))
    reports.append(
        _report_at_most(
            "log_over_harmonic", float(log_ratio[worst]), harmonic_log_ratio_bound(), worst + 1
        )
    )

    ratio, at = alg2_ratio_sweep(sweep_max)
    reports.append(_report_at_most("alg2_ratio_sweep", ratio, 2.965, at))
    reports.append(_report_at_most("alg3_constant", alg3_constant(), 6.052))
    reports.append(_report_at_most("alg4_constant", alg4_constant(3), 48.0))
    return reports


def g_value(distribution: Distribution, tau: float) -> float:
    """G(τ) = P[x >= τ] (τ - E[x | x >= τ]), written without the division."""
    survival = 1.0 - float(distribution.cdf(tau))
    above = distribution.mean() - distribution.partial_expectation(-math.inf, tau)
    return tau * survival - above


def g_monotone_check(distribution: Distribution, grid: Iterable[float]) -> BoundReport:
    """Largest decrease of G between consecutive grid points; at most 1e-9."""
    points = sorted(grid)
    values = [g_value(distribution, tau) for tau in points]
    drops = [values[i] - values[i + 1] for i in range(len(values) - 1)]
    violation = max([0.0] + drops)
    return _report_at_most(f"g_monotone:{distribution.kind}", violation, 1e-9)


def alpha(r: int, n: int) -> float:
    """α(r, n) by direct summation of the event probabilities."""
    k = ceil_log2(n) - 2
    if not 1 <= r <= k:
        raise DomainError(f"α needs 1 <= r <= ceil(log n) - 2 = {k}, got r={r}")
    keep = 1.0 - 2.0**-r
    keep_below = 1.0 - 2.0 ** -(r - 1)
    single = 2.0**-r if r == k else 2.0 ** -(r + 1)
    terms = []
    for i in range(1, n + 1):
        terms.append(i * single * keep ** (i - 1))
        terms.append(keep**i - keep_below**i - i * 2.0**-r * keep_below ** (i - 1))
    return math.fsum(terms)


def alpha_band_check(r: int, n: int) -> BoundReport:
    """α(r, n) >= 2^(r-1) below the top band, >= η 2^(k-1) at r = k."""
    k = ceil_log2(n) - 2
    value = alpha(r, n)
    target = ETA * 2.0 ** (k - 1) if r == k else 2.0 ** (r - 1)
    return _report_at_least(f"alpha_band:r={r}", value, target, n)


def sequential_sandwich_check(n: int, table: Optional[SequentialTable] = None) -> BoundReport:
    """E_n within [sqrt(n+1) - 1, sqrt(n)] for uniform costs; reports the slack."""
    table = table or sequential_expected_cost(Uniform01(), n)
    value = table.cost(n)
    lower = math.sqrt(n + 1) - 1
    upper = math.sqrt(n)
    slack = min(value - lower, upper - value)
    return _report_at_least("sequential_sandwich", slack, 0.0, n)


def standard_bound_reports(
    sweep_max: int = 10**6,
    horizons: Sequence[int] = (8, 64, 1024, 2**14),
) -> List[BoundReport]:
    """Everything the bounds subcommand prints."""
    reports = verify_ratio_constants(sweep_max)

    laws: List[Distribution] = [Uniform01(), Exponential(1.0), Pareto(3.0, 1.0)]
    for law in laws:
        upper = min(law.quantile(0.999), 20.0)
        reports.append(g_monotone_check(law, np.linspace(0.0, upper, 400)))
        for n in horizons:
            opt = opt_general(law, n)
            reports.append(
                _report_at_most(
                    f"quantile_band_bound:{law.kind}",
                    opt_lower_bound_quantile_bands(law, n),
                    opt,
                    n,
                )
            )
            reports.append(
                _report_at_most(
                    f"survival_power_bound:{law.kind}",
                    opt_lower_bound_survival_powers(law, n),
                    opt,
                    n,
                )
            )

    for n in (9, 17, 33, 100, 1000):
        for r in range(1, ceil_log2(n) - 1):
            reports.append(alpha_band_check(r, n))

    reports.append(_report_at_most("gm_curve", gilbert_mosteller_lower_curve(10**4), 1.8, 10**4))
    p = 1 - 1 / CONSTANTS.e
    for k in (1, 5, 10, 20):
        reports.append(
            _report_at_most(
                "mhat_transitions",
                float(mhat_total_transitions(p, k)),
                CONSTANTS.e * k / (CONSTANTS.e - 2),
                k,
            )
        )
    table = sequential_expected_cost(Uniform01(), 10**4)
    for n in (10, 100, 1000, 10**4):
        reports.append(sequential_sandwich_check(n, table))

    failed = [report.name for report in reports if not report.satisfied]
    if failed:
        logger.warning(f"Unsatisfied bound checks: {failed}")
    return reports
