"""
Online hiring policies.

Each policy is a resumable state machine: ``step(i, x)`` sees the cost of
applicant i and answers with a Decision (a contract duration, 0 for no
hire, and whether the policy is done). A policy built with ``horizon=None``
never stops on its own; that mode is what the two-concurrent wrapper runs
its base policy in.
"""

import logging
import math
import threading
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Protocol, Union

from hiring_simulator.analysis import SequentialTable, ceil_log2, sequential_expected_cost
from hiring_simulator.distributions import Distribution
from hiring_simulator.dp_optimal import DpTable, compute_table
from hiring_simulator.errors import DomainError, TableMismatchError
from hiring_simulator.models import (
    WRAPPABLE_POLICIES,
    Alg1Spec,
    Alg2Spec,
    Alg3Spec,
    Alg4Spec,
    Alg5Spec,
    DpOptimalSpec,
    PolicySpec,
)

logger = logging.getLogger("hiring.policies")

# Thresholds 2^-level stay representable as floats up to here.
MAX_LEVEL = 1000


@dataclass(frozen=True)
class Decision:
    duration: int = 0
    stop: bool = False


NO_HIRE = Decision()


class Policy(Protocol):
    def step(self, i: int, x: float) -> Decision: ...


class HorizonPolicy:
    """Shared stop check: a hire that reaches past the horizon ends the run."""

    name = "policy"

    def __init__(self, horizon: Optional[int]):
        if horizon is not None and horizon < 1:
            raise DomainError(f"horizon must be positive, got {horizon}")
        self.horizon = horizon

    def overruns(self, i: int, duration: int) -> bool:
        return self.horizon is not None and i + duration > self.horizon


class ThresholdHalvingPolicy(HorizonPolicy):
    """
    Threshold halving for costs on [0, 1].

    The threshold is τ = 2^-level. A cost at most τ is hired for 4/τ steps,
    after which τ halves and the countdown restarts at 1/τ; when the
    countdown runs out without a hire, τ doubles.
    """

    name = "alg1"

    def __init__(self, horizon: Optional[int]):
        super().__init__(horizon)
        self.level = 0
        self.countdown = 1
        self.levels_visited = {0}

    @property
    def tau(self) -> float:
        return 2.0**-self.level

    def step(self, i: int, x: float) -> Decision:
        self.countdown -= 1
        if x <= self.tau:
            duration = 4 << self.level
            if self.overruns(i, duration):
                return Decision(duration, True)
            self.level += 1
            self.countdown = 1 << self.level
            self.levels_visited.add(self.level)
            return Decision(duration)
        if self.countdown == 0:
            self.level = max(self.level - 1, 0)
            self.countdown = 1 << self.level
            self.levels_visited.add(self.level)
        return NO_HIRE


class CeilingBudgetPolicy(HorizonPolicy):
    """
    Repeated halving with contract scale c for costs on [0, 1].

    A cost x at most τ halves τ while x <= τ, then hires for ceil(2c/τ)
    steps and waits ceil(c/τ) steps at the new τ before doubling it.
    """

    name = "alg2"

    def __init__(self, horizon: Optional[int], c: Union[float, Fraction] = Fraction(3, 4)):
        super().__init__(horizon)
        self.c = Fraction(str(c)) if isinstance(c, float) else Fraction(c)
        if self.c <= 0:
            raise DomainError(f"contract scale must be positive, got {c}")
        check_ceiling_budget(self.c, budget_levels(horizon))
        self.level = 0
        self.countdown = 1

    @property
    def tau(self) -> float:
        return 2.0**-self.level

    def step(self, i: int, x: float) -> Decision:
        self.countdown -= 1
        if x <= self.tau:
            while x <= self.tau and self.level < MAX_LEVEL:
                self.level += 1
            duration = hire_duration(self.c, self.level)
            stop = self.overruns(i, duration)
            self.countdown = countdown_length(self.c, self.level)
            return Decision(duration, stop)
        if self.countdown == 0:
            self.level = max(self.level - 1, 0)
            self.countdown = countdown_length(self.c, self.level)
        return NO_HIRE


def hire_duration(c: Fraction, level: int) -> int:
    """ceil(2c / τ) for τ = 2^-level."""
    return math.ceil(2 * c * (1 << level))


def countdown_length(c: Fraction, level: int) -> int:
    """ceil(c / τ) for τ = 2^-level."""
    return math.ceil(c * (1 << level))


def budget_levels(horizon: Optional[int]) -> int:
    return 64 if horizon is None else max(ceil_log2(horizon) + 1, 1)


def check_ceiling_budget(c: Fraction, levels: int) -> None:
    """
    A hire at level L must outlast the countdowns of levels L..1 plus the
    certain hire at level 0: sum of ceil(c 2^i) for 1 <= i <= L, plus one,
    is at most ceil(2c 2^L).

    Raises:
        DomainError: For the first level where the contract runs out early
    """
    waited = 1
    for level in range(1, levels + 1):
        waited += countdown_length(c, level)
        if waited > hire_duration(c, level):
            raise DomainError(
                f"contract scale c={c} leaves steps uncovered after a hire at level {level}"
            )


class QuantilePolicy(HorizonPolicy):
    """
    Threshold halving on quantiles, for any known continuous law.

    The threshold is δ_q with q = 2^-level. A hire lasts 2/q steps (or until
    the horizon, when that is sooner and ends the run) and is followed by a
    countdown of 1/q steps.
    """

    name = "alg3"

    def __init__(self, horizon: Optional[int], distribution: Distribution):
        super().__init__(horizon)
        self.distribution = distribution
        self.level = 0
        self.countdown = 1
        self._thresholds: Dict[int, float] = {}

    def threshold(self, level: int) -> float:
        if level not in self._thresholds:
            self._thresholds[level] = self.distribution.quantile(2.0**-level)
        return self._thresholds[level]

    @property
    def tau(self) -> float:
        return self.threshold(self.level)

    def step(self, i: int, x: float) -> Decision:
        self.countdown -= 1
        if x <= self.tau:
            while x <= self.tau and self.level < MAX_LEVEL:
                self.level += 1
            duration = 2 << self.level
            if self.overruns(i, duration):
                assert self.horizon is not None
                return Decision(self.horizon - i + 1, True)
            self.countdown = 1 << self.level
            return Decision(duration)
        if self.countdown == 0:
            self.level = max(self.level - 1, 0)
            self.countdown = 1 << self.level
        return NO_HIRE


class SamplingPolicy(HorizonPolicy):
    """
    Sample-then-wait thresholds; the cost law is never consulted.

    At level j a sampling phase of 2^j - 1 steps records the smallest cost
    as τ, then a waiting phase of λ(2^j - 1) steps hires the first cost at
    most τ for (1 + λ) 2^(j+2) steps and moves up a level. If the waiting
    phase passes without a hire, the next applicant is passed over while the
    level drops. Level 0 has no sampling phase and a one-step waiting phase
    with τ = ∞, so it always hires.
    """

    name = "alg4"

    def __init__(self, horizon: Optional[int], lam: int = 3):
        super().__init__(horizon)
        if lam < 2:
            raise DomainError(f"lambda must be an integer greater than 1, got {lam}")
        self.lam = lam
        self.level = 0
        self.max_level = 0
        self.tau = math.inf
        self.sampling_left = 0
        self.waiting_left = 1
        # completed waiting phases per level, by outcome
        self.waiting_hires: Counter = Counter()
        self.waiting_misses: Counter = Counter()
        self._enter_level()

    def _enter_level(self) -> None:
        self.tau = math.inf
        if self.level == 0:
            self.sampling_left = 0
            self.waiting_left = 1
        else:
            self.sampling_left = (1 << self.level) - 1
            self.waiting_left = self.lam * self.sampling_left

    def step(self, i: int, x: float) -> Decision:
        if self.sampling_left > 0:
            self.tau = min(self.tau, x)
            self.sampling_left -= 1
            return NO_HIRE
        if self.waiting_left == 0:
            self.waiting_misses[self.level] += 1
            self.level -= 1
            self._enter_level()
            # the step that ends a waiting phase is spent on the level change
            return NO_HIRE
        self.waiting_left -= 1
        if x <= self.tau:
            duration = (1 + self.lam) << (self.level + 2)
            self.waiting_hires[self.level] += 1
            if self.overruns(i, duration):
                return Decision(duration, True)
            self.level += 1
            self.max_level = max(self.max_level, self.level)
            self._enter_level()
            return Decision(duration)
        return NO_HIRE


def sampling_level_cap(horizon: int, lam: int) -> int:
    """max(0, ceil(log(n / (1 + λ))) - 2), computed exactly."""
    exponent = 0
    while ((1 + lam) << exponent) < horizon:
        exponent += 1
    return max(0, exponent - 2)


class SequentialPolicy(HorizonPolicy):
    """
    Optimal sequential employment: with r steps left after the current one,
    a cost below τ_r is hired for the rest of the horizon, anything else for
    one step.
    """

    name = "alg5"

    def __init__(self, horizon: int, table: SequentialTable):
        super().__init__(horizon)
        if table.n < horizon - 1 or table.n < 1:
            raise TableMismatchError(
                f"sequential table covers {table.n} steps, horizon {horizon} needs {horizon - 1}"
            )
        self.table = table

    def step(self, i: int, x: float) -> Decision:
        assert self.horizon is not None
        remaining = self.horizon - i
        if x < self.table.threshold(remaining):
            return Decision(remaining + 1, True)
        return Decision(1, remaining == 0)


def dp_policy_step(
    table: DpTable,
    i: int,
    covered_ahead: int,
    x: float,
    horizon: Optional[int] = None,
) -> Decision:
    """
    One move of the optimal online policy.

    With i' = n - i + 1 steps left and the next j = covered_ahead of them
    covered, hiring for r steps costs r x + C(i'-1, r-1) and waiting (only
    possible for j >= 1) costs C(i'-1, j-1). Only r > j can help. Ties go
    to the shorter duration, waiting counting as duration 0.

    Raises:
        TableMismatchError: If ``horizon`` is given and differs from the table's
    """
    if horizon is not None and horizon != table.n:
        raise TableMismatchError(f"table horizon {table.n} differs from policy horizon {horizon}")
    n = table.n
    remaining = n - i + 1
    if remaining < 1:
        raise DomainError(f"step {i} is past the horizon {n}")
    if covered_ahead >= remaining:
        return NO_HIRE
    future = table.float_rows()[remaining - 1]
    best_duration = 0
    best_cost = future[covered_ahead - 1] if covered_ahead > 0 else math.inf
    for r in range(covered_ahead + 1, remaining + 1):
        cost = r * x + future[r - 1]
        if cost < best_cost:
            best_duration, best_cost = r, cost
    if best_duration == 0:
        return NO_HIRE
    return Decision(best_duration, best_duration == remaining)


class DynamicProgramPolicy(HorizonPolicy):
    """Optimal online policy for uniform costs, driven by the full DP table."""

    name = "dp_optimal"

    def __init__(self, horizon: int, table: DpTable):
        super().__init__(horizon)
        if table.n != horizon:
            raise TableMismatchError(f"table horizon {table.n} differs from horizon {horizon}")
        if not table.is_full:
            raise DomainError("the DP policy needs the full table (keep_full=True)")
        self.table = table
        self.frontier = 0

    def step(self, i: int, x: float) -> Decision:
        covered_ahead = max(0, self.frontier - i + 1)
        decision = dp_policy_step(self.table, i, covered_ahead, x)
        if decision.duration:
            self.frontier = max(self.frontier, i + decision.duration - 1)
        return decision


WrappablePolicy = Union[ThresholdHalvingPolicy, CeilingBudgetPolicy, QuantilePolicy, SamplingPolicy]


class TwoConcurrentPolicy:
    """
    Runs a base policy with doubled contracts.

    Every base hire of d steps is booked for 2d, and the next d applicants
    are turned away unseen by the base. The base runs on its own clock, which
    skips those idle steps, so its contracts map exactly onto the second
    halves of the booked ones.

    A new base contract normally outlasts what is left of the previous one.
    When it does not (Algorithm 4 after falling several levels), the idle
    period is stretched until the previous booked contract has ended and the
    booking grows by the same amount. Either way at most two contracts are
    ever active, and after a booking reaches the horizon at most one more
    hire happens before step n.

    The wrapper owns the stop check: with a known horizon it stops once a
    booked contract reaches step n; without one it never stops.
    """

    def __init__(self, base: WrappablePolicy):
        if base.name not in WRAPPABLE_POLICIES:
            raise DomainError(f"cannot wrap {base.name}; expected one of {WRAPPABLE_POLICIES}")
        self.base = base
        self.name = f"{base.name}+two_concurrent"
        self.horizon = base.horizon
        base.horizon = None
        self.idle_until = 0
        self.lag = 0
        self.frontier = 0

    def step(self, i: int, x: float) -> Decision:
        if i <= self.idle_until:
            return NO_HIRE
        decision = self.base.step(i - self.lag, x)
        if decision.duration == 0:
            return NO_HIRE
        idle = max(decision.duration, self.frontier - i)
        booked = idle + decision.duration
        self.idle_until = i + idle
        self.lag += idle
        self.frontier = i + booked - 1
        return Decision(booked, self.horizon is not None and i + booked > self.horizon)


def two_concurrent_wrapper(base: WrappablePolicy) -> TwoConcurrentPolicy:
    return TwoConcurrentPolicy(base)


def unknown_horizon_mode(wrapped: TwoConcurrentPolicy) -> TwoConcurrentPolicy:
    """Drop the wrapper's stop check so the policy runs without knowing n."""
    if not isinstance(wrapped, TwoConcurrentPolicy):
        raise DomainError("unknown-horizon mode applies to two-concurrent policies only")
    wrapped.horizon = None
    wrapped.name = wrapped.name + "+unknown_n"
    return wrapped


class PolicyFactory:
    """
    Builds fresh policies of one spec for one horizon.

    Tables that only depend on the spec and horizon are computed once and
    shared by every policy the factory creates.
    """

    def __init__(
        self,
        spec: PolicySpec,
        distribution: Distribution,
        horizon: int,
        two_concurrent: bool = False,
        unknown_n: bool = False,
    ):
        if unknown_n and not two_concurrent:
            raise DomainError("unknown-n requires the two-concurrent wrapper")
        if two_concurrent and spec.policy not in WRAPPABLE_POLICIES:
            raise DomainError(f"two-concurrent does not apply to {spec.policy}")
        self.spec = spec
        self.distribution = distribution
        self.horizon = horizon
        self.two_concurrent = two_concurrent
        self.unknown_n = unknown_n
        self._sequential: Optional[SequentialTable] = None
        self._dp: Optional[DpTable] = None
        self._tables_lock = threading.Lock()
        suffix = "+two_concurrent" if two_concurrent else ""
        suffix += "+unknown_n" if unknown_n else ""
        self.label = spec.label + suffix

    def _base(self) -> Policy:
        n = self.horizon
        match self.spec:
            case Alg1Spec():
                return ThresholdHalvingPolicy(n)
            case Alg2Spec():
                return CeilingBudgetPolicy(n, self.spec.c)
            case Alg3Spec():
                return QuantilePolicy(n, self.distribution)
            case Alg4Spec():
                return SamplingPolicy(n, self.spec.lam)
            case Alg5Spec():
                with self._tables_lock:
                    if self._sequential is None:
                        self._sequential = sequential_expected_cost(self.distribution, n)
                return SequentialPolicy(n, self._sequential)
            case DpOptimalSpec():
                with self._tables_lock:
                    if self._dp is None:
                        self._dp = compute_table(
                            n, self.spec.denominator_bound, keep_full=True
                        )
                return DynamicProgramPolicy(n, self._dp)
        raise DomainError(f"unknown policy spec {self.spec!r}")

    def __call__(self) -> Policy:
        policy = self._base()
        if not self.two_concurrent:
            return policy
        wrapped = two_concurrent_wrapper(policy)  # type: ignore[arg-type]
        return unknown_horizon_mode(wrapped) if self.unknown_n else wrapped


def build_policy(
    spec: PolicySpec,
    distribution: Distribution,
    horizon: int,
    two_concurrent: bool = False,
    unknown_n: bool = False,
) -> Policy:
    return PolicyFactory(spec, distribution, horizon, two_concurrent, unknown_n)()
