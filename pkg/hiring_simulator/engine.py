"""
Discrete-time simulation core.

One episode draws x_1 .. x_n, feeds them to a policy in order, books the
contracts the policy asks for and checks after every decision that the
current step is covered. The offline optimum is evaluated on the same
sequence: it employs the cheapest applicant seen so far at every step.
"""

import heapq
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence

import numpy as np

from hiring_simulator.data_store import Contract, EpisodeResult, EpisodeStore
from hiring_simulator.distributions import Distribution, RngStream
from hiring_simulator.errors import CoverageViolation, DomainError
from hiring_simulator.models import SimulationReport
from hiring_simulator.policies import Policy

logger = logging.getLogger("hiring.engine")

PolicyFactory = Callable[[], Policy]


class Timeline:
    """Contracts booked so far on the horizon 1..n."""

    def __init__(self, n: int):
        if n < 1:
            raise DomainError(f"horizon must be positive, got {n}")
        self.n = n
        self.contracts: List[Contract] = []
        self.coverage_frontier = 0
        self._active_ends: List[int] = []

    def book(self, start: int, duration: int, unit_cost: float) -> Contract:
        if duration < 1:
            raise DomainError(f"contract duration must be positive, got {duration}")
        contract = Contract(start, duration, unit_cost)
        self.contracts.append(contract)
        self.coverage_frontier = max(self.coverage_frontier, contract.end)
        heapq.heappush(self._active_ends, contract.end)
        return contract

    def covers(self, step: int) -> bool:
        return self.coverage_frontier >= step

    def concurrency(self, step: int) -> int:
        """Number of contracts active at ``step``; steps must be queried in order."""
        while self._active_ends and self._active_ends[0] < step:
            heapq.heappop(self._active_ends)
        return len(self._active_ends)

    def total_cost(self, truncate_at_n: bool = False) -> float:
        horizon = self.n if truncate_at_n else None
        return math.fsum(contract.booked_cost(horizon) for contract in self.contracts)


def prophet_cost(costs: Sequence[float]) -> float:
    """Sum over steps of the running minimum of the costs."""
    return float(np.minimum.accumulate(np.asarray(costs, dtype=float)).sum())


def run_sequence(
    policy: Policy,
    costs: Sequence[float],
    truncate_at_n: bool = False,
) -> EpisodeResult:
    """
    Run a policy on a fixed cost sequence.

    Args:
        policy: A freshly initialized policy for horizon len(costs)
        costs: x_1 .. x_n
        truncate_at_n: Bill contracts only up to step n

    Returns:
        The paired outcome of the policy and the offline optimum

    Raises:
        CoverageViolation: If a step is uncovered after the policy's decision,
            or the policy stops before the horizon is covered
    """
    n = len(costs)
    timeline = Timeline(n)
    max_concurrency = 0
    for i in range(1, n + 1):
        x = float(costs[i - 1])
        decision = policy.step(i, x)
        if decision.duration > 0:
            timeline.book(i, decision.duration, x)
        if not timeline.covers(i):
            raise CoverageViolation(i, f"step {i} of {n} is not covered (x={x:.6g})")
        max_concurrency = max(max_concurrency, timeline.concurrency(i))
        if decision.stop:
            if not timeline.covers(n):
                raise CoverageViolation(
                    timeline.coverage_frontier + 1,
                    f"policy stopped at step {i} with coverage only through "
                    f"{timeline.coverage_frontier} of {n}",
                )
            break

    return EpisodeResult(
        alg_cost=timeline.total_cost(truncate_at_n),
        opt_cost=prophet_cost(costs),
        hires=len(timeline.contracts),
        max_concurrency=max_concurrency,
        contracts=tuple(timeline.contracts),
    )


def run_episode(
    policy: Policy,
    distribution: Distribution,
    n: int,
    rng: RngStream,
    truncate_at_n: bool = False,
) -> EpisodeResult:
    """
    Draw n costs from ``distribution`` and run the policy on them.

    Args:
        policy: A freshly initialized policy for horizon n (or horizon-unknown mode)
        distribution: Cost law
        n: Horizon
        rng: Stream owned by this episode
        truncate_at_n: Bill contracts only up to step n

    Returns:
        EpisodeResult with alg_cost, opt_cost, hires and max_concurrency
    """
    if n < 1:
        raise DomainError(f"horizon must be positive, got {n}")
    costs = distribution.sample_many(rng, n)
    return run_sequence(policy, costs, truncate_at_n)


def run_batch(
    policy_factory: PolicyFactory,
    distribution: Distribution,
    n: int,
    reps: int,
    seed: int,
    truncate_at_n: bool = False,
    workers: int = 1,
    policy_label: Optional[str] = None,
    distribution_label: Optional[str] = None,
) -> SimulationReport:
    """
    Run ``reps`` independent episodes on streams (seed, 0 .. reps-1).

    The policy and the optimum share each episode's sequence, so the ratio
    of means is a paired estimator.

    Args:
        policy_factory: Returns a fresh policy for each episode
        distribution: Cost law
        n: Horizon
        reps: Number of episodes
        seed: Batch seed
        truncate_at_n: Bill contracts only up to step n
        workers: Episodes run concurrently on this many threads
        policy_label: Name written into the report
        distribution_label: Name written into the report

    Returns:
        SimulationReport, identical for identical arguments regardless of workers

    Raises:
        CoverageViolation: Tagged with the seed and stream that produced it
    """
    if reps < 1:
        raise DomainError(f"replications must be positive, got {reps}")
    policy_label = policy_label or getattr(policy_factory, "label", "policy")
    distribution_label = distribution_label or distribution.kind
    logger.info(
        f"Running {reps} episodes of {policy_label} on {distribution_label}, n={n}, seed={seed}"
    )
    store = EpisodeStore(reps)

    def run_stream(stream: int) -> None:
        try:
            result = run_episode(
                policy_factory(), distribution, n, RngStream(seed, stream), truncate_at_n
            )
        except CoverageViolation as violation:
            logger.error(f"Coverage violation in stream {stream}: {violation}")
            raise violation.with_origin(seed, stream) from violation
        store.record(stream, result)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for _ in pool.map(run_stream, range(reps)):
                pass
    else:
        for stream in range(reps):
            run_stream(stream)

    report = store.summarize(policy_label, distribution_label, n, seed, truncate_at_n)
    logger.info(
        f"Finished {policy_label} n={n}: ratio={report.ratio_of_means:.4f}, "
        f"max concurrency={report.max_concurrency}"
    )
    return report
