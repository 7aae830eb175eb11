"""
Threshold-evolution chains.

M-type chains walk levels 0..k: level 0 moves up surely, level j moves up
with probability p_j and down otherwise, and k absorbs. N-type chains have
two rows of states A_0..A_k and B_0..B_k: A_0 goes to B_0, A_j goes to B_j
with probability p_j and to A_{j-1} otherwise, B_j goes to B_{j+1} or
A_{j+1} with probability 1/2 each, and B_k absorbs. The hatted chains use a
constant p_j = p; the plain ones use the probabilities induced by uniform
costs.

Closed forms are written against plain arithmetic so they evaluate in
floats, Fractions or mpmath numbers alike.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, List, Tuple

import mpmath
import numpy as np

from hiring_simulator.distributions import RngStream
from hiring_simulator.errors import DomainError, StepLimitError
from hiring_simulator.models import ChainSpec, ChainStats

logger = logging.getLogger("hiring.markov")

Real = Any  # float, Fraction or mpmath.mpf

EXTENDED_PRECISION_BITS = 113
DEFAULT_STEP_LIMIT = 10**9
DEFAULT_CHUNK_SIZE = 100_000


def _check_mhat(p: Real) -> None:
    if not 0.5 < p <= 1:
        raise DomainError(f"M_hat needs 1/2 < p <= 1, got p={p}")


def _check_nhat(p: Real) -> None:
    if not 3 * p > 1 or p > 1:
        raise DomainError(f"N_hat needs 1/3 < p <= 1, got p={p}")


def _check_levels(k: int) -> None:
    if k < 1:
        raise DomainError(f"level count must be positive, got k={k}")


def mhat_visits(p: Real, k: int) -> List[Real]:
    """
    Expected visits v_0 .. v_k of the chain M_hat(p, k) started in 0.

    Args:
        p: Up probability, 1/2 < p <= 1
        k: Absorbing level

    Returns:
        [v_0, ..., v_k]; v_k = 1 and every entry is at most 1 / (2p - 1)
    """
    _check_mhat(p)
    _check_levels(k)
    if k == 1:
        return [p / p, p / p]
    ratio = (1 - p) / p
    visits = [(ratio - ratio ** (k - j)) / (2 * p - 1) + 1 / p for j in range(1, k)]
    visits.append(p / p)
    return [1 + (1 - p) * visits[0]] + visits


def mhat_visit_bound(p: Real) -> Real:
    _check_mhat(p)
    return 1 / (2 * p - 1)


def mhat_total_transitions(p: Real, k: int) -> Real:
    """Expected number of transitions until absorption (total visits minus one)."""
    return sum(mhat_visits(p, k)) - 1


@dataclass(frozen=True)
class NHatProfile:
    """Expected A->B transition counts a_j (from A_j) and b_j (from B_j)."""

    h: Real
    a: List[Real]
    b: List[Real]


def nhat_h(p: Real, k: int) -> Real:
    """
    Closed form of the expected A->B transitions of N_hat(p, k) from A_0.

    Defined for every integer k, which the ratio sweeps rely on for tiny
    horizons.
    """
    _check_nhat(p)
    d = 3 * p - 1
    beta = 2 * (1 - p) / (1 + p)
    return k * p / d - 4 * p * (1 - 2 * p) / d**2 + ((1 - p) / d) ** 2 * beta**k


def nhat_ab_transitions(p: Real, k: int) -> NHatProfile:
    """
    Expected number of A->B transitions of N_hat(p, k).

    Args:
        p: A_j -> B_j probability, p > 1/3
        k: Absorbing level

    Returns:
        NHatProfile with h = a_0 and the profiles a_0..a_k, b_0..b_k
    """
    _check_nhat(p)
    _check_levels(k)
    d = 3 * p - 1
    beta = 2 * (1 - p) / (1 + p)
    tail = beta**k * (1 - p) ** 2 / d**2
    a = [
        (k - j + 2) * p / d - beta**j * 2 * p * (1 - p) / d**2 + tail
        for j in range(k + 1)
    ]
    b = [(k - j) * p / d - beta**j * (1 - p) ** 2 / d**2 + tail for j in range(k + 1)]
    return NHatProfile(h=a[0], a=a, b=b)


def nhat_bj_transitions(p: Real) -> Tuple[Real, Real]:
    """
    Bounds for a single level j of N_hat(p, k).

    Returns:
        (bound on expected B_j -> A_{j+1} transitions, bound on expected visits to B_j),
        i.e. (p / (3p - 1), 2p / (3p - 1))
    """
    _check_nhat(p)
    return p / (3 * p - 1), 2 * p / (3 * p - 1)


def _relative(residual: Real, reference: Real) -> Real:
    return abs(residual) / max(abs(reference), 1)


def mhat_residual(p: float, k: int) -> float:
    """
    Largest relative residual of the visit balance equations of M_hat(p, k).

    Evaluated in extended precision: v_j must equal [j = 0] plus the expected
    inflow from the transient states.
    """
    with mpmath.workprec(EXTENDED_PRECISION_BITS):
        q = mpmath.mpf(p)
        v = mhat_visits(q, k)
        inflow = [mpmath.mpf(0)] * (k + 1)
        inflow[0] += 1
        inflow[1] += v[0]
        for i in range(1, k):
            inflow[i + 1] += q * v[i]
            inflow[i - 1] += (1 - q) * v[i]
        worst = max(_relative(v[j] - inflow[j], v[j]) for j in range(k + 1))
        return float(worst)


def nhat_residual(p: float, k: int) -> float:
    """Largest relative residual of the a_j, b_j recurrences, in extended precision."""
    with mpmath.workprec(EXTENDED_PRECISION_BITS):
        q = mpmath.mpf(p)
        profile = nhat_ab_transitions(q, k)
        a, b = profile.a, profile.b
        residuals = [_relative(b[k], 1), _relative(a[0] - 1 - b[0], a[0])]
        for j in range(k):
            residuals.append(_relative(b[j] - (b[j + 1] + a[j + 1]) / 2, b[j]))
        for j in range(1, k + 1):
            residuals.append(_relative(a[j] - q * (b[j] + 1) - (1 - q) * a[j - 1], a[j]))
        return float(max(residuals))


# -- simulation -------------------------------------------------------------


@dataclass(frozen=True)
class _Chain:
    """Two-branch transition structure: from s go to first[s] w.p. prob[s], else second[s]."""

    labels: List[str]
    first: np.ndarray
    second: np.ndarray
    prob: np.ndarray
    start: int
    absorbing: int
    is_a: np.ndarray
    is_b: np.ndarray
    level: np.ndarray


def uniform_hire_probability(level: int, c: float = 1.0) -> float:
    """
    Probability that some of ceil(c 2^level) uniform costs falls below 2^-level.

    With c = 1 this is the up probability of the chain M; level 0 is certain.
    """
    if level == 0:
        return 1.0
    trials = math.ceil(c * 2**level)
    return -math.expm1(trials * math.log1p(-(2.0**-level)))


def _level_probabilities(spec: ChainSpec) -> List[float]:
    k = spec.k
    match spec.family:
        case "M_hat" | "N_hat":
            assert spec.p is not None
            return [1.0] + [spec.p] * k
        case "M":
            return [uniform_hire_probability(j) for j in range(k + 1)]
        case "N":
            return [uniform_hire_probability(j, spec.c) for j in range(k + 1)]
    raise DomainError(f"unknown chain family {spec.family}")


def _build_chain(spec: ChainSpec) -> _Chain:
    k = spec.k
    up = _level_probabilities(spec)
    if spec.family in ("M_hat", "M"):
        states = k + 1
        first = np.array([min(j + 1, k) for j in range(states)])
        second = np.array([max(j - 1, 0) for j in range(states)])
        none = np.zeros(states, dtype=bool)
        return _Chain(
            labels=[str(j) for j in range(states)],
            first=first,
            second=second,
            prob=np.array(up),
            start=0,
            absorbing=k,
            is_a=none,
            is_b=none,
            level=np.arange(states),
        )

    # A_j is state j, B_j is state k + 1 + j
    states = 2 * (k + 1)
    first = np.zeros(states, dtype=np.int64)
    second = np.zeros(states, dtype=np.int64)
    prob = np.zeros(states)
    for j in range(k + 1):
        first[j] = k + 1 + j
        second[j] = max(j - 1, 0)
        prob[j] = up[j]
        b = k + 1 + j
        first[b] = k + 1 + min(j + 1, k)
        second[b] = min(j + 1, k)
        prob[b] = 0.5
    is_a = np.arange(states) <= k
    return _Chain(
        labels=[f"A{j}" for j in range(k + 1)] + [f"B{j}" for j in range(k + 1)],
        first=first,
        second=second,
        prob=prob,
        start=0,
        absorbing=2 * k + 1,
        is_a=is_a,
        is_b=~is_a,
        level=np.concatenate([np.arange(k + 1), np.arange(k + 1)]),
    )


def simulate_chain(
    spec: ChainSpec,
    reps: int,
    rng: RngStream,
    step_limit: int = DEFAULT_STEP_LIMIT,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> ChainStats:
    """
    Monte Carlo estimate of visit and transition counts until absorption.

    All replications of a chunk advance together, one transition per
    iteration, so the work is vectorised across walkers.

    Args:
        spec: Chain family and parameters
        reps: Number of walks
        rng: Random stream
        step_limit: Maximum number of transitions of any walk
        chunk_size: Walks simulated together

    Returns:
        ChainStats with per-state means and standard errors

    Raises:
        StepLimitError: If a walk is not absorbed within step_limit transitions
    """
    if reps < 1:
        raise DomainError(f"replications must be positive, got {reps}")
    chain = _build_chain(spec)
    states = len(chain.labels)
    n_family = spec.family in ("N_hat", "N")
    logger.info(f"Simulating {reps} walks of {spec.family}(p={spec.p}, k={spec.k})")

    visit_sum = np.zeros(states)
    visit_sq = np.zeros(states)
    transitions_sum = transitions_sq = 0.0
    ab_sum = ab_sq = 0.0
    bj_sum = np.zeros(spec.k + 1)

    done = 0
    while done < reps:
        size = min(chunk_size, reps - done)
        visits = np.zeros((size, states), dtype=np.int64)
        visits[:, chain.start] = 1
        transitions = np.zeros(size, dtype=np.int64)
        ab = np.zeros(size, dtype=np.int64)
        rows = np.arange(size)
        current = np.full(size, chain.start, dtype=np.int64)
        steps = 0
        while rows.size:
            steps += 1
            if steps > step_limit:
                raise StepLimitError(
                    f"{rows.size} walks of {spec.family} not absorbed after {step_limit} steps"
                )
            go_first = rng.uniforms(rows.size) < chain.prob[current]
            following = np.where(go_first, chain.first[current], chain.second[current])
            visits[rows, following] += 1
            transitions[rows] += 1
            if n_family:
                ab[rows] += chain.is_a[current] & chain.is_b[following]
                crossing = chain.is_b[current] & chain.is_a[following]
                bj_sum += np.bincount(chain.level[current[crossing]], minlength=spec.k + 1)
            alive = following != chain.absorbing
            rows = rows[alive]
            current = following[alive]

        visit_sum += visits.sum(axis=0)
        visit_sq += (visits.astype(float) ** 2).sum(axis=0)
        transitions_sum += float(transitions.sum())
        transitions_sq += float((transitions.astype(float) ** 2).sum())
        ab_sum += float(ab.sum())
        ab_sq += float((ab.astype(float) ** 2).sum())
        done += size
        logger.debug(f"{done}/{reps} walks done, longest {steps} steps")

    def mean_and_stderr(total: Any, squares: Any) -> Tuple[Any, Any]:
        mean = total / reps
        if reps < 2:
            return mean, np.zeros_like(mean) if isinstance(mean, np.ndarray) else 0.0
        variance = np.maximum(squares / reps - mean**2, 0.0) * reps / (reps - 1)
        return mean, np.sqrt(variance / reps)

    visits_mean, visits_stderr = mean_and_stderr(visit_sum, visit_sq)
    transitions_mean, transitions_stderr = mean_and_stderr(transitions_sum, transitions_sq)
    stats = dict(
        family=spec.family,
        p=spec.p,
        k=spec.k,
        reps=reps,
        state_labels=chain.labels,
        visits_mean=[float(v) for v in visits_mean],
        visits_stderr=[float(v) for v in visits_stderr],
        transitions_mean=float(transitions_mean),
        transitions_stderr=float(transitions_stderr),
    )
    if n_family:
        ab_mean, ab_stderr = mean_and_stderr(ab_sum, ab_sq)
        stats.update(
            ab_transitions_mean=float(ab_mean),
            ab_transitions_stderr=float(ab_stderr),
            bj_transitions_mean=[float(v) / reps for v in bj_sum[: spec.k]],
        )
    return ChainStats(**stats)
