import math
from typing import List, Tuple

import pytest

from hiring_simulator.analysis import harmonic
from hiring_simulator.data_store import Contract, EpisodeResult, EpisodeStore
from hiring_simulator.distributions import Distribution, Exponential, RngStream, Uniform01
from hiring_simulator.engine import Timeline, prophet_cost, run_batch, run_episode, run_sequence
from hiring_simulator.errors import CoverageViolation, DomainError
from hiring_simulator.models import (
    Alg1Spec,
    Alg2Spec,
    Alg3Spec,
    Alg4Spec,
    Alg5Spec,
    DpOptimalSpec,
    PolicySpec,
    SimulationReport,
)
from hiring_simulator.policies import NO_HIRE, Decision, PolicyFactory, ThresholdHalvingPolicy


class ScriptedPolicy:
    """Replays a fixed list of decisions."""

    def __init__(self, decisions: List[Decision]):
        self.decisions = list(decisions)

    def step(self, i: int, x: float) -> Decision:
        return self.decisions[i - 1]


class NeverHires:
    def step(self, i: int, x: float) -> Decision:
        return NO_HIRE


def test_contract_span_and_cost() -> None:
    contract = Contract(start=3, duration=4, unit_cost=0.5)
    assert contract.end == 6
    assert contract.booked_cost() == 2.0
    assert contract.booked_cost(horizon=4) == 1.0


def test_timeline_tracks_coverage_and_concurrency() -> None:
    timeline = Timeline(10)
    timeline.book(1, 3, 0.5)
    timeline.book(2, 5, 0.25)
    assert timeline.covers(6)
    assert not timeline.covers(7)
    assert timeline.concurrency(2) == 2
    assert timeline.concurrency(4) == 1
    assert timeline.concurrency(7) == 0
    assert timeline.total_cost() == pytest.approx(1.5 + 1.25)


def test_timeline_rejects_empty_contracts() -> None:
    with pytest.raises(DomainError):
        Timeline(5).book(1, 0, 0.1)
    with pytest.raises(DomainError):
        Timeline(0)


def test_prophet_takes_the_running_minimum() -> None:
    assert prophet_cost([0.9, 0.3, 0.5]) == pytest.approx(1.5)
    assert prophet_cost([0.5, 0.2, 0.7, 0.1]) == pytest.approx(1.0)


def test_single_step_threshold_halving_episode() -> None:
    result = run_sequence(ThresholdHalvingPolicy(1), [0.7])
    assert result.hires == 1
    assert result.alg_cost == pytest.approx(2.8)
    assert result.opt_cost == pytest.approx(0.7)
    assert result.max_concurrency == 1


def test_truncation_bills_only_up_to_the_horizon() -> None:
    costs = [0.5, 0.9, 0.9, 0.9]
    full = run_sequence(ScriptedPolicy([Decision(10, True)]), costs)
    truncated = run_sequence(ScriptedPolicy([Decision(10, True)]), costs, truncate_at_n=True)
    assert full.alg_cost == pytest.approx(5.0)
    assert truncated.alg_cost == pytest.approx(2.0)


def test_one_step_hires_pay_every_cost() -> None:
    costs = [0.4, 0.1, 0.8]
    result = run_sequence(ScriptedPolicy([Decision(1)] * 2 + [Decision(1, True)]), costs)
    assert result.alg_cost == pytest.approx(sum(costs))
    assert result.hires == 3


def test_uncovered_step_raises() -> None:
    with pytest.raises(CoverageViolation) as excinfo:
        run_sequence(NeverHires(), [0.5, 0.5])
    assert excinfo.value.step == 1


def test_stopping_short_of_the_horizon_raises() -> None:
    with pytest.raises(CoverageViolation) as excinfo:
        run_sequence(ScriptedPolicy([Decision(2, True)]), [0.5, 0.5, 0.5])
    assert excinfo.value.step == 3


def test_threshold_halving_covers_a_short_uniform_run() -> None:
    result = run_episode(ThresholdHalvingPolicy(10), Uniform01(), 10, RngStream(5, 0))
    assert result.max_concurrency >= 1
    assert result.hires >= 1


def test_batch_violation_is_tagged_with_its_origin() -> None:
    with pytest.raises(CoverageViolation) as excinfo:
        run_batch(NeverHires, Uniform01(), 4, reps=3, seed=11)
    assert excinfo.value.seed == 11
    assert excinfo.value.stream == 0
    assert "seed=11" in str(excinfo.value)


def test_batches_are_reproducible_across_worker_counts() -> None:
    law = Uniform01()
    factory = PolicyFactory(Alg1Spec(policy="alg1"), law, 64)
    serial = run_batch(factory, law, 64, reps=40, seed=99)
    again = run_batch(factory, law, 64, reps=40, seed=99)
    threaded = run_batch(factory, law, 64, reps=40, seed=99, workers=4)
    assert serial == again
    assert serial == threaded
    assert serial.policy == "alg1"


def test_single_replication_has_undefined_errors() -> None:
    law = Uniform01()
    report = run_batch(PolicyFactory(Alg1Spec(policy="alg1"), law, 16), law, 16, reps=1, seed=0)
    assert report.stderr_cost is None
    assert report.ratio_stderr is None
    row = report.csv_row()
    assert len(row) == len(SimulationReport.CSV_HEADER)
    assert row[SimulationReport.CSV_HEADER.index("stderr")] == "nan"


def test_sequential_policy_never_overlaps() -> None:
    law = Uniform01()
    report = run_batch(PolicyFactory(Alg5Spec(policy="alg5"), law, 100), law, 100, 200, 1)
    assert report.max_concurrency == 1


DOMINANCE_CASES: List[Tuple[PolicySpec, Distribution]] = [
    (Alg1Spec(policy="alg1"), Uniform01()),
    (Alg2Spec(policy="alg2"), Uniform01()),
    (Alg3Spec(policy="alg3"), Exponential(1.0)),
    (Alg4Spec(policy="alg4"), Exponential(1.0)),
    (Alg5Spec(policy="alg5"), Exponential(1.0)),
    (DpOptimalSpec(policy="dp_optimal"), Uniform01()),
]


@pytest.mark.parametrize("spec,law", DOMINANCE_CASES)
@pytest.mark.parametrize("truncate", [False, True])
def test_offline_optimum_never_exceeds_the_policy(
    spec: PolicySpec, law: Distribution, truncate: bool
) -> None:
    n = 40
    factory = PolicyFactory(spec, law, n)
    for stream in range(200):
        result = run_episode(factory(), law, n, RngStream(11, stream), truncate_at_n=truncate)
        assert result.opt_cost <= result.alg_cost + 1e-12, f"stream {stream}"


def test_store_rejects_duplicate_streams() -> None:
    store = EpisodeStore(2)
    store.record(0, EpisodeResult(1.0, 0.5, 1, 1))
    with pytest.raises(ValueError):
        store.record(0, EpisodeResult(1.0, 0.5, 1, 1))
    assert not store.is_complete()
    with pytest.raises(ValueError):
        store.summarize("p", "d", 1, 0)


def test_store_ratio_error_vanishes_for_proportional_costs() -> None:
    store = EpisodeStore(3)
    for stream, opt in enumerate([1.0, 2.0, 4.0]):
        store.record(stream, EpisodeResult(3 * opt, opt, 2, 1))
    report = store.summarize("p", "d", 5, 0)
    assert report.ratio_of_means == pytest.approx(3.0)
    assert report.ratio_stderr == pytest.approx(0.0, abs=1e-12)
    assert report.mean_hires == 2.0


def _opt_within(report: SimulationReport, expected: float, sigmas: float) -> bool:
    assert report.stderr_opt is not None
    return abs(report.mean_opt - expected) <= sigmas * report.stderr_opt


@pytest.mark.tier("standard")
def test_uniform_offline_optimum_matches_harmonic_sum() -> None:
    law = Uniform01()
    factory = PolicyFactory(Alg5Spec(policy="alg5"), law, 100)
    report = run_batch(factory, law, 100, reps=4000, seed=2)
    assert _opt_within(report, harmonic(101) - 1, 4.0)


@pytest.mark.tier("standard")
def test_exponential_offline_optimum_matches_harmonic_sum() -> None:
    law = Exponential(1.0)
    factory = PolicyFactory(Alg5Spec(policy="alg5"), law, 50)
    report = run_batch(factory, law, 50, reps=4000, seed=3)
    assert _opt_within(report, harmonic(50), 4.0)


@pytest.mark.tier("full")
def test_offline_optimum_at_acceptance_scale() -> None:
    law = Uniform01()
    report = run_batch(PolicyFactory(Alg5Spec(policy="alg5"), law, 100), law, 100, 10**5, 17)
    assert _opt_within(report, 4.19869, 3.0)
    assert math.isclose(harmonic(101) - 1, 4.19869, abs_tol=1e-5)
    law = Exponential(1.0)
    report = run_batch(PolicyFactory(Alg5Spec(policy="alg5"), law, 50), law, 50, 10**5, 18)
    assert _opt_within(report, 4.49921, 3.0)
