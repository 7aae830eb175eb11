import math
from typing import List

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from hiring_simulator.distributions import (
    Distribution,
    Empirical,
    Exponential,
    Pareto,
    RngStream,
    Uniform01,
    from_spec,
)
from hiring_simulator.errors import DomainError, ZeroMassError
from hiring_simulator.models import parse_distribution_spec


def test_same_seed_and_stream_replay_the_same_draws(exponential: Exponential) -> None:
    first = exponential.sample_many(RngStream(7, 0), 100)
    second = exponential.sample_many(RngStream(7, 0), 100)
    np.testing.assert_array_equal(first, second)
    assert Uniform01().sample(RngStream(7, 0)) == Uniform01().sample(RngStream(7, 0))


def test_distinct_streams_differ() -> None:
    a = RngStream(7, 0).uniforms(16)
    b = RngStream(7, 1).uniforms(16)
    assert not np.array_equal(a, b)


def test_rng_stream_rejects_out_of_range_seeds() -> None:
    with pytest.raises(DomainError):
        RngStream(-1, 0)
    with pytest.raises(DomainError):
        RngStream(0, 2**64)


def test_samples_stay_in_support(all_laws: List[Distribution]) -> None:
    for law in all_laws:
        draws = law.sample_many(RngStream(3, 5), 2000)
        assert draws.min() >= 0.0
        assert draws.max() <= law.support_upper
    assert 0.0 <= Uniform01().sample(RngStream(11, 0)) <= 1.0


def test_cdf_values() -> None:
    assert Uniform01().cdf(0.3) == pytest.approx(0.3)
    assert Exponential(1.0).cdf(math.log(2)) == pytest.approx(0.5)
    assert Pareto(3.0, 1.0).cdf(2.0) == pytest.approx(7 / 8)


def test_cdf_is_zero_below_the_origin(all_laws: List[Distribution]) -> None:
    for law in all_laws:
        assert law.cdf(-1.0) == 0.0


def test_cdf_accepts_arrays(exponential: Exponential) -> None:
    values = exponential.cdf(np.array([0.0, math.log(2), math.log(4)]))
    np.testing.assert_allclose(values, [0.0, 0.5, 0.75])


def test_quantile_values() -> None:
    assert Uniform01().quantile(0.25) == 0.25
    assert Exponential(1.0).quantile(0.5) == pytest.approx(math.log(2), abs=1e-12)
    assert Exponential(1.0).quantile(1.0) == math.inf
    assert Uniform01().quantile(1.0) == 1.0


@pytest.mark.parametrize("q", [0.0, -0.1, 1.5])
def test_quantile_outside_unit_interval_is_rejected(q: float) -> None:
    with pytest.raises(DomainError):
        Exponential(1.0).quantile(q)


def test_quantile_inverts_cdf(all_laws: List[Distribution]) -> None:
    for law in all_laws:
        for q in np.arange(1, 100) / 100:
            assert float(law.cdf(law.quantile(float(q)))) == pytest.approx(q, abs=1e-9)


def test_numeric_quantile_matches_closed_forms(exponential: Exponential, pareto: Pareto) -> None:
    for q in (0.01, 0.3, 0.5, 0.9, 0.999):
        assert exponential.numeric_quantile(q) == pytest.approx(exponential.quantile(q), abs=1e-9)
        assert pareto.numeric_quantile(q) == pytest.approx(pareto.quantile(q), rel=1e-9)


def test_empirical_quantile_is_smallest_point_reaching_the_level(empirical: Empirical) -> None:
    assert empirical.quantile(1.0) == pytest.approx(0.95)
    assert empirical.quantile(1 / 7) == pytest.approx(0.1)


def test_conditional_expectations() -> None:
    assert Uniform01().conditional_expectation(0.25, 0.5) == pytest.approx(0.375)
    assert Uniform01().conditional_expectation(0.0, 1.0) == pytest.approx(0.5)
    assert Exponential(1.0).conditional_expectation(0.0, math.inf) == pytest.approx(1.0)
    assert Pareto(3.0, 1.0).conditional_expectation(-math.inf, math.inf) == pytest.approx(1.5)


def test_conditional_expectation_rejects_empty_and_null_intervals() -> None:
    with pytest.raises(DomainError):
        Uniform01().conditional_expectation(0.5, 0.5)
    with pytest.raises(ZeroMassError):
        Uniform01().conditional_expectation(2.0, 3.0)
    with pytest.raises(ZeroMassError):
        Pareto(3.0, 1.0).conditional_expectation(0.0, 0.5)


def test_quantile_bands_reassemble_the_mean(all_laws: List[Distribution]) -> None:
    for law in all_laws:
        total = 0.0
        for r in range(10):
            lo = law.quantile(2.0 ** -(r + 1))
            hi = law.quantile(2.0**-r)
            total += law.mass(lo, hi) * law.conditional_expectation(lo, hi)
        bottom = law.quantile(2.0**-10)
        total += law.mass(-math.inf, bottom) * law.conditional_expectation(-math.inf, bottom)
        assert total == pytest.approx(law.mean(), rel=1e-6)


def test_numeric_partial_expectation_matches_closed_forms(
    exponential: Exponential, pareto: Pareto, empirical: Empirical
) -> None:
    assert exponential.numeric_partial_expectation(0.2, 3.0) == pytest.approx(
        exponential.partial_expectation(0.2, 3.0), rel=1e-8
    )
    assert pareto.numeric_partial_expectation(1.2, 3.0) == pytest.approx(
        pareto.partial_expectation(1.2, 3.0), rel=1e-8
    )
    assert empirical.numeric_partial_expectation(0.1, 0.35) == pytest.approx(
        empirical.partial_expectation(0.1, 0.35), rel=1e-6
    )


def test_survival_power_integral_closed_forms() -> None:
    uniform = Uniform01()
    for m in range(1, 65):
        assert uniform.survival_power_integral(m) == pytest.approx(1 / (m + 1))
    assert Exponential(1.0).survival_power_integral(2) == pytest.approx(0.5)
    assert Exponential(2.0).survival_power_integral(3) == pytest.approx(1 / 6)
    assert Pareto(3.0, 1.0).survival_power_integral(1) == pytest.approx(1.5)


def test_numeric_survival_power_integral_agrees(exponential: Exponential) -> None:
    for m in (1, 2, 5, 16):
        assert exponential.numeric_survival_power_integral(m) == pytest.approx(
            1 / m, rel=1e-6
        )
        assert Uniform01().numeric_survival_power_integral(m) == pytest.approx(
            1 / (m + 1), rel=1e-6
        )


def test_empirical_survival_power_integral_is_the_mean_at_one(empirical: Empirical) -> None:
    assert empirical.survival_power_integral(1) == pytest.approx(empirical.mean(), rel=1e-12)


def test_survival_power_rejects_nonpositive_powers() -> None:
    with pytest.raises(DomainError):
        Uniform01().survival_power_integral(0)


@pytest.mark.tier("standard")
def test_samples_follow_the_cdf(all_laws: List[Distribution]) -> None:
    for stream, law in enumerate(all_laws):
        draws = law.sample_many(RngStream(2024, stream), 10**6)
        result = stats.kstest(draws, law.cdf)
        assert result.statistic < 0.005


def test_constructors_reject_invalid_parameters() -> None:
    with pytest.raises(DomainError):
        Exponential(0.0)
    with pytest.raises(DomainError):
        Pareto(1.0, 1.0)
    with pytest.raises(DomainError):
        Empirical([0.3, 0.3])


def test_specs_build_the_matching_law() -> None:
    law = from_spec(parse_distribution_spec({"kind": "exponential", "params": {"rate": 2}}))
    assert isinstance(law, Exponential)
    assert law.mean() == pytest.approx(0.5)
    law = from_spec(parse_distribution_spec('{"kind": "pareto", "params": {"shape": 3}}'))
    assert isinstance(law, Pareto)
    law = from_spec(parse_distribution_spec({"kind": "empirical", "params": {"values": [2, 1]}}))
    assert isinstance(law, Empirical)
    assert law.support_upper == 2.0


def test_invalid_specs_fail_validation() -> None:
    with pytest.raises(ValidationError):
        parse_distribution_spec({"kind": "pareto", "params": {"shape": 0.5}})
    with pytest.raises(ValidationError):
        parse_distribution_spec({"kind": "uniform01", "params": {"rate": 1}})
    with pytest.raises(ValidationError):
        parse_distribution_spec({"kind": "empirical", "params": {"values": [1.0]}})
