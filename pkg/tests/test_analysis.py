import math
from fractions import Fraction
from typing import List

import numpy as np
import pytest

from hiring_simulator.analysis import (
    ETA,
    alg1_constant,
    alg2_ratio_sweep,
    alg3_constant,
    alg4_constant,
    alpha,
    alpha_band_check,
    ceil_log2,
    floor_log2,
    g_monotone_check,
    gilbert_mosteller_curve_array,
    gilbert_mosteller_lower_curve,
    gm_threshold,
    harmonic,
    harmonic_array,
    harmonic_fraction,
    opt_general,
    opt_lower_bound_quantile_bands,
    opt_lower_bound_survival_powers,
    opt_uniform,
    relaxation_curve_array,
    sequential_expected_cost,
    sequential_grid_costs,
    sequential_sandwich_check,
    standard_bound_reports,
    verify_ratio_constants,
)
from hiring_simulator.distributions import Distribution, Exponential, Pareto, Uniform01
from hiring_simulator.errors import DomainError
from hiring_simulator.models import BoundReport


@pytest.fixture
def continuous_laws(
    uniform: Uniform01, exponential: Exponential, pareto: Pareto
) -> List[Distribution]:
    return [uniform, exponential, pareto]


def test_integer_logarithms() -> None:
    assert [ceil_log2(n) for n in (1, 2, 3, 4, 5, 1024, 1025)] == [0, 1, 2, 2, 3, 10, 11]
    assert [floor_log2(n) for n in (1, 2, 3, 4, 5, 1024, 1025)] == [0, 1, 1, 2, 2, 10, 10]
    with pytest.raises(DomainError):
        ceil_log2(0)


def test_harmonic_numbers() -> None:
    assert harmonic_fraction(3) == Fraction(11, 6)
    assert harmonic(4) == pytest.approx(25 / 12)
    assert harmonic(0) == 0.0
    values = harmonic_array(20_000)
    assert values[4] == pytest.approx(25 / 12, rel=1e-12)
    assert values[20_000] == pytest.approx(harmonic(20_000), rel=1e-12)


def test_offline_optimum_closed_forms() -> None:
    assert opt_uniform(1) == pytest.approx(0.5)
    assert opt_uniform(100) == pytest.approx(opt_general(Uniform01(), 100), rel=1e-12)
    assert opt_general(Exponential(1.0), 50) == pytest.approx(harmonic(50), rel=1e-12)
    assert opt_uniform(20_000) == pytest.approx(harmonic(20_001) - 1, rel=1e-12)


def test_opt_lower_bounds_hold(continuous_laws: List[Distribution]) -> None:
    for law in continuous_laws:
        for n in (5, 64, 1000):
            opt = opt_general(law, n)
            assert opt_lower_bound_quantile_bands(law, n) <= opt + 1e-9
            assert opt_lower_bound_survival_powers(law, n) <= opt + 1e-9


def test_quantile_band_bound_needs_a_few_levels() -> None:
    with pytest.raises(DomainError):
        opt_lower_bound_quantile_bands(Uniform01(), 4)
    # n = 5 and n = 8 both give a single band above the bottom one
    single_band = 0.375 + ETA * 0.25
    assert opt_lower_bound_quantile_bands(Uniform01(), 5) == pytest.approx(single_band)
    assert opt_lower_bound_quantile_bands(Uniform01(), 8) == pytest.approx(single_band)


def test_gilbert_mosteller_curve() -> None:
    curve = gilbert_mosteller_curve_array(10_000)
    assert curve[-1] < 1.8
    assert np.all(np.diff(curve) >= -1e-12)
    for n in (1, 10, 500):
        assert curve[n - 1] == pytest.approx(gilbert_mosteller_lower_curve(n), rel=1e-10)


def test_exact_relaxation_curve() -> None:
    curve = relaxation_curve_array(10_000)
    # one and two slots: the relaxation is as good as the optimal online policy
    assert curve[0] == pytest.approx(1.0, rel=1e-12)
    assert curve[1] == pytest.approx(1.05, rel=1e-12)
    assert curve[2] == pytest.approx((0.5 + 0.375 + 0.375 - 0.375**2 / 2) / (13 / 12), rel=1e-12)
    assert np.all(curve <= gilbert_mosteller_curve_array(10_000) + 1e-12)
    with pytest.raises(DomainError):
        relaxation_curve_array(0)


def test_gm_thresholds() -> None:
    assert [gm_threshold(t) for t in range(3)] == [0.0, 0.5, 0.625]
    assert gm_threshold(500) < 1.0
    with pytest.raises(DomainError):
        gm_threshold(-1)


def test_sequential_expected_costs() -> None:
    table = sequential_expected_cost(Uniform01(), 3)
    assert table.cost(0) == 0.0
    assert table.cost(1) == 0.5
    assert table.cost(3) == pytest.approx(1.18359375, abs=1e-15)
    assert table.thresholds == pytest.approx([0.5, 0.4375])
    assert sequential_expected_cost(Exponential(1.0), 1).cost(1) == pytest.approx(1.0)


def test_general_recursion_agrees_with_the_uniform_shortcut() -> None:
    law = Uniform01()
    previous = 0.5
    for m in range(2, 201):
        tau = previous / (m - 1)
        below = law.partial_expectation(-math.inf, tau)
        previous = m * below + (0.5 - below) + (1 - tau) * previous
    assert sequential_expected_cost(law, 200).cost(200) == pytest.approx(previous, rel=1e-12)


def test_sequential_grid_induction() -> None:
    optimal, threshold = sequential_grid_costs(6, 2000)
    assert optimal == pytest.approx(threshold, abs=1e-4)
    assert threshold == pytest.approx(sequential_expected_cost(Uniform01(), 6).cost(6), abs=1e-4)


def test_sequential_sandwich() -> None:
    table = sequential_expected_cost(Uniform01(), 1000)
    for n in (1, 10, 100, 1000):
        assert sequential_sandwich_check(n, table).satisfied


def test_ratio_constants() -> None:
    assert alg1_constant() == pytest.approx(8.12163, abs=1e-4)
    assert alg3_constant() == pytest.approx(6.0515, abs=1e-3)
    assert alg4_constant(3) == 48.0
    assert alg4_constant(2) == 48.0
    assert alg4_constant(5) == 60.0
    assert ETA == pytest.approx(2.5 - 55 / (6 * math.e**2))


def test_log_over_harmonic_peaks_early() -> None:
    reports = {report.name: report for report in verify_ratio_constants(1000)}
    peak = reports["log_over_harmonic"]
    assert peak.value == pytest.approx(1.140, abs=1e-3)
    assert peak.n is not None and 8 <= peak.n <= 14
    assert all(report.satisfied for report in reports.values())


@pytest.mark.tier("standard")
def test_constants_hold_over_a_million_horizons() -> None:
    reports = verify_ratio_constants(10**6)
    assert all(report.satisfied for report in reports)
    ratio, at = alg2_ratio_sweep(10**6)
    assert ratio == pytest.approx(2.957, abs=0.01)
    assert 1 <= at <= 10**6


def test_g_is_nondecreasing(continuous_laws: List[Distribution]) -> None:
    for law in continuous_laws:
        upper = min(law.quantile(0.999), 20.0)
        assert g_monotone_check(law, np.linspace(0.0, upper, 200)).satisfied


def test_alpha_bands() -> None:
    assert alpha(2, 9) == pytest.approx(3.81, rel=0.01)
    report = alpha_band_check(2, 9)
    assert report.satisfied
    assert report.bound == pytest.approx(2 * ETA)
    for n in (17, 100, 1000):
        for r in range(1, ceil_log2(n) - 1):
            assert alpha_band_check(r, n).satisfied
    with pytest.raises(DomainError):
        alpha(0, 9)
    with pytest.raises(DomainError):
        alpha(3, 9)


def test_bound_reports_are_all_satisfied() -> None:
    reports = standard_bound_reports(sweep_max=1000, horizons=(8, 64))
    failed = [report.name for report in reports if not report.satisfied]
    assert failed == []
    assert all(len(report.csv_row()) == len(BoundReport.CSV_HEADER) for report in reports)
