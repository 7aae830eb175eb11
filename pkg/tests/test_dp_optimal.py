import csv
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import pytest

from hiring_simulator.dp_optimal import (
    LowerEnvelope,
    compute_table,
    export_csv,
    grid_oracle,
    lower_bound_ratio,
    lower_envelope_integral,
    ratio_curve,
    riemann_envelope_integral,
    round_down,
)
from hiring_simulator.errors import DomainError, MalformedInputError, ResourceLimitError


def brute_round_down(value: Fraction, bound: int) -> Fraction:
    return max(Fraction(value.numerator * q // value.denominator, q) for q in range(1, bound + 1))


def test_round_down_keeps_small_denominators() -> None:
    assert round_down(Fraction(3, 7), 10) == Fraction(3, 7)
    assert round_down(Fraction(3, 7), None) == Fraction(3, 7)


def test_round_down_picks_the_lower_semiconvergent() -> None:
    assert round_down(Fraction(355, 113), 100) == Fraction(311, 99)
    assert round_down(Fraction(1, 3), 2) == Fraction(0)


@pytest.mark.parametrize(
    "value", [Fraction(355, 113), Fraction(1000003, 999983), Fraction(7, 97), Fraction(89, 144)]
)
def test_round_down_matches_exhaustive_search(value: Fraction) -> None:
    for bound in (1, 2, 5, 13, 50):
        rounded = round_down(value, bound)
        assert rounded <= value
        assert rounded.denominator <= bound
        assert rounded == brute_round_down(value, bound)


def test_round_down_rejects_bad_bounds() -> None:
    with pytest.raises(DomainError):
        round_down(Fraction(1, 3), 0)


def test_envelope_integrals() -> None:
    assert lower_envelope_integral([(1, Fraction(1, 2)), (2, 0)]) == Fraction(7, 8)
    assert lower_envelope_integral([(1, 0)], Fraction(1, 4)) == Fraction(7, 32)
    assert lower_envelope_integral([(3, 5)], 10) == Fraction(13, 2)
    assert lower_envelope_integral([(3, 5)], 1) == 1


def test_envelope_ignores_dominated_lines() -> None:
    lines = [(1, Fraction(2)), (2, Fraction(0)), (3, Fraction(5))]
    assert lower_envelope_integral(lines) == lower_envelope_integral(lines[1:2])


def test_envelope_rejects_malformed_line_sets() -> None:
    with pytest.raises(MalformedInputError):
        lower_envelope_integral([(2, 0), (2, 1)])
    with pytest.raises(MalformedInputError):
        lower_envelope_integral([])
    envelope = LowerEnvelope()
    envelope.add_line(2, 0)
    with pytest.raises(MalformedInputError):
        envelope.add_line(3, 0)


def test_envelope_matches_midpoint_rule() -> None:
    lines = [(1, Fraction(1, 2)), (2, Fraction(1, 5)), (5, Fraction(0)), (9, Fraction(-1, 10))]
    for cap in (None, Fraction(3, 5), Fraction(1, 10)):
        exact = float(lower_envelope_integral(lines, cap))
        assert riemann_envelope_integral(lines, cap) == pytest.approx(exact, abs=1e-6)


def test_small_table_values() -> None:
    table = compute_table(2, keep_full=True)
    assert table.entry(1, 0) == Fraction(1, 2)
    assert table.entry(2, 1) == Fraction(7, 16)
    assert table.entry(2, 0) == Fraction(7, 8)
    assert table.entry(2, 2) == 0
    assert lower_bound_ratio(table) == pytest.approx(21 / 20)
    assert lower_bound_ratio(table, 1) == pytest.approx(1.0)


def test_partial_table_only_answers_the_first_column() -> None:
    table = compute_table(3)
    assert not table.is_full
    assert table.entry(3, 0) == table.column0[3]
    with pytest.raises(DomainError):
        table.entry(3, 1)
    with pytest.raises(DomainError):
        table.float_rows()
    with pytest.raises(DomainError):
        table.entry(4, 0)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_table_agrees_with_grid_induction(n: int) -> None:
    exact = float(compute_table(n).column0[n])
    assert grid_oracle(n, 4000) == pytest.approx(exact, abs=1e-4)


def test_float_rows_are_converted_once_across_threads() -> None:
    table = compute_table(40, keep_full=True)
    with ThreadPoolExecutor(max_workers=8) as pool:
        views = list(pool.map(lambda _: table.float_rows(), range(32)))
    assert all(view is views[0] for view in views)
    assert views[0][2][1] == pytest.approx(float(table.entry(2, 1)))


def test_grid_induction_limits() -> None:
    with pytest.raises(DomainError):
        grid_oracle(7, 1000)
    with pytest.raises(DomainError):
        grid_oracle(3, 10)


def test_rounding_keeps_a_lower_bound() -> None:
    exact = compute_table(7, denominator_bound=None)
    bounded = compute_table(7, denominator_bound=2**30)
    for i in range(8):
        assert bounded.column0[i] <= exact.column0[i]
        assert bounded.column0[i].denominator <= 2**30
        assert float(exact.column0[i] - bounded.column0[i]) < 1e-6


def test_rows_satisfy_the_recursion_bounds() -> None:
    table = compute_table(8, keep_full=True)
    for i in range(1, 9):
        row = [table.entry(i, j) for j in range(i + 1)]
        # more coverage never costs more
        assert all(a >= b for a, b in zip(row, row[1:]))
        assert table.entry(i, 0) >= table.entry(i - 1, 0)


@pytest.mark.tier("standard")
def test_ratio_grows_with_the_horizon() -> None:
    curve = ratio_curve(compute_table(500))
    assert curve[0] == pytest.approx(1.0)
    assert all(b >= a for a, b in zip(curve, curve[1:]))
    assert curve[-1] < 2.2


@pytest.mark.tier("full")
def test_ratio_at_ten_thousand() -> None:
    assert lower_bound_ratio(compute_table(10_000)) >= 2.14


def test_export_writes_every_entry(tmp_path: Path) -> None:
    full = compute_table(3, keep_full=True)
    path = tmp_path / "table.csv"
    assert export_csv(full, str(path)) == 10
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["i", "j", "numerator", "denominator"]
    exported = {(int(i), int(j)): Fraction(int(p), int(q)) for i, j, p, q in rows[1:]}
    assert exported[(2, 1)] == Fraction(7, 16)
    assert exported[(3, 3)] == 0

    assert export_csv(compute_table(3), str(tmp_path / "column.csv")) == 4


def test_memory_limit_refuses_oversized_tables() -> None:
    with pytest.raises(ResourceLimitError):
        compute_table(100_000, keep_full=True, memory_limit_bytes=10**6)
    compute_table(4, memory_limit_bytes=10**6)


def test_horizon_must_be_positive() -> None:
    with pytest.raises(DomainError):
        compute_table(0)
    with pytest.raises(DomainError):
        lower_bound_ratio(compute_table(2), 3)
