"""
Exact optimal online cost for uniform costs on [0, 1].

C(i, j) is the expected cost of an optimal online policy with i steps to go
when the next j of them are already covered. With x the current cost,

    C(i, 0) = E[ min over 1 <= r <= i of  r x + C(i-1, r-1) ]
    C(i, j) = E[ min( C(i-1, j-1),  min over j < r <= i of  r x + C(i-1, r-1) ) ]

and C(i, i) = 0. Each expectation is the integral over [0, 1] of the lower
envelope of a set of lines, computed exactly in rationals. After every entry
is computed it is rounded down to the best rational approximation with a
bounded denominator, so C(n, 0) stays a valid lower bound.
"""

import bisect
import csv
import logging
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from hiring_simulator.analysis import harmonic_fraction
from hiring_simulator.errors import DomainError, MalformedInputError, ResourceLimitError
from hiring_simulator.models import DEFAULT_DENOMINATOR_BOUND

logger = logging.getLogger("hiring.dp")

Number = Union[int, Fraction]

# Rough size of one stored Fraction: two Python ints plus the object header.
_ENTRY_OVERHEAD_BYTES = 160
PROGRESS_INTERVAL = 500


def round_down(value: Fraction, max_denominator: Optional[int]) -> Fraction:
    """
    Best rational approximation from below with denominator <= max_denominator.

    Runs the continued fraction expansion of ``value`` until the next
    convergent's denominator would exceed the bound, then returns the lower
    of the two neighbours that bracket ``value``: the last convergent and
    the largest admissible semiconvergent.

    Args:
        value: Exact value
        max_denominator: Denominator bound; None leaves the value exact

    Returns:
        The largest fraction <= value whose denominator is within the bound
    """
    if max_denominator is None or value.denominator <= max_denominator:
        return value
    if max_denominator < 1:
        raise DomainError(f"denominator bound must be positive, got {max_denominator}")
    p0, q0, p1, q1 = 0, 1, 1, 0
    numerator, denominator = value.numerator, value.denominator
    while True:
        a = numerator // denominator
        q2 = q0 + a * q1
        if q2 > max_denominator:
            break
        p0, q0, p1, q1 = p1, q1, p0 + a * p1, q2
        numerator, denominator = denominator, numerator - a * denominator
    k = (max_denominator - q0) // q1
    semiconvergent = Fraction(p0 + k * p1, q0 + k * q1)
    convergent = Fraction(p1, q1)
    return min(c for c in (semiconvergent, convergent) if c <= value)


class LowerEnvelope:
    """
    Lower envelope of lines r x + b on [0, 1].

    Lines are added in strictly decreasing slope order. A new line is the
    lowest one to the right of its crossing with the envelope, so the pieces
    form a stack whose start points increase. Each piece stores its start,
    the envelope value there and the integral of the envelope up to it.
    """

    def __init__(self) -> None:
        self._slopes: List[int] = []
        self._intercepts: List[Fraction] = []
        self._starts: List[Fraction] = []
        self._start_values: List[Fraction] = []
        self._cumulative: List[Fraction] = []
        self._last_slope: Optional[int] = None

    def __len__(self) -> int:
        return len(self._slopes)

    def add_line(self, slope: int, intercept: Number) -> None:
        if self._last_slope is not None and slope >= self._last_slope:
            raise MalformedInputError(
                f"slopes must be added in strictly decreasing order, got {slope} "
                f"after {self._last_slope}"
            )
        self._last_slope = slope
        intercept = Fraction(intercept)
        start = Fraction(0)
        while self._slopes:
            crossing = (intercept - self._intercepts[-1]) / (self._slopes[-1] - slope)
            if crossing <= self._starts[-1]:
                self._pop()
                continue
            if crossing >= 1:
                return
            start = crossing
            break
        cumulative = Fraction(0)
        if self._slopes:
            cumulative = self._cumulative[-1] + self._piece_area(
                len(self._slopes) - 1, self._starts[-1], start
            )
        self._slopes.append(slope)
        self._intercepts.append(intercept)
        self._starts.append(start)
        self._start_values.append(slope * start + intercept)
        self._cumulative.append(cumulative)

    def _pop(self) -> None:
        self._slopes.pop()
        self._intercepts.pop()
        self._starts.pop()
        self._start_values.pop()
        self._cumulative.pop()

    def _piece_area(self, index: int, lo: Fraction, hi: Fraction) -> Fraction:
        slope = self._slopes[index]
        return slope * (hi * hi - lo * lo) / 2 + self._intercepts[index] * (hi - lo)

    def integral(self, cap: Optional[Number] = None) -> Fraction:
        """
        ∫_0^1 min(cap, envelope(x)) dx.

        Args:
            cap: Optional constant competing with the lines

        Returns:
            Exact integral
        """
        if not self._slopes:
            raise MalformedInputError("envelope has no lines")
        if cap is None:
            last = len(self._slopes) - 1
            return self._cumulative[last] + self._piece_area(last, self._starts[last], Fraction(1))
        cap = Fraction(cap)
        if cap <= self._start_values[0]:
            return cap
        index = bisect.bisect_left(self._start_values, cap) - 1
        start = self._starts[index]
        crossing = (cap - self._intercepts[index]) / self._slopes[index]
        if crossing >= 1:
            return self._cumulative[index] + self._piece_area(index, start, Fraction(1))
        return (
            self._cumulative[index]
            + self._piece_area(index, start, crossing)
            + cap * (1 - crossing)
        )


def lower_envelope_integral(
    lines: Iterable[Tuple[int, Number]],
    constant_option: Optional[Number] = None,
) -> Fraction:
    """
    Exact ∫_0^1 min(constant_option, min_r (r x + b_r)) dx.

    Args:
        lines: (slope, intercept) pairs with distinct positive integer slopes
        constant_option: Optional constant competing with the lines

    Returns:
        The integral as a Fraction

    Raises:
        MalformedInputError: On duplicate slopes or an empty line set
    """
    ordered = sorted(lines, key=lambda line: line[0], reverse=True)
    slopes = [slope for slope, _ in ordered]
    if len(set(slopes)) != len(slopes):
        raise MalformedInputError(f"duplicate slopes in {slopes}")
    envelope = LowerEnvelope()
    for slope, intercept in ordered:
        envelope.add_line(slope, intercept)
    return envelope.integral(constant_option)


@dataclass
class DpTable:
    """
    Result of the backward induction up to horizon n.

    ``column0[i]`` is C(i, 0) for every i <= n. ``rows`` holds the full
    triangle C(i, j), 0 <= j <= i, only when it was requested.
    """

    n: int
    denominator_bound: Optional[int]
    column0: List[Fraction]
    rows: Optional[List[List[Fraction]]] = None
    _float_rows: Optional[List[List[float]]] = field(default=None, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def is_full(self) -> bool:
        return self.rows is not None

    def entry(self, i: int, j: int) -> Fraction:
        if not 0 <= j <= i <= self.n:
            raise DomainError(f"C({i}, {j}) is outside the table of horizon {self.n}")
        if j == i:
            return Fraction(0)
        if self.rows is not None:
            return self.rows[i][j]
        if j == 0:
            return self.column0[i]
        raise DomainError("full table was not retained; rebuild with keep_full=True")

    def float_rows(self) -> List[List[float]]:
        """Rows converted to floats, cached, for fast policy lookups."""
        if self.rows is None:
            raise DomainError("full table was not retained; rebuild with keep_full=True")
        cached = self._float_rows
        if cached is None:
            with self._lock:
                if self._float_rows is None:
                    self._float_rows = [[float(value) for value in row] for row in self.rows]
                cached = self._float_rows
        return cached


def estimated_table_bytes(n: int, denominator_bound: Optional[int], keep_full: bool) -> int:
    """Rough memory needed to hold the stored entries."""
    limb_bytes = 2 * ((denominator_bound or 2**64).bit_length() // 8 + 8)
    entries = (n + 1) * (n + 2) // 2 if keep_full else 3 * (n + 1)
    return entries * (limb_bytes + _ENTRY_OVERHEAD_BYTES)


def compute_table(
    n: int,
    denominator_bound: Optional[int] = DEFAULT_DENOMINATOR_BOUND,
    keep_full: bool = False,
    memory_limit_bytes: Optional[int] = None,
) -> DpTable:
    """
    Fill C(i, j) bottom-up for 0 <= j <= i <= n.

    Args:
        n: Horizon
        denominator_bound: Every entry is rounded down to a fraction with at
            most this denominator; None keeps exact values
        keep_full: Retain every row (needed by the DP policy); otherwise only
            the rows i-1 and i live at any time
        memory_limit_bytes: Refuse to start if the stored entries would not fit

    Returns:
        The table

    Raises:
        DomainError: If n < 1
        ResourceLimitError: If the memory estimate exceeds the limit
    """
    if n < 1:
        raise DomainError(f"horizon must be positive, got {n}")
    if memory_limit_bytes is not None:
        needed = estimated_table_bytes(n, denominator_bound, keep_full)
        if needed > memory_limit_bytes:
            raise ResourceLimitError(
                f"table for n={n} needs about {needed} bytes, limit is {memory_limit_bytes}"
            )

    logger.info(f"Computing DP table for n={n}, D={denominator_bound}, full={keep_full}")
    previous: List[Fraction] = [Fraction(0)]
    column0: List[Fraction] = [Fraction(0)]
    rows: Optional[List[List[Fraction]]] = [previous] if keep_full else None

    for i in range(1, n + 1):
        row: List[Fraction] = [Fraction(0)] * (i + 1)
        envelope = LowerEnvelope()
        # Adding line r = s leaves the envelope over r in s..i, which is the
        # hiring set of C(i, s-1).
        for s in range(i, 0, -1):
            envelope.add_line(s, previous[s - 1])
            j = s - 1
            value = envelope.integral() if j == 0 else envelope.integral(cap=previous[j - 1])
            row[j] = round_down(value, denominator_bound)
        column0.append(row[0])
        if rows is not None:
            rows.append(row)
        previous = row
        if i % PROGRESS_INTERVAL == 0:
            logger.info(f"DP row {i}/{n}: C({i},0) ~ {float(row[0]):.6f}")

    return DpTable(n=n, denominator_bound=denominator_bound, column0=column0, rows=rows)


def lower_bound_ratio(table: DpTable, n: Optional[int] = None) -> float:
    """
    C(n, 0) / (H_{n+1} - 1), a lower bound on the strict competitive ratio.

    Args:
        table: Computed table
        n: Horizon to evaluate, defaults to the table's own horizon

    Returns:
        The ratio, from exact rationals
    """
    n = table.n if n is None else n
    if not 1 <= n <= table.n:
        raise DomainError(f"horizon {n} is outside 1..{table.n}")
    return float(table.column0[n] / (harmonic_fraction(n + 1) - 1))


def ratio_curve(table: DpTable) -> List[float]:
    """lower_bound_ratio for every horizon 1..n of the table."""
    return [lower_bound_ratio(table, m) for m in range(1, table.n + 1)]


def grid_oracle(n: int, m: int) -> float:
    """
    Optimal online cost by backward induction on an m-point midpoint grid.

    An independent floating point check of the exact table for tiny n.

    Args:
        n: Horizon, at most 6
        m: Grid resolution, at least 1000

    Returns:
        Approximation of C(n, 0)
    """
    if not 1 <= n <= 6:
        raise DomainError(f"grid oracle supports 1 <= n <= 6, got {n}")
    if m < 1000:
        raise DomainError(f"grid resolution must be at least 1000, got {m}")
    x = (np.arange(m) + 0.5) / m
    previous = [0.0]
    for i in range(1, n + 1):
        row = [0.0] * (i + 1)
        best = np.full(m, np.inf)
        for s in range(i, 0, -1):
            np.minimum(best, s * x + previous[s - 1], out=best)
            j = s - 1
            if j == 0:
                row[0] = float(best.mean())
            else:
                row[j] = float(np.minimum(best, previous[j - 1]).mean())
        previous = row
    return previous[0]


def export_csv(table: DpTable, path: str) -> int:
    """
    Write the table as CSV rows i,j,numerator,denominator.

    Only column 0 is written when the full table was not retained.

    Returns:
        Number of entries written
    """
    written = 0
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["i", "j", "numerator", "denominator"])
        for i, j, value in _entries(table):
            writer.writerow([i, j, value.numerator, value.denominator])
            written += 1
    logger.info(f"Exported {written} DP entries to {path}")
    return written


def _entries(table: DpTable) -> Iterable[Tuple[int, int, Fraction]]:
    if table.rows is None:
        for i, value in enumerate(table.column0):
            yield i, 0, value
        return
    for i, row in enumerate(table.rows):
        for j, value in enumerate(row):
            yield i, j, value


def riemann_envelope_integral(
    lines: Sequence[Tuple[int, Number]],
    constant_option: Optional[Number] = None,
    m: int = 10**6,
) -> float:
    """Midpoint-rule value of the envelope integral, for cross-checks."""
    x = (np.arange(m) + 0.5) / m
    values = np.full(m, np.inf if constant_option is None else float(constant_option))
    for slope, intercept in lines:
        np.minimum(values, slope * x + float(intercept), out=values)
    return float(values.mean())
