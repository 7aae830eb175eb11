import math
import threading
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from hiring_simulator.models import SimulationReport


@dataclass(frozen=True)
class Contract:
    """A hire: covers steps start .. start + duration - 1 at unit_cost per step."""

    start: int
    duration: int
    unit_cost: float

    @property
    def end(self) -> int:
        return self.start + self.duration - 1

    def booked_cost(self, horizon: Optional[int] = None) -> float:
        """
        Cost of the contract.

        Args:
            horizon: If given, only steps up to the horizon are billed

        Returns:
            unit_cost times the billed duration
        """
        duration = self.duration
        if horizon is not None:
            duration = max(0, min(duration, horizon - self.start + 1))
        return self.unit_cost * duration


@dataclass(frozen=True)
class EpisodeResult:
    alg_cost: float
    opt_cost: float
    hires: int
    max_concurrency: int
    contracts: Tuple[Contract, ...] = field(default=(), repr=False)


class EpisodeStore:
    """
    Per-episode outcomes of one batch, indexed by stream.

    Thread-safe for concurrent writers. Statistics are computed from the
    arrays in stream order, so the summary does not depend on the order in
    which episodes finished.
    """

    def __init__(self, replications: int):
        """
        Initialize an empty store.

        Args:
            replications: Number of episodes the batch will record
        """
        self._lock = threading.RLock()
        self.replications = replications
        self._alg = np.zeros(replications)
        self._opt = np.zeros(replications)
        self._hires = np.zeros(replications, dtype=np.int64)
        self._concurrency = np.zeros(replications, dtype=np.int64)
        self._filled = np.zeros(replications, dtype=bool)

    def record(self, stream: int, result: EpisodeResult) -> None:
        with self._lock:
            if self._filled[stream]:
                raise ValueError(f"stream {stream} already recorded")
            self._alg[stream] = result.alg_cost
            self._opt[stream] = result.opt_cost
            self._hires[stream] = result.hires
            self._concurrency[stream] = result.max_concurrency
            self._filled[stream] = True

    def recorded(self) -> int:
        with self._lock:
            return int(self._filled.sum())

    def is_complete(self) -> bool:
        return self.recorded() == self.replications

    def summarize(
        self,
        policy: str,
        distribution: str,
        n: int,
        seed: int,
        truncate_at_n: bool = False,
    ) -> SimulationReport:
        """
        Aggregate the recorded episodes into a report.

        Standard errors and the ratio's delta-method error are undefined
        (None) for a single replication.

        Raises:
            ValueError: If some stream has not been recorded
        """
        with self._lock:
            if not self._filled.all():
                missing = int((~self._filled).sum())
                raise ValueError(f"{missing} of {self.replications} episodes missing")
            alg = self._alg.copy()
            opt = self._opt.copy()
            hires = self._hires.copy()
            concurrency = self._concurrency.copy()

        reps = self.replications
        mean_cost = float(alg.mean())
        mean_opt = float(opt.mean())
        ratio = mean_cost / mean_opt
        stderr_cost = stderr_opt = ratio_stderr = None
        if reps > 1:
            stderr_cost = float(alg.std(ddof=1) / math.sqrt(reps))
            stderr_opt = float(opt.std(ddof=1) / math.sqrt(reps))
            covariance = np.cov(alg, opt, ddof=1)
            spread = covariance[0, 0] - 2 * ratio * covariance[0, 1] + ratio**2 * covariance[1, 1]
            ratio_stderr = float(math.sqrt(max(spread, 0.0) / reps) / mean_opt)

        return SimulationReport(
            policy=policy,
            distribution=distribution,
            n=n,
            replications=reps,
            seed=seed,
            mean_cost=mean_cost,
            stderr_cost=stderr_cost,
            mean_opt=mean_opt,
            stderr_opt=stderr_opt,
            ratio_of_means=ratio,
            ratio_stderr=ratio_stderr,
            max_concurrency=int(concurrency.max()),
            mean_hires=float(hires.mean()),
            truncate_at_n=truncate_at_n,
        )
