import math
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from loguru import logger

from configs.tools.streams import REACTOR_STREAM, substream
from configs.tools.workers import WorkerPool
from errors import DomainError
from prime_table import PrimeTable, build_prime_table
from reactor_core import (
    DEFAULT_MAX_SWEEPS,
    RunStatus,
    SystemState,
    init_state,
    run_from_state,
)

DEFAULT_REALIZATIONS = 2_000
UNRELIABLE_TRUNCATION_RATE = 0.001
SWEEP_COLUMNS = ["M", "N", "R", "P", "P_stderr", "r_mean", "tau", "truncated"]


@dataclass
class EnsembleStats:
    """
    Statistics of R realizations at fixed (N, M).

    Truncated realizations are counted in ``truncated_runs`` and left out of
    every other statistic.
    """

    M: int
    N: int
    realizations: int
    r_mean: float
    P: float
    tau: float
    tau_raw: float
    truncated_runs: int = 0
    histogram: dict[int, int] = field(default_factory=dict)

    @property
    def completed_runs(self) -> int:
        return self.realizations - self.truncated_runs

    @property
    def P_stderr(self) -> float:
        if self.completed_runs == 0:
            return math.nan
        return math.sqrt(self.P * (1.0 - self.P) / self.completed_runs)

    @property
    def unreliable(self) -> bool:
        return self.truncated_runs > UNRELIABLE_TRUNCATION_RATE * self.realizations

    def to_row(self) -> dict:
        return {
            "M": self.M,
            "N": self.N,
            "R": self.realizations,
            "P": self.P,
            "P_stderr": self.P_stderr,
            "r_mean": self.r_mean,
            "tau": self.tau,
            "truncated": self.truncated_runs,
        }


@dataclass
class SweepTable:
    """EnsembleStats over an increasing grid of N at fixed M."""

    M: int
    rows: list[tuple[int, EnsembleStats]]
    seed: int | None = None
    realizations: int | None = None

    def __post_init__(self):
        grid = [n for n, _ in self.rows]
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise DomainError(f"N must be strictly increasing across rows: {grid}")

    @property
    def N(self) -> np.ndarray:
        return np.array([n for n, _ in self.rows], dtype=np.int64)

    def column(self, name: str) -> np.ndarray:
        return np.array(
            [getattr(stats, name) for _, stats in self.rows], dtype=np.float64
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [stats.to_row() for _, stats in self.rows], columns=SWEEP_COLUMNS
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> list["SweepTable"]:
        """
        Rebuilds one SweepTable per pool size from rows in the sweep CSV
        layout. Histograms are not part of that layout and come back empty.
        """
        missing = [column for column in SWEEP_COLUMNS if column not in frame.columns]
        if missing:
            raise DomainError(f"sweep table is missing columns: {missing}")

        tables = []
        for M, group in frame.groupby("M", sort=True):
            group = group.sort_values("N")
            rows = []
            for record in group.itertuples(index=False):
                stats = EnsembleStats(
                    M=int(record.M),
                    N=int(record.N),
                    realizations=int(record.R),
                    r_mean=float(record.r_mean),
                    P=float(record.P),
                    tau=float(record.tau),
                    tau_raw=float(record.tau) * int(record.N),
                    truncated_runs=int(record.truncated),
                )
                rows.append((stats.N, stats))
            realizations = int(group["R"].iloc[0])
            tables.append(cls(M=int(M), rows=rows, realizations=realizations))
        return tables


@dataclass(frozen=True)
class _RealizationTask:
    M: int
    N: int
    master_seed: int
    index: int
    max_sweeps: int
    initial_values: tuple[int, ...] | None = None


@dataclass(frozen=True)
class _RealizationSummary:
    status: RunStatus
    sweeps: int
    prime_ratio: float
    all_primes: bool
    final_values: tuple[int, ...]


def _run_realization(task: _RealizationTask) -> _RealizationSummary:
    table = build_prime_table(task.M)
    rng = substream(task.master_seed, REACTOR_STREAM, task.M, task.N, task.index)
    if task.initial_values is None:
        state = init_state(task.M, task.N, rng)
    else:
        state = SystemState(values=list(task.initial_values), pool_limit=task.M)
    record = run_from_state(state, rng, table, task.max_sweeps)
    return _RealizationSummary(
        status=record.status,
        sweeps=record.sweeps,
        prime_ratio=record.final_prime_ratio,
        all_primes=record.all_primes,
        final_values=tuple(record.final_state.values),
    )


def _validate_ensemble_args(M, N, R, master_seed, max_sweeps, initial_values):
    if M < 3:
        raise DomainError(f"pool size M must be >= 3, got {M}")
    if N < 2:
        raise DomainError(f"system size N must be >= 2, got {N}")
    if R < 1:
        raise DomainError(f"realizations R must be >= 1, got {R}")
    if master_seed < 0:
        raise DomainError(f"seed must be non-negative, got {master_seed}")
    if max_sweeps < 1:
        raise DomainError(f"max_sweeps must be >= 1, got {max_sweeps}")
    if initial_values is not None:
        if len(initial_values) != N:
            raise DomainError(
                f"{len(initial_values)} initial values given for N = {N}"
            )
        if min(initial_values) < 2 or max(initial_values) > M:
            raise DomainError(f"initial values must lie in [2, {M}]")


def run_ensemble(
    M: int,
    N: int,
    R: int,
    master_seed: int,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    workers: int = 1,
    initial_values: Sequence[int] | None = None,
) -> EnsembleStats:
    """
    Runs R independent realizations at (N, M) and aggregates them.

    Realization i draws from its own stream keyed by (master_seed, M, N, i),
    so the result is the same for any worker count.

    Args:
        M: Pool size.
        N: System size.
        R: Number of realizations.
        master_seed: Experiment seed.
        max_sweeps: Sweep cap per realization.
        workers: Worker processes.
        initial_values: Forces the starting multiset of every realization.

    Returns:
        The EnsembleStats, flagged unreliable when more than 0.1% of the
        realizations were truncated.
    """
    _validate_ensemble_args(M, N, R, master_seed, max_sweeps, initial_values)
    forced = None
    if initial_values is not None:
        forced = tuple(int(value) for value in initial_values)
    tasks = [
        _RealizationTask(M, N, master_seed, index, max_sweeps, forced)
        for index in range(R)
    ]
    summaries = WorkerPool(workers).map(_run_realization, tasks)

    completed = [s for s in summaries if s.status is RunStatus.FROZEN]
    truncated = R - len(completed)
    histogram = Counter()
    for summary in completed:
        histogram.update(summary.final_values)

    if completed:
        r_mean = math.fsum(s.prime_ratio for s in completed) / len(completed)
        P = sum(s.all_primes for s in completed) / len(completed)
        tau_raw = sum(s.sweeps for s in completed) / len(completed)
    else:
        r_mean = P = tau_raw = math.nan

    stats = EnsembleStats(
        M=M,
        N=N,
        realizations=R,
        r_mean=r_mean,
        P=P,
        tau=tau_raw / N,
        tau_raw=tau_raw,
        truncated_runs=truncated,
        histogram=dict(sorted(histogram.items())),
    )
    if stats.unreliable:
        logger.warning(
            f"Ensemble (M={M}, N={N}) unreliable: {truncated} of {R} "
            f"realizations hit max_sweeps={max_sweeps}."
        )
    logger.debug(
        f"Ensemble (M={M}, N={N}, R={R}): "
        f"P={P:.4f}, r={r_mean:.4f}, tau={stats.tau:.4f}"
    )
    return stats


def sweep_over_N(
    M: int,
    N_grid: Sequence[int],
    R: int,
    master_seed: int,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    workers: int = 1,
) -> SweepTable:
    """Runs one ensemble per grid point; grid points use disjoint streams."""
    grid = [int(n) for n in N_grid]
    if not grid:
        raise DomainError("N grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError(f"N grid must be strictly increasing: {grid}")

    rows = []
    for position, N in enumerate(grid, start=1):
        stats = run_ensemble(M, N, R, master_seed, max_sweeps, workers)
        rows.append((N, stats))
        logger.info(
            f"[{position}/{len(grid)}] M={M} N={N}: P={stats.P:.4f} "
            f"r={stats.r_mean:.4f} tau={stats.tau:.4f}"
        )
    return SweepTable(M=M, rows=rows, seed=master_seed, realizations=R)


def steady_distribution(
    M: int,
    N: int,
    R: int,
    master_seed: int,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    workers: int = 1,
    initial_values: Sequence[int] | None = None,
) -> dict[int, int]:
    """Counts of the final values over all completed realizations."""
    stats = run_ensemble(M, N, R, master_seed, max_sweeps, workers, initial_values)
    return stats.histogram


def histogram_frame(histogram: dict[int, int]) -> pd.DataFrame:
    return pd.DataFrame(
        sorted(histogram.items()), columns=["value", "count"]
    ).astype({"value": "int64", "count": "int64"})


def decile_occupancies(histogram: dict[int, int], M: int) -> np.ndarray:
    """Counts falling in ten equal-width bins spanning [2, M]."""
    if not histogram:
        return np.zeros(10, dtype=np.int64)
    values = np.fromiter(histogram.keys(), dtype=np.int64)
    counts = np.fromiter(histogram.values(), dtype=np.int64)
    occupancy, _ = np.histogram(values, bins=10, range=(2, M + 1), weights=counts)
    return occupancy.astype(np.int64)


def composite_mass(histogram: dict[int, int], table: PrimeTable) -> float:
    """Fraction of the histogram mass sitting on composite values."""
    total = sum(histogram.values())
    if total == 0:
        return 0.0
    composite = sum(
        count for value, count in histogram.items() if not table.is_prime(value)
    )
    return composite / total


def reaction_time_series(
    M: int,
    N: int,
    master_seed: int,
    realization: int = 0,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> pd.DataFrame:
    """
    Cumulative reactions and prime ratio r(t) per sweep for one realization.

    Uses the same stream as realization ``realization`` of run_ensemble.
    """
    _validate_ensemble_args(M, N, 1, master_seed, max_sweeps, None)
    table = build_prime_table(M)
    rng = substream(master_seed, REACTOR_STREAM, M, N, realization)
    state = init_state(M, N, rng)
    record = run_from_state(state, rng, table, max_sweeps)
    if record.status is RunStatus.TRUNCATED:
        logger.warning(f"Time series for M={M}, N={N} truncated at {max_sweeps}.")
    return pd.DataFrame(
        {
            "M": M,
            "N": N,
            "t": np.arange(record.sweeps + 1, dtype=np.int64),
            "reactions": record.reactions_cumulative,
            "r": record.prime_ratio_series,
        }
    )
