"""
Annealed approximation: the N elements are redrawn independently at every
time step, and q(N, M) is the probability that such a fresh draw holds no
reactive pair at all.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from loguru import logger

from configs.tools.streams import ANNEALED_STREAM, substream
from configs.tools.workers import WorkerPool
from errors import DomainError, GridRangeError
from reactor_core import has_reactive_pair
from scaling_analysis import FitResult, characteristic_size, fit_power_law

DEFAULT_SAMPLES = 10_000
SAMPLE_BLOCK = 1_024
COARSE_BRACKET = 0.05
CURVE_COLUMNS = ["M", "N", "q", "q_stderr", "S"]


@dataclass
class AnnealedCurve:
    M: int
    rows: list[tuple[int, float, float]]
    samples: int

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.rows, columns=["N", "q", "q_stderr"])
        frame.insert(0, "M", self.M)
        frame["S"] = self.samples
        return frame[CURVE_COLUMNS]

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> list["AnnealedCurve"]:
        missing = [column for column in CURVE_COLUMNS if column not in frame.columns]
        if missing:
            raise DomainError(f"annealed curve is missing columns: {missing}")
        curves = []
        for M, group in frame.groupby("M", sort=True):
            group = group.sort_values("N")
            rows = [
                (int(n), float(q), float(se))
                for n, q, se in zip(group["N"], group["q"], group["q_stderr"])
            ]
            curves.append(cls(M=int(M), rows=rows, samples=int(group["S"].iloc[0])))
        return curves


def pair_divisibility_probability(M: int) -> float:
    """
    Exact probability that an ordered pair drawn from {2, ..., M} is made of
    two distinct values, one dividing the other.
    """
    if M < 4:
        raise DomainError(f"pool size M must be >= 4, got {M}")
    divisible_pairs = sum((M - x) // x for x in range(2, M // 2 + 1))
    return 2 * divisible_pairs / (M - 1) ** 2


def asymptotic_pair_divisibility(M: int) -> float:
    if M < 4:
        raise DomainError(f"pool size M must be >= 4, got {M}")
    return 2.0 * math.log(M) / M


def _count_inert_samples(task: tuple[int, int, int, int, int]) -> int:
    M, N, master_seed, block, size = task
    rng = substream(master_seed, ANNEALED_STREAM, M, N, block)
    draws = rng.integers(2, M + 1, size=(size, N))
    return sum(not has_reactive_pair(row) for row in draws)


def estimate_q(
    M: int, N: int, S: int, master_seed: int, workers: int = 1
) -> tuple[float, float]:
    """
    Monte Carlo estimate of q(N, M) with its binomial standard error.

    Samples are drawn in fixed blocks of SAMPLE_BLOCK, each from its own
    stream keyed by (master_seed, M, N, block), so the estimate does not
    depend on the worker count.

    Args:
        M: Pool size, at least 3.
        N: Elements per sample, at least 1.
        S: Number of samples, at least 1.
        master_seed: Experiment seed.
        workers: Worker processes.

    Returns:
        (q, stderr).
    """
    if M < 3:
        raise DomainError(f"pool size M must be >= 3, got {M}")
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    if S < 1:
        raise DomainError(f"samples S must be >= 1, got {S}")
    if N == 1:
        return 1.0, 0.0

    tasks = [
        (M, N, master_seed, block, min(SAMPLE_BLOCK, S - start))
        for block, start in enumerate(range(0, S, SAMPLE_BLOCK))
    ]
    inert = sum(WorkerPool(workers).map(_count_inert_samples, tasks))
    q = inert / S
    return q, math.sqrt(q * (1.0 - q) / S)


def annealed_curve(
    M: int,
    N_grid: Sequence[int],
    S: int = DEFAULT_SAMPLES,
    master_seed: int = 0,
    workers: int = 1,
) -> AnnealedCurve:
    grid = [int(n) for n in N_grid]
    if not grid:
        raise DomainError("N grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError(f"N grid must be strictly increasing: {grid}")

    rows = []
    for N in grid:
        q, stderr = estimate_q(M, N, S, master_seed, workers)
        rows.append((N, q, stderr))
        logger.info(f"Annealed M={M} N={N}: q={q:.4f} +/- {stderr:.4f}")
    return AnnealedCurve(M=M, rows=rows, samples=S)


def ansatz_q(M: int, N: int, alpha: float) -> float:
    """Closed-form ansatz q = (1 - 2 ln M / M) ** (N ** (1 / alpha))."""
    if M < 4:
        raise DomainError(f"pool size M must be >= 4, got {M}")
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    base = 1.0 - asymptotic_pair_divisibility(M)
    if base <= 0.0:
        raise DomainError(f"2 ln(M) / M >= 1 for M = {M}")
    return base ** (N ** (1.0 / alpha))


def annealed_threshold(curve: AnnealedCurve) -> float:
    """
    N_c where q crosses 0.5, by linear interpolation between the bracketing
    grid points.

    Raises:
        GridRangeError: If no pair of consecutive rows brackets q = 0.5.
    """
    rows = sorted(curve.rows)
    for (n_lo, q_lo, _), (n_hi, q_hi, _) in zip(rows, rows[1:]):
        if q_lo == 0.5:
            return float(n_lo)
        if q_lo > 0.5 >= q_hi:
            n_c = n_lo + (q_lo - 0.5) / (q_lo - q_hi) * (n_hi - n_lo)
            if n_hi - n_lo > COARSE_BRACKET * n_c:
                logger.warning(
                    f"M={curve.M}: bracket [{n_lo}, {n_hi}] is wider than "
                    f"{COARSE_BRACKET:.0%} of N_c={n_c:.2f}; refine the N grid."
                )
            return float(n_c)
    if rows and rows[-1][1] == 0.5:
        return float(rows[-1][0])
    raise GridRangeError(
        f"q never crosses 0.5 on the N grid for M={curve.M}; widen the N grid."
    )


def fit_ansatz_alpha(curve: AnnealedCurve) -> FitResult:
    """
    Fits alpha of the ansatz on a measured curve.

    ln q / ln(1 - 2 ln M / M) = N ** (1 / alpha), so a power-law fit of that
    ratio against N has slope 1 / alpha. Only rows with 0 < q < 1 are used.
    """
    log_base = math.log(1.0 - asymptotic_pair_divisibility(curve.M))
    points = [(n, math.log(q) / log_base) for n, q, _ in curve.rows if 0.0 < q < 1.0]
    fit = fit_power_law(points)
    alpha = 1.0 / fit.exponent
    return replace(fit, exponent=alpha, stderr_exponent=fit.stderr_exponent * alpha**2)


def threshold_frame(curves: Sequence[AnnealedCurve]) -> pd.DataFrame:
    """Annealed N_c for each pool size, next to its characteristic size."""
    rows = [
        {
            "M": curve.M,
            "M_over_lnM": characteristic_size(curve.M),
            "N_c": annealed_threshold(curve),
        }
        for curve in sorted(curves, key=lambda curve: curve.M)
    ]
    return pd.DataFrame(rows, columns=["M", "M_over_lnM", "N_c"])
