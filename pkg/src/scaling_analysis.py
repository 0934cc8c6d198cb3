"""
Threshold location, power-law fits of the critical exponents and data
collapse of the order parameter and characteristic time curves.

Sizes are measured by the characteristic size L = M / ln(M) throughout.
"""

import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
import pandas as pd
from loguru import logger
from scipy import stats
from scipy.optimize import curve_fit

from ensemble_runner import SweepTable
from errors import DomainError, GridRangeError
from prime_table import PrimeTable

DEFAULT_THETA = 0.005
MIN_FIT_POINTS = 3
MIN_CORRELATION_SIZES = 4


class CriterionKind(Enum):
    FIRST_NONZERO = "first-nonzero"
    HALF_CROSSING = "half-crossing"


@dataclass(frozen=True)
class ThresholdCriterion:
    kind: CriterionKind
    theta: float = DEFAULT_THETA

    @classmethod
    def first_nonzero(cls, theta: float = DEFAULT_THETA) -> "ThresholdCriterion":
        if not 0.0 <= theta < 1.0:
            raise DomainError(f"theta must lie in [0, 1), got {theta}")
        return cls(CriterionKind.FIRST_NONZERO, theta)

    @classmethod
    def half_crossing(cls) -> "ThresholdCriterion":
        return cls(CriterionKind.HALF_CROSSING)


@dataclass(frozen=True)
class FitResult:
    exponent: float
    intercept: float
    stderr_exponent: float
    r_squared: float
    points_used: int

    def to_dict(self) -> dict:
        return asdict(self)


def characteristic_size(M: int | np.ndarray) -> float | np.ndarray:
    """L = M / ln(M)."""
    return M / np.log(M)


def fit_power_law(points: Sequence[tuple[float, float]]) -> FitResult:
    """
    Fits y = exp(intercept) * x ** exponent by ordinary least squares on
    (ln x, ln y).

    Raises:
        DomainError: With fewer than 3 points, a non-positive coordinate or
                     a degenerate (constant) abscissa.
    """
    if len(points) < MIN_FIT_POINTS:
        raise DomainError(
            f"a power-law fit needs at least {MIN_FIT_POINTS} points, got {len(points)}"
        )
    xy = np.asarray(points, dtype=np.float64)
    if not np.all(np.isfinite(xy)) or np.any(xy <= 0.0):
        raise DomainError("power-law fits need strictly positive, finite points")

    log_x = np.log(xy[:, 0])
    log_y = np.log(xy[:, 1])
    if np.ptp(log_x) == 0.0:
        raise DomainError("power-law fit needs at least two distinct x values")

    result = stats.linregress(log_x, log_y)
    return FitResult(
        exponent=float(result.slope),
        intercept=float(result.intercept),
        stderr_exponent=float(result.stderr),
        r_squared=float(result.rvalue**2),
        points_used=len(xy),
    )


def detect_threshold(table: SweepTable, criterion: ThresholdCriterion) -> float:
    """
    Locates N_c on a simulated P(N) curve.

    first_nonzero(theta) returns the smallest grid N with P > theta;
    half_crossing interpolates linearly where P reaches 0.5.

    Raises:
        GridRangeError: If the criterion is not met anywhere on the grid.
    """
    grid = table.N
    P = table.column("P")

    if criterion.kind is CriterionKind.FIRST_NONZERO:
        above = np.flatnonzero(P > criterion.theta)
        if above.size == 0:
            raise GridRangeError(
                f"P never exceeds {criterion.theta} for M={table.M}; extend the N grid."
            )
        return float(grid[above[0]])

    for k in range(len(grid) - 1):
        if P[k] == 0.5:
            return float(grid[k])
        if P[k] < 0.5 <= P[k + 1]:
            fraction = (0.5 - P[k]) / (P[k + 1] - P[k])
            return float(grid[k] + fraction * (grid[k + 1] - grid[k]))
    if len(grid) and P[-1] == 0.5:
        return float(grid[-1])
    raise GridRangeError(f"P never crosses 0.5 for M={table.M}; extend the N grid.")


def tau_peak(table: SweepTable) -> tuple[int, float]:
    """Grid argmax of tau; ties go to the smaller N."""
    if not table.rows:
        raise DomainError(f"sweep table for M={table.M} is empty")
    tau = table.column("tau")
    peak = int(np.argmax(np.nan_to_num(tau, nan=-np.inf)))
    return int(table.N[peak]), float(tau[peak])


def search_space_size(N: int) -> int:
    """
    Number of ways to split N elements into N/2 unordered pairs,
    N! / (2 ** (N/2) * (N/2)!), which equals (N - 1)!!.
    """
    if N < 2 or N % 2:
        raise DomainError(f"N must be an even integer >= 2, got {N}")
    half = N // 2
    return math.factorial(N) // (2**half * math.factorial(half))


def odd_double_factorial(N: int) -> int:
    """(N - 1)!! as the product of the odd numbers below N."""
    if N < 2 or N % 2:
        raise DomainError(f"N must be an even integer >= 2, got {N}")
    return math.prod(range(N - 1, 0, -2))


@dataclass
class CollapseTable:
    """
    Rescaled curves, one per pool size.

    ``points`` holds the columns M, N, n, x, y with
    n = N / L, x = (n - n_c) * L ** (1 / nu) and y = value * L ** y_exponent.
    ``beta`` or ``delta`` records the exponent the collapse was built from.
    """

    points: pd.DataFrame
    n_c: float
    nu: float
    y_exponent: float
    observable: str
    beta: float | None = None
    delta: float | None = None

    def curves(self) -> dict[int, tuple[np.ndarray, np.ndarray]]:
        result = {}
        for M, group in self.points.groupby("M", sort=True):
            group = group.sort_values("x")
            result[int(M)] = (group["x"].to_numpy(), group["y"].to_numpy())
        return result

    def uncollapse(self) -> pd.DataFrame:
        """Inverse transform: back to (M, N, value)."""
        L = characteristic_size(self.points["M"].to_numpy(dtype=np.float64))
        n = self.points["x"].to_numpy() / L ** (1.0 / self.nu) + self.n_c
        return pd.DataFrame(
            {
                "M": self.points["M"].to_numpy(),
                "N": n * L,
                self.observable: self.points["y"].to_numpy() / L**self.y_exponent,
            }
        )


def _rescale(
    tables: Sequence[SweepTable],
    n_c: float,
    nu: float,
    observable: str,
    y_exponent: float,
    beta: float | None = None,
    delta: float | None = None,
) -> CollapseTable:
    if not tables:
        raise DomainError("collapse needs at least one sweep table")
    if nu == 0:
        raise DomainError("nu must be non-zero")
    pool_sizes = [table.M for table in tables]
    if len(set(pool_sizes)) != len(pool_sizes):
        raise DomainError(f"duplicate pool sizes in collapse input: {pool_sizes}")

    frames = []
    for table in sorted(tables, key=lambda table: table.M):
        L = characteristic_size(table.M)
        N = table.N
        n = N / L
        frames.append(
            pd.DataFrame(
                {
                    "M": table.M,
                    "N": N,
                    "n": n,
                    "x": (n - n_c) * L ** (1.0 / nu),
                    "y": table.column(observable) * L**y_exponent,
                }
            )
        )
    points = pd.concat(frames, ignore_index=True)
    return CollapseTable(
        points=points,
        n_c=n_c,
        nu=nu,
        y_exponent=y_exponent,
        observable=observable,
        beta=beta,
        delta=delta,
    )


def collapse(
    tables: Sequence[SweepTable], n_c: float, nu: float, beta: float
) -> CollapseTable:
    """Order parameter collapse: y = P * L ** (beta / nu)."""
    if nu == 0:
        raise DomainError("nu must be non-zero")
    return _rescale(tables, n_c, nu, "P", beta / nu, beta=beta)


def collapse_tau(
    tables: Sequence[SweepTable], n_c: float, nu: float, delta: float
) -> CollapseTable:
    """Characteristic time collapse: y = tau * L ** (-delta)."""
    return _rescale(tables, n_c, nu, "tau", -delta, delta=delta)


def collapse_quality(ct: CollapseTable) -> float:
    """
    Spread of the collapsed curves around their pointwise median.

    All curves are interpolated on the union of their abscissae inside the
    common x range. The reference at each grid point is the lower median of
    the curve values, which is itself one of the curves there; the squared
    deviations of the other k - 1 curves are averaged. Identical curves
    score 0 and two curves offset by c score c ** 2.

    Raises:
        DomainError: With fewer than two curves.
        GridRangeError: If the curves share no x range.
    """
    curves = ct.curves()
    if len(curves) < 2:
        raise DomainError("collapse quality needs at least two curves")

    low = max(x[0] for x, _ in curves.values())
    high = min(x[-1] for x, _ in curves.values())
    if low > high:
        raise GridRangeError("collapsed curves have no overlapping x range")
    all_x = np.concatenate([x for x, _ in curves.values()])
    grid = np.unique(all_x[(all_x >= low) & (all_x <= high)])
    if grid.size == 0:
        raise GridRangeError("collapsed curves have no overlapping x range")

    values = np.vstack([np.interp(grid, x, y) for x, y in curves.values()])
    k = values.shape[0]
    reference = np.sort(values, axis=0)[(k - 1) // 2]
    squared = (values - reference) ** 2
    return float(squared.sum() / ((k - 1) * grid.size))


def _require_sizes(tables: Sequence[SweepTable], minimum: int):
    sizes = {table.M for table in tables}
    if len(sizes) < minimum:
        raise DomainError(f"need at least {minimum} pool sizes, got {len(sizes)}")


def threshold_exponent(
    tables: Sequence[SweepTable], criterion: ThresholdCriterion
) -> FitResult:
    """alpha from N_c ~ L ** alpha."""
    _require_sizes(tables, MIN_FIT_POINTS)
    points = [
        (characteristic_size(table.M), detect_threshold(table, criterion))
        for table in tables
    ]
    return fit_power_law(points)


def correlation_exponent(
    tables: Sequence[SweepTable],
    criterion: ThresholdCriterion,
    n_c_inf: float | None = 0.0,
) -> FitResult:
    """
    nu from |n_c(M) - n_c(inf)| ~ L ** (-1 / nu) with n_c(M) = N_c(M) / L.

    With ``n_c_inf`` fixed (default 0) the fit is a log-log regression and
    nu = -1 / slope. With ``n_c_inf=None`` the asymptotic threshold is fitted
    too, using n_c(M) = n_c(inf) + A * L ** (-1 / nu); the intercept of the
    returned FitResult is then n_c(inf).

    Raises:
        DomainError: With fewer than four pool sizes.
    """
    _require_sizes(tables, MIN_CORRELATION_SIZES)
    L = np.array([characteristic_size(table.M) for table in tables])
    n_c = np.array([detect_threshold(table, criterion) for table in tables]) / L

    if n_c_inf is not None:
        fit = fit_power_law(list(zip(L, np.abs(n_c - n_c_inf))))
        if fit.exponent == 0.0:
            raise DomainError("reduced thresholds do not scale with size")
        nu = -1.0 / fit.exponent
        return FitResult(
            exponent=nu,
            intercept=fit.intercept,
            stderr_exponent=fit.stderr_exponent * nu**2,
            r_squared=fit.r_squared,
            points_used=fit.points_used,
        )

    def model(size, asymptote, amplitude, nu):
        return asymptote + amplitude * size ** (-1.0 / nu)

    order = np.argsort(L)
    start = (0.0, float(n_c[order[0]] * math.sqrt(L[order[0]])), 2.0)
    params, covariance = curve_fit(model, L, n_c, p0=start, maxfev=20000)
    residuals = n_c - model(L, *params)
    total = np.sum((n_c - n_c.mean()) ** 2)
    r_squared = 1.0 - np.sum(residuals**2) / total if total > 0 else 1.0
    logger.debug(f"Free n_c fit: n_c(inf)={params[0]:.4g}, A={params[1]:.4g}")
    return FitResult(
        exponent=float(params[2]),
        intercept=float(params[0]),
        stderr_exponent=float(np.sqrt(covariance[2, 2])),
        r_squared=float(r_squared),
        points_used=len(L),
    )


def order_parameter_exponent(
    tables: Sequence[SweepTable],
    nu: float,
    criterion: ThresholdCriterion | None = None,
) -> FitResult:
    """
    beta from P(N_c) ~ L ** (-beta / nu), with P read off each table at its
    own N_c by linear interpolation.
    """
    criterion = criterion or ThresholdCriterion.first_nonzero()
    _require_sizes(tables, MIN_FIT_POINTS)
    points = []
    for table in tables:
        N_c = detect_threshold(table, criterion)
        P_at_threshold = float(np.interp(N_c, table.N, table.column("P")))
        points.append((characteristic_size(table.M), P_at_threshold))
    fit = fit_power_law(points)
    return FitResult(
        exponent=-fit.exponent * nu,
        intercept=fit.intercept,
        stderr_exponent=fit.stderr_exponent * abs(nu),
        r_squared=fit.r_squared,
        points_used=fit.points_used,
    )


def tau_exponent(tables: Sequence[SweepTable]) -> FitResult:
    """delta from tau_max ~ L ** delta."""
    _require_sizes(tables, MIN_FIT_POINTS)
    points = [(characteristic_size(table.M), tau_peak(table)[1]) for table in tables]
    return fit_power_law(points)


def threshold_frame(
    tables: Sequence[SweepTable], criterion: ThresholdCriterion
) -> pd.DataFrame:
    """Per pool size: N_c, reduced n_c, P at N_c and the tau peak."""
    rows = []
    for table in sorted(tables, key=lambda table: table.M):
        L = characteristic_size(table.M)
        N_c = detect_threshold(table, criterion)
        N_peak, tau_max = tau_peak(table)
        rows.append(
            {
                "M": table.M,
                "M_over_lnM": L,
                "N_c": N_c,
                "n_c": N_c / L,
                "P_at_N_c": float(np.interp(N_c, table.N, table.column("P"))),
                "N_tau_peak": N_peak,
                "tau_max": tau_max,
            }
        )
    return pd.DataFrame(rows)


def distribution_slope(histogram: dict[int, int], table: PrimeTable) -> FitResult:
    """Log-log fit of final-value counts against value over prime values."""
    points = [
        (value, count)
        for value, count in sorted(histogram.items())
        if count > 0 and value <= table.limit and table.flags[value]
    ]
    return fit_power_law(points)
