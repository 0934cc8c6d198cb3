"""
The stochastic prime generator: a multiset of N integers drawn from the pool
{2, ..., M} reacts pairwise until no pair can react any more.

A reaction between two distinct values a > b with b | a replaces a by a / b.
Equal values and non-divisible pairs collide elastically. One time step
(a sweep) is N such pair draws.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from errors import DomainError, InvariantViolation
from prime_table import PrimeTable, build_prime_table

DEFAULT_MAX_SWEEPS = 1_000_000


class CollisionKind(Enum):
    ELASTIC_EQUAL = "elastic_equal"
    ELASTIC_NONDIVISIBLE = "elastic_nondivisible"
    REACTION = "reaction"


class RunStatus(Enum):
    FROZEN = "frozen"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class CollisionOutcome:
    """
    Result of one collision between the values ``(a, b)``.

    ``replaced_index`` is the position inside the pair (0 for a, 1 for b)
    of the value a reaction replaces; it is None for elastic collisions.
    """

    kind: CollisionKind
    replaced_index: int | None = None
    new_value: int | None = None


@dataclass
class SystemState:
    """The reactor contents: N integers from the pool {2, ..., pool_limit}."""

    values: list[int]
    pool_limit: int

    @property
    def size(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)


@dataclass
class RunRecord:
    """
    Outcome of one realization.

    Both series start at t = 0 with the initial state, so they hold
    ``sweeps + 1`` entries.
    """

    final_state: SystemState
    sweeps: int
    reactions_total: int
    all_primes: bool
    status: RunStatus
    reactions_cumulative: list[int] = field(default_factory=list)
    prime_ratio_series: list[float] = field(default_factory=list)

    @property
    def final_prime_ratio(self) -> float:
        return self.prime_ratio_series[-1]


def init_state(M: int, N: int, rng: np.random.Generator) -> SystemState:
    """
    Draws N values uniformly, with replacement, from {2, ..., M}.

    Raises:
        DomainError: If M < 3 or N < 2.
    """
    if M < 3:
        raise DomainError(f"pool size M must be >= 3, got {M}")
    if N < 2:
        raise DomainError(f"system size N must be >= 2, got {N}")
    values = rng.integers(2, M + 1, size=N).tolist()
    return SystemState(values=values, pool_limit=M)


def collide(a: int, b: int) -> CollisionOutcome:
    """
    Applies the collision rules to the pair (a, b).

    Equality is tested first, so (k, k) is elastic even though k | k.
    """
    if a < 2 or b < 2:
        raise DomainError(f"colliding values must be >= 2, got ({a}, {b})")
    if a == b:
        return CollisionOutcome(CollisionKind.ELASTIC_EQUAL)
    if a > b and a % b == 0:
        return CollisionOutcome(CollisionKind.REACTION, 0, a // b)
    if b > a and b % a == 0:
        return CollisionOutcome(CollisionKind.REACTION, 1, b // a)
    return CollisionOutcome(CollisionKind.ELASTIC_NONDIVISIBLE)


def sweep(state: SystemState, rng: np.random.Generator) -> tuple[SystemState, int]:
    """
    Performs one time step: N pair draws, applied in place and in order.

    Each draw picks two distinct positions uniformly; the values at those
    positions may still be equal. A later draw sees the replacements made
    by earlier draws of the same sweep.

    Returns:
        The (mutated) state and the number of reactions in this sweep.
    """
    values = state.values
    n = len(values)
    first = rng.integers(0, n, size=n)
    second = rng.integers(0, n - 1, size=n)
    second += second >= first

    # Inlined collide(): this loop dominates the run time.
    reactions = 0
    for i, j in zip(first.tolist(), second.tolist()):
        a = values[i]
        b = values[j]
        if a == b:
            continue
        if a > b:
            if a % b == 0:
                values[i] = a // b
                reactions += 1
        elif b % a == 0:
            values[j] = b // a
            reactions += 1
    return state, reactions


def has_reactive_pair(values) -> bool:
    """
    True iff two distinct values a > b with b | a occur among ``values``.

    Multiplicity is irrelevant, so only the distinct values are scanned,
    smallest divisor candidate first, stopping at the first hit.
    """
    distinct = np.unique(np.asarray(values, dtype=np.int64))
    largest = distinct[-1] if distinct.size else 0
    for k in range(distinct.size - 1):
        divisor = distinct[k]
        if 2 * divisor > largest:
            break
        if np.any(distinct[k + 1 :] % divisor == 0):
            return True
    return False


def is_frozen(state: SystemState, table: PrimeTable) -> bool:
    """
    True iff no collision can ever react again.

    An all-prime state is frozen without scanning pairs: distinct primes
    never divide each other.
    """
    if table.limit < state.pool_limit:
        raise DomainError(
            f"prime table limit {table.limit} below pool size {state.pool_limit}"
        )
    values = state.as_array()
    if table.flags[values].all():
        return True
    return not has_reactive_pair(values)


def prime_ratio(values, table: PrimeTable) -> float:
    """Fraction of prime elements in ``values``."""
    values = np.asarray(values, dtype=np.int64)
    return int(np.count_nonzero(table.flags[values])) / values.size


def run_from_state(
    state: SystemState,
    rng: np.random.Generator,
    table: PrimeTable,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> RunRecord:
    """
    Sweeps ``state`` until it freezes or ``max_sweeps`` sweeps have run.

    At least one sweep is always performed. After every sweep the state is
    checked against the run invariants: every value stays in [2, M], the
    number of primes never decreases and the total number of reactions
    never exceeds N * log2(M).

    Args:
        state: Starting state, mutated in place and returned as final_state.
        rng: Random stream owned by this realization.
        table: PrimeTable covering the pool.
        max_sweeps: Sweep cap; hitting it yields RunStatus.TRUNCATED.

    Returns:
        The RunRecord of the realization.

    Raises:
        DomainError: If max_sweeps < 1 or the table does not cover the pool.
        InvariantViolation: If a run invariant fails.
    """
    if max_sweeps < 1:
        raise DomainError(f"max_sweeps must be >= 1, got {max_sweeps}")
    if state.size < 2:
        raise DomainError(f"a run needs at least 2 values, got {state.size}")
    if table.limit < state.pool_limit:
        raise DomainError(
            f"prime table limit {table.limit} below pool size {state.pool_limit}"
        )

    n = state.size
    reaction_bound = n * math.log2(state.pool_limit)
    values = state.as_array()
    _check_range(values, state.pool_limit)
    primes = int(np.count_nonzero(table.flags[values]))

    reactions_cumulative = [0]
    prime_ratio_series = [primes / n]
    reactions_total = 0
    status = RunStatus.TRUNCATED

    for t in range(1, max_sweeps + 1):
        _, reactions = sweep(state, rng)
        reactions_total += reactions

        values = state.as_array()
        prime_flags = table.flags[values]
        now_primes = int(np.count_nonzero(prime_flags))
        if now_primes < primes:
            raise InvariantViolation(
                f"prime count fell from {primes} to {now_primes} at sweep {t}"
            )
        if reactions_total > reaction_bound:
            raise InvariantViolation(
                f"{reactions_total} reactions exceed the bound N*log2(M) = "
                f"{reaction_bound:.1f}"
            )
        if reactions:
            _check_range(values, state.pool_limit)
        primes = now_primes

        reactions_cumulative.append(reactions_total)
        prime_ratio_series.append(primes / n)

        if is_frozen(state, table):
            status = RunStatus.FROZEN
            break

    return RunRecord(
        final_state=state,
        sweeps=len(reactions_cumulative) - 1,
        reactions_total=reactions_total,
        all_primes=primes == n,
        status=status,
        reactions_cumulative=reactions_cumulative,
        prime_ratio_series=prime_ratio_series,
    )


def run_to_stationarity(
    M: int,
    N: int,
    rng: np.random.Generator,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    table: PrimeTable | None = None,
) -> RunRecord:
    """Draws a fresh state from the pool and runs it to stationarity."""
    if table is None:
        table = build_prime_table(M)
    state = init_state(M, N, rng)
    return run_from_state(state, rng, table, max_sweeps)


def _check_range(values: np.ndarray, pool_limit: int):
    if values.min() < 2 or values.max() > pool_limit:
        raise InvariantViolation(
            f"state values left the pool range [2, {pool_limit}]: "
            f"min={values.min()}, max={values.max()}"
        )
