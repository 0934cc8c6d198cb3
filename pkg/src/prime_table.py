import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from loguru import logger

from errors import DomainError


@dataclass(frozen=True, eq=False)
class PrimeTable:
    """
    Primality flags for every integer up to ``limit``.

    ``flags[k]`` is True iff k is prime; indices 0 and 1 are always False so
    the array can be indexed directly with the values of a system state.
    ``counts[k]`` holds pi(k), the number of primes in [2, k].
    """

    limit: int
    flags: np.ndarray
    counts: np.ndarray

    def is_prime(self, value: int) -> bool:
        if value < 0 or value > self.limit:
            raise DomainError(f"{value} outside the table range [0, {self.limit}]")
        return bool(self.flags[value])


@lru_cache(maxsize=32)
def build_prime_table(limit: int) -> PrimeTable:
    """
    Builds a PrimeTable with a sieve of Eratosthenes.

    Tables are cached per limit, so worker processes sieve a pool once.

    Args:
        limit: Largest integer covered by the table (M), at least 2.

    Returns:
        An immutable PrimeTable.

    Raises:
        DomainError: If limit < 2.
    """
    if limit < 2:
        raise DomainError(f"prime table limit must be >= 2, got {limit}")

    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    flags.setflags(write=False)

    counts = np.cumsum(flags, dtype=np.int64)
    counts.setflags(write=False)

    logger.debug(f"Sieved primes up to {limit}: pi({limit}) = {int(counts[-1])}")
    return PrimeTable(limit=limit, flags=flags, counts=counts)


def prime_count(table: PrimeTable, upto: int) -> int:
    """Exact pi(upto), the number of primes in [2, upto]."""
    if upto < 2 or upto > table.limit:
        raise DomainError(f"upto must lie in [2, {table.limit}], got {upto}")
    return int(table.counts[upto])


def expected_residual_ratio(M: int, table: PrimeTable | None = None) -> float:
    """
    Probability that a uniform draw from {2, ..., M} is prime: pi(M) / (M - 1).

    This is the prime ratio a system keeps when no reaction ever happens.
    """
    if M < 3:
        raise DomainError(f"pool size M must be >= 3, got {M}")
    if table is None or table.limit < M:
        table = build_prime_table(M)
    return prime_count(table, M) / (M - 1)


def asymptotic_residual_ratio(M: int) -> float:
    """Prime number theorem estimate 1 / ln(M) of the residual ratio."""
    if M < 3:
        raise DomainError(f"pool size M must be >= 3, got {M}")
    return 1.0 / math.log(M)
