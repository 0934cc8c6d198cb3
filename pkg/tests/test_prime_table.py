import math

import pytest

from errors import DomainError
from prime_table import (
    asymptotic_residual_ratio,
    build_prime_table,
    expected_residual_ratio,
    prime_count,
)


def is_prime_by_trial_division(n):
    return n >= 2 and all(n % d for d in range(2, math.isqrt(n) + 1))


def test_small_table_flags():
    table = build_prime_table(10)
    assert [k for k in range(2, 11) if table.is_prime(k)] == [2, 3, 5, 7]
    assert not any(table.is_prime(k) for k in (4, 6, 8, 9, 10))


def test_smallest_pool():
    table = build_prime_table(2)
    assert table.is_prime(2)
    assert prime_count(table, 2) == 1


def test_limit_below_two_is_rejected():
    with pytest.raises(DomainError):
        build_prime_table(1)


@pytest.mark.parametrize("upto, expected", [(2, 1), (10, 4), (100, 25), (10_000, 1229)])
def test_prime_count(upto, expected):
    assert prime_count(build_prime_table(10_000), upto) == expected


@pytest.mark.parametrize("upto", [1, 101])
def test_prime_count_out_of_range(upto):
    with pytest.raises(DomainError):
        prime_count(build_prime_table(100), upto)


def test_table_is_read_only():
    table = build_prime_table(50)
    with pytest.raises(ValueError):
        table.flags[4] = True


def test_counts_match_trial_division_up_to_ten_thousand():
    table = build_prime_table(10_000)
    running = 0
    for k in range(2, 10_001):
        running += is_prime_by_trial_division(k)
        assert bool(table.flags[k]) == is_prime_by_trial_division(k)
        assert prime_count(table, k) == running


def test_residual_ratio_small_pool():
    assert expected_residual_ratio(10) == pytest.approx(4 / 9)


def test_residual_ratio_ten_thousand():
    assert expected_residual_ratio(10_000) == pytest.approx(1229 / 9999)
    assert expected_residual_ratio(10_000) == pytest.approx(0.123, abs=5e-4)
    assert asymptotic_residual_ratio(10_000) == pytest.approx(0.1086, abs=1e-4)


def test_residual_ratio_close_to_prime_number_theorem():
    M = 2**14
    exact = expected_residual_ratio(M)
    assert abs(exact - 1 / math.log(M)) <= 0.2 / math.log(M)


def test_residual_ratio_decreases_on_powers_of_two():
    ratios = [expected_residual_ratio(2**k) for k in range(4, 17)]
    assert all(0 < r < 1 for r in ratios)
    assert all(b <= a for a, b in zip(ratios, ratios[1:]))


def test_residual_ratio_rejects_tiny_pool():
    with pytest.raises(DomainError):
        expected_residual_ratio(2)
