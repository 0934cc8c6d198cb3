import itertools
import math

import numpy as np
import pytest

from errors import DomainError
from prime_table import build_prime_table
from reactor_core import (
    CollisionKind,
    RunStatus,
    SystemState,
    collide,
    has_reactive_pair,
    init_state,
    is_frozen,
    prime_ratio,
    run_from_state,
    run_to_stationarity,
    sweep,
)


def brute_force_frozen(values):
    return not any(
        a > b and a % b == 0 for a, b in itertools.permutations(values, 2)
    )


def test_init_state_range():
    state = init_state(3, 4, np.random.default_rng(0))
    assert state.size == 4
    assert set(state.values) <= {2, 3}


def test_init_state_allows_more_values_than_pool():
    state = init_state(10_000, 100_000, np.random.default_rng(1))
    assert state.size == 100_000
    assert min(state.values) >= 2 and max(state.values) <= 10_000


def test_init_state_is_deterministic():
    first = init_state(1000, 50, np.random.default_rng(42))
    second = init_state(1000, 50, np.random.default_rng(42))
    assert first == second


@pytest.mark.parametrize("M, N", [(2, 5), (10, 1)])
def test_init_state_domain(M, N):
    with pytest.raises(DomainError):
        init_state(M, N, np.random.default_rng(0))


def test_collide_reaction():
    outcome = collide(6, 3)
    assert outcome.kind is CollisionKind.REACTION
    assert outcome.replaced_index == 0
    assert outcome.new_value == 2


def test_collide_reaction_on_second_value():
    outcome = collide(3, 6)
    assert outcome.kind is CollisionKind.REACTION
    assert outcome.replaced_index == 1
    assert outcome.new_value == 2


def test_collide_elastic_cases():
    assert collide(5, 5).kind is CollisionKind.ELASTIC_EQUAL
    assert collide(7, 3).kind is CollisionKind.ELASTIC_NONDIVISIBLE
    assert collide(7, 3).replaced_index is None


@pytest.mark.parametrize("k", range(2, 200))
def test_equal_values_never_react(k):
    assert collide(k, k).kind is CollisionKind.ELASTIC_EQUAL


def test_sweep_leaves_non_divisible_pair_alone():
    state = SystemState(values=[6, 4], pool_limit=10)
    for _ in range(20):
        _, reactions = sweep(state, np.random.default_rng(3))
        assert reactions == 0
    assert state.values == [6, 4]


def test_sweep_is_identity_on_equal_values():
    state = SystemState(values=[7] * 12, pool_limit=10)
    _, reactions = sweep(state, np.random.default_rng(5))
    assert reactions == 0
    assert state.values == [7] * 12


def test_sweep_matches_collision_rules():
    rng = np.random.default_rng(11)
    for _ in range(200):
        values = rng.integers(2, 40, size=2).tolist()
        state = SystemState(values=list(values), pool_limit=40)
        _, reactions = sweep(state, np.random.default_rng(0))
        outcome = collide(*values)
        if outcome.kind is CollisionKind.REACTION:
            assert reactions >= 1
        else:
            assert reactions == 0
            assert state.values == values


def test_forced_reaction_chain():
    table = build_prime_table(10)
    state = SystemState(values=[8, 2], pool_limit=10)
    record = run_from_state(state, np.random.default_rng(0), table)
    assert record.final_state.values == [2, 2]
    assert record.all_primes
    assert record.reactions_total == 2
    assert record.sweeps == 1
    assert record.status is RunStatus.FROZEN


def test_frozen_start_still_sweeps_once():
    table = build_prime_table(10)
    state = SystemState(values=[6, 4], pool_limit=10)
    record = run_from_state(state, np.random.default_rng(0), table)
    assert record.final_state.values == [6, 4]
    assert not record.all_primes
    assert record.reactions_total == 0
    assert record.sweeps == 1


def test_power_of_two_run_and_series():
    table = build_prime_table(1024)
    state = SystemState(values=[1024, 2], pool_limit=1024)
    record = run_from_state(state, np.random.default_rng(0), table)
    assert record.final_state.values == [2, 2]
    assert record.sweeps == 5
    assert record.reactions_total == 9
    assert record.reactions_cumulative == [0, 2, 4, 6, 8, 9]
    assert record.prime_ratio_series[0] == 0.5
    assert record.final_prime_ratio == 1.0


def test_truncation_is_reported():
    table = build_prime_table(1024)
    state = SystemState(values=[1024, 2], pool_limit=1024)
    record = run_from_state(state, np.random.default_rng(0), table, max_sweeps=2)
    assert record.status is RunStatus.TRUNCATED
    assert record.sweeps == 2
    assert record.reactions_total == 4
    assert not record.all_primes


def test_max_sweeps_must_be_positive():
    table = build_prime_table(10)
    with pytest.raises(DomainError):
        run_from_state(SystemState([8, 2], 10), np.random.default_rng(0), table, 0)


@pytest.mark.parametrize(
    "values, frozen",
    [([2, 3, 5, 5], True), ([6, 4], True), ([9, 3], False), ([12, 12, 5], True)],
)
def test_is_frozen_cases(values, frozen):
    table = build_prime_table(20)
    assert is_frozen(SystemState(values=values, pool_limit=20), table) is frozen


def test_is_frozen_agrees_with_brute_force():
    table = build_prime_table(50)
    rng = np.random.default_rng(2024)
    for _ in range(3000):
        N = int(rng.integers(2, 9))
        values = rng.integers(2, 51, size=N).tolist()
        state = SystemState(values=values, pool_limit=50)
        assert is_frozen(state, table) == brute_force_frozen(values)
        assert has_reactive_pair(values) == (not brute_force_frozen(values))


def test_is_frozen_needs_covering_table():
    with pytest.raises(DomainError):
        is_frozen(SystemState([4, 2], 100), build_prime_table(10))


def test_prime_ratio():
    table = build_prime_table(20)
    assert prime_ratio([2, 4, 5, 9], table) == 0.5


def test_run_is_reproducible():
    first = run_to_stationarity(2**10, 40, np.random.default_rng(9), 1000)
    second = run_to_stationarity(2**10, 40, np.random.default_rng(9), 1000)
    assert first == second


def test_run_invariants_on_random_realizations():
    rng = np.random.default_rng(77)
    for _ in range(300):
        M = int(rng.integers(3, 2**12 + 1))
        N = int(rng.integers(2, 65))
        table = build_prime_table(M)
        record = run_to_stationarity(M, N, rng, 10_000, table)
        assert record.status is RunStatus.FROZEN
        assert record.reactions_total <= N * math.log2(M)
        values = record.final_state.values
        assert min(values) >= 2 and max(values) <= M
        assert np.all(np.diff(record.prime_ratio_series) >= 0)
        assert np.all(np.diff(record.reactions_cumulative) >= 0)
        assert len(record.prime_ratio_series) == record.sweeps + 1
        if record.all_primes:
            assert record.final_prime_ratio == 1.0
            assert is_frozen(record.final_state, table)
        assert brute_force_frozen(values)
