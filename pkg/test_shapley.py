"""
Shapley 배분 테스트
"""
import itertools
import logging
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from asset_model import build_population
from errors import IncompleteTable, TooManyDemands
from market_data import generate_synthetic_prices
from settlement import settle_horizon
from shapley import (
    CharacteristicTable,
    PenaltySweepResult,
    characteristic_table,
    exact_shapley,
    individual_rationality,
    leave_one_out,
    penalty_sweep,
    sampled_shapley,
    characteristic_terms,
)


def table_from(demands, value_fn):
    return CharacteristicTable.from_function(demands, value_fn)


def permutation_shapley(table: CharacteristicTable):
    """|D|! 순열을 모두 열거해 평균 한계 기여 계산"""
    totals = {demand: 0.0 for demand in table.demands}
    orders = list(itertools.permutations(table.demands))
    for order in orders:
        members = []
        for demand in order:
            before = table.value(members)
            members.append(demand)
            totals[demand] += table.value(members) - before
    return {demand: total / len(orders) for demand, total in totals.items()}


def random_table(rng, n):
    values = np.concatenate([[0.0], rng.uniform(-10.0, 10.0, (1 << n) - 1)])
    return CharacteristicTable(tuple(range(1, n + 1)), values, subsets_evaluated=(1 << n) - 1)


def test_additive_game():
    weights = {1: 3.0, 2: -1.5, 3: 0.25}
    table = table_from(weights, lambda members: sum(weights[d] for d in members))
    allocation = exact_shapley(table)
    assert allocation.payments == pytest.approx(weights)
    assert allocation.subsets_evaluated == 7


def test_two_player_hand_example():
    table = CharacteristicTable((1, 2), np.array([0.0, 1.0, 1.0, 3.0]))
    allocation = exact_shapley(table)
    assert allocation.payments == {1: 1.5, 2: 1.5}
    assert allocation.efficiency_gap == 0.0


def test_three_player_matches_permutations():
    values = {(): 0.0, (1,): 1.0, (2,): 2.0, (3,): 0.5, (1, 2): 4.0, (1, 3): 2.0, (2, 3): 3.0, (1, 2, 3): 7.0}
    table = table_from((1, 2, 3), lambda members: values[tuple(sorted(members))])
    allocation = exact_shapley(table)
    assert allocation.payments == pytest.approx(permutation_shapley(table), abs=1e-12)
    assert allocation.total_paid == pytest.approx(7.0)


@st.composite
def game_pairs(draw, min_demands=2, max_demands=6):
    """같은 수요 집합 위의 임의 특성 함수 두 개"""
    n = draw(st.integers(min_demands, max_demands))
    size = (1 << n) - 1
    values = st.lists(st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False), min_size=size, max_size=size)
    demands = tuple(range(1, n + 1))
    return tuple(
        CharacteristicTable(demands, np.array([0.0] + draw(values)), subsets_evaluated=size)
        for _ in range(2)
    )


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(games=game_pairs())
def test_axioms_on_random_games(games):
    """효율성, 대칭성, 무임승차자, 선형성, 순열 열거 일치"""
    base, other = games
    demands = base.demands
    n = len(demands)

    allocation = exact_shapley(base)
    grand = base.values[-1]
    assert abs(allocation.total_paid - grand) <= 1e-9 * n * max(1.0, abs(grand))
    assert allocation.payments == pytest.approx(permutation_shapley(base), abs=1e-10)

    combined = exact_shapley(base + other)
    separate = exact_shapley(other)
    for demand in demands:
        assert combined.payments[demand] == pytest.approx(
            allocation.payments[demand] + separate.payments[demand], abs=1e-10
        )

    # 1, 2 교환 대칭 게임
    def swapped(members):
        return frozenset({2 if d == 1 else 1 if d == 2 else d for d in members})

    symmetric = table_from(demands, lambda members: (base.value(members) + base.value(swapped(members))) / 2)
    payments = exact_shapley(symmetric).payments
    assert payments[1] == pytest.approx(payments[2], abs=1e-10)

    # 마지막 수요는 기여가 0
    dummy = table_from(demands, lambda members: base.value(members - {n}) if members - {n} else 0.0)
    assert exact_shapley(dummy).payments[n] == pytest.approx(0.0, abs=1e-10)


def test_table_validation():
    with pytest.raises(IncompleteTable):
        CharacteristicTable((1, 2), np.zeros(3))
    with pytest.raises(ValueError):
        CharacteristicTable((1,), np.array([1.0, 2.0]))
    with pytest.raises(IncompleteTable):
        exact_shapley(CharacteristicTable((1, 2), np.array([0.0, 1.0, np.nan, 2.0])))


def test_exhaustive_sampling_equals_exact():
    rng = np.random.default_rng(3)
    table = random_table(rng, 4)
    sampled = sampled_shapley(lambda members: table.value(members), 4, 1, sample_seed=0, exhaustive=True)
    assert sampled.n_samples == 24
    assert sampled.payments == pytest.approx(exact_shapley(table).payments, abs=1e-10)
    assert sampled.subsets_evaluated == 15


def test_sampling_additive_game_is_exact():
    weights = {1: 3.0, 2: -2.0, 3: 5.0}
    allocation = sampled_shapley(lambda members: sum(weights[d] for d in members), 3, 50, sample_seed=4)
    assert allocation.payments == weights
    assert allocation.stderr == {1: 0.0, 2: 0.0, 3: 0.0}
    assert allocation.mode == "sampled"
    assert allocation.sample_seed == 4


def test_sampling_converges():
    rng = np.random.default_rng(12)
    table = random_table(rng, 5)
    exact = exact_shapley(table).payments
    sampled = sampled_shapley(lambda members: table.value(members), 5, 10_000, sample_seed=1)
    for demand in table.demands:
        assert abs(sampled.payments[demand] - exact[demand]) <= 4 * sampled.stderr[demand] + 1e-12


def test_sampling_is_reproducible():
    rng = np.random.default_rng(5)
    table = random_table(rng, 4)
    first = sampled_shapley(lambda members: table.value(members), 4, 200, sample_seed=9)
    second = sampled_shapley(lambda members: table.value(members), 4, 200, sample_seed=9)
    assert first == second


def test_leave_one_out():
    weights = {1: 1.0, 2: 2.0, 3: 4.0}
    table = table_from(weights, lambda members: sum(weights[d] for d in members) + (1.0 if len(members) == 3 else 0.0))
    without = leave_one_out(table, 1)
    assert without.payments == pytest.approx({2: 2.0, 3: 4.0})
    assert without.grand_value == pytest.approx(6.0)

    single = CharacteristicTable((1,), np.array([0.0, 5.0]))
    assert leave_one_out(single, 1).payments == {}


def test_individual_rationality_warning(caplog):
    # 수요 1은 단독 10, 연합 전체는 10
    table = CharacteristicTable((1, 2), np.array([0.0, 10.0, 0.0, 10.0]))
    allocation = exact_shapley(table)
    with caplog.at_level(logging.WARNING, logger="shapley"):
        surplus = individual_rationality(table, allocation)
    assert surplus[1] == pytest.approx(0.0)
    assert surplus[2] == pytest.approx(0.0)
    assert not caplog.records

    table = CharacteristicTable((1, 2), np.array([0.0, 10.0, 0.0, 6.0]))
    with caplog.at_level(logging.WARNING, logger="shapley"):
        surplus = individual_rationality(table, exact_shapley(table))
    assert surplus[1] == pytest.approx(-2.0)
    assert caplog.records


def test_single_demand_payment_is_grand_value():
    prices = generate_synthetic_prices(seed=1, days=6)
    population = build_population(20, 1)
    table = characteristic_table(population, prices, 0.1, seed=3)
    allocation = exact_shapley(table)
    assert allocation.payments[1] == table.values[-1]


def test_five_demand_table():
    prices = generate_synthetic_prices(seed=1, days=5, activation_rate=0.5)
    population = build_population(50, 5, always_fail={1})
    table = characteristic_table(population, prices, 0.1, seed=3)
    assert table.values.shape == (32,)
    assert table.subsets_evaluated == 31
    assert table.value([2, 4]) == pytest.approx(settle_horizon(population, [2, 4], prices, 0.1, seed=3).total)
    allocation = exact_shapley(table)
    assert allocation.total_paid == pytest.approx(table.value(population.demands), abs=1e-9)


def test_no_activation_game_is_additive():
    prices = generate_synthetic_prices(seed=2, days=6, activation_rate=0.0)
    population = build_population(30, 3)
    table = characteristic_table(population, prices, 0.1, seed=3)
    allocation = exact_shapley(table)
    for demand in population.demands:
        assert allocation.payments[demand] == pytest.approx(table.value([demand]), abs=1e-12)


def test_too_many_demands():
    population = build_population(21, 21)
    prices = generate_synthetic_prices(seed=1, days=3)
    with pytest.raises(TooManyDemands):
        characteristic_terms(population, prices, 0.1, seed=1)


def test_penalty_sweep_fast_path_agrees():
    prices = generate_synthetic_prices(seed=6, days=6, activation_rate=0.5)
    population = build_population(30, 3, always_fail={1})
    grid = [0.0, 0.5, 1.5]
    slow = penalty_sweep(population, prices, grid, seed=2)
    fast = penalty_sweep(population, prices, grid, seed=2, reprice_fast=True)
    for name in ("focus_in_coalition", "rest_in_coalition", "focus_alone", "rest_without_focus"):
        assert getattr(fast, name) == pytest.approx(getattr(slow, name), abs=1e-9)
    assert slow.subsets_evaluated == 7


def test_penalty_sweep_series():
    prices = generate_synthetic_prices(seed=6, days=6, activation_rate=0.5)
    population = build_population(30, 3, always_fail={1})
    result = penalty_sweep(population, prices, [0.0, 1.0], seed=2)

    # λp = 0 이면 실패 수요도 음의 기여를 하지 않는다
    assert result.focus_in_coalition[0] >= -1e-12
    for index, value in enumerate(result.grid):
        rest = settle_horizon(population, [2, 3], prices, value, seed=2).total
        alone = settle_horizon(population, [1], prices, value, seed=2).total
        assert result.rest_without_focus[index] == pytest.approx(rest, abs=1e-9)
        assert result.focus_alone[index] == pytest.approx(alone, abs=1e-9)
    assert len(result.focus_prefers_coalition) == 2


def test_zero_crossing():
    prices = generate_synthetic_prices(seed=6, days=4)
    population = build_population(10, 2, always_fail={1})
    result = penalty_sweep(population, prices, [0.0], seed=1)
    assert result.zero_crossing() is None
    crossing = PenaltySweepResult(
        grid=(0.0, 1.0, 2.0),
        focus=1,
        focus_in_coalition=(2.0, 1.0, -1.0),
        rest_in_coalition=(0.0, 0.0, 0.0),
        focus_alone=(0.0, 0.0, 0.0),
        rest_without_focus=(0.0, 0.0, 0.0),
    ).zero_crossing()
    assert crossing == pytest.approx(1.5)
    assert math.isfinite(crossing)


def test_equal_demands_get_similar_payments():
    """수요 5개 x 자산 200개, 상시 실패 없음: 지급액 차이는 v(D) 대비 작다"""
    prices = generate_synthetic_prices(seed=3, days=20, activation_rate=0.3)
    population = build_population(1000, 5)
    table = characteristic_table(population, prices, 0.1, seed=7)
    payments = list(exact_shapley(table).payments.values())
    spread = max(payments) - min(payments)
    assert spread <= 0.05 * abs(table.values[-1])
