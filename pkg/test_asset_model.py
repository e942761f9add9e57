"""
자산 모델 테스트
"""
import io

import numpy as np
import pandas as pd
import pytest

from asset_model import (
    aggregate_consumption,
    build_population,
    consumption_profile,
    export_consumption,
    failing_consumption,
    hour_counts,
    realize_day,
    realize_horizon,
)
from errors import SplitMismatch, UnknownDemand
from rng import canonical_seed, draw_u64, uniform_index


def test_uniform_split():
    population = build_population(1000, 5)
    assert population.demand_sizes() == [200, 200, 200, 200, 200]
    assert population.owner_of(1) == 1
    assert population.owner_of(1000) == 5


def test_remainder_goes_to_lowest_ids():
    population = build_population(3, 1)
    assert population.demand_sizes() == [3]
    population = build_population(7, 3)
    assert population.demand_sizes() == [3, 2, 2]


def test_explicit_split_and_always_fail():
    population = build_population(10, 3, split=[4, 3, 3], always_fail={1})
    assert population.demand_sizes() == [4, 3, 3]
    assert population.failing.tolist() == [True] * 4 + [False] * 6
    assert population.ownership()[5] == 2


@pytest.mark.parametrize("split", [[4, 3], [4, 3, 4], [5, 6, -1]])
def test_split_mismatch(split):
    with pytest.raises(SplitMismatch):
        build_population(10, 3, split=split)


def test_always_fail_unknown_demand():
    with pytest.raises(UnknownDemand):
        build_population(10, 3, always_fail={4})


def test_hours_are_in_range_and_uniform():
    """24000개 자산의 시간 분포가 균등 (5σ 이내)"""
    population = build_population(24000, 1)
    hours = realize_day(population, 1, seed=123).hours
    assert hours.min() >= 1 and hours.max() <= 24
    counts = np.bincount(hours, minlength=25)[1:]
    expected = 24000 / 24
    sigma = np.sqrt(24000 * (1 / 24) * (23 / 24))
    assert np.all(np.abs(counts - expected) <= 5 * sigma)


def test_single_asset():
    population = build_population(1, 1)
    cd = realize_day(population, 3, seed=5)
    load = aggregate_consumption(cd, [1])
    assert load.sum() == 1.0
    assert load[cd.hour_of(1) - 1] == 1.0
    assert np.array_equal(cd.load(1), load)


def test_realization_is_deterministic():
    population = build_population(50, 2)
    first = realize_day(population, 4, seed=99).hours
    second = realize_day(population, 4, seed=99).hours
    assert np.array_equal(first, second)
    assert not np.array_equal(first, realize_day(population, 4, seed=100).hours)


def test_draws_depend_only_on_seed_day_asset():
    assert draw_u64(1, 2, 3) == draw_u64(1, 2, 3)
    assert draw_u64(1, 2, 3) != draw_u64(1, 2, 4)
    assert 0 <= uniform_index(1, 2, 3, 24) < 24


@pytest.mark.parametrize("seed", [-1, -(2 ** 63), 2 ** 63, 2 ** 64 + 5, 10 ** 30])
def test_any_integer_seed(seed):
    """음수, 64비트 초과 시드도 2^64 나머지로 처리"""
    assert 0 <= canonical_seed(seed) < 2 ** 64
    assert draw_u64(seed, 1, 1) == draw_u64(seed + 2 ** 64, 1, 1)
    hours = realize_day(build_population(10, 1), 1, seed=seed).hours
    assert ((hours >= 1) & (hours <= 24)).all()


def test_small_negative_seed_keeps_signed_encoding():
    assert canonical_seed(-1) == 2 ** 64 - 1
    assert canonical_seed(42) == 42


def test_prefix_populations_share_draws():
    """n 자산 집단은 n+1 자산 집단의 prefix"""
    small = build_population(30, 1)
    large = build_population(31, 1)
    small_hours = realize_horizon(small, 5, seed=8)
    large_hours = realize_horizon(large, 5, seed=8)
    assert np.array_equal(small_hours, large_hours[:, :30])
    assert np.array_equal(large.prefix(30).owners, small.owners)


def test_conservation():
    """모든 수요의 부하 합 = 자산 수"""
    population = build_population(200, 4)
    cd = realize_day(population, 2, seed=17)
    total = aggregate_consumption(cd, population.demands)
    assert total.sum() == 200
    assert np.array_equal(total, hour_counts(cd.hours))


def test_empty_subset_is_zero():
    population = build_population(20, 2)
    cd = realize_day(population, 1, seed=1)
    assert np.array_equal(aggregate_consumption(cd, []), np.zeros(24))


def test_disjoint_subsets_are_additive():
    population = build_population(90, 3)
    cd = realize_day(population, 6, seed=2)
    combined = aggregate_consumption(cd, [1, 3])
    assert np.array_equal(combined, aggregate_consumption(cd, [1]) + aggregate_consumption(cd, [3]))


def test_unknown_demand():
    population = build_population(10, 2)
    cd = realize_day(population, 1, seed=1)
    with pytest.raises(UnknownDemand):
        aggregate_consumption(cd, [3])


def test_failing_consumption():
    population = build_population(12, 3, always_fail={2})
    cd = realize_day(population, 1, seed=4)
    assert np.array_equal(failing_consumption(cd, [1, 2]), aggregate_consumption(cd, [2]))
    assert failing_consumption(cd, [1, 3]).sum() == 0


def test_consumption_profile_and_export():
    population = build_population(40, 2)
    cd = realize_day(population, 2, seed=3)
    profile = consumption_profile(cd)
    assert list(profile.columns) == [1, 2]
    assert profile.to_numpy().sum() == 40

    buffer = io.StringIO()
    export_consumption(cd, buffer)
    buffer.seek(0)
    frame = pd.read_csv(buffer)
    assert list(frame.columns) == ["asset", "demand", "day", "hour"]
    assert len(frame) == 40
    assert (frame["day"] == 2).all()
    assert frame["hour"].tolist() == cd.hours.tolist()
