"""
시너지 효과 테스트
"""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asset_model import build_population, realize_horizon
from market_data import generate_synthetic_prices
from synergy import parse_grid, rolling_mean, synergy_at, synergy_curve


def brute_force_synergy(n_assets, prices, penalty, seed):
    """자산 루프로 직접 계산한 (연합 수익, 단독 수익 합)"""
    population = build_population(n_assets, 1)
    hours = realize_horizon(population, prices.horizon, seed)
    coalition = 0.0
    individual = 0.0
    for day in range(2, prices.horizon + 1):
        yesterday = hours[day - 2].tolist()
        today = hours[day - 1].tolist()
        for hour in range(1, 25):
            record = prices.record(day, hour)
            active = record.balancing > record.spot
            bid = yesterday.count(hour)
            actual = today.count(hour)
            coalition += record.mfrr * bid
            if active:
                delivered = min(bid, actual)
                coalition += record.balancing * delivered - penalty * (bid - delivered)
        for before, after in zip(yesterday, today):
            record = prices.record(day, before)
            individual += record.mfrr
            if record.balancing > record.spot:
                individual += record.balancing if before == after else -penalty
    return coalition, individual


def test_single_asset_ratio_is_one():
    prices = generate_synthetic_prices(seed=4, days=30)
    point = synergy_at(1, prices, 0.1, seed=2)
    assert point.ratio == 1.0
    assert point.coalition_profit == point.sum_individual_profit


def test_no_activation_ratio_is_one():
    prices = generate_synthetic_prices(seed=4, days=20, activation_rate=0.0)
    point = synergy_at(300, prices, 0.1, seed=2)
    assert point.ratio == 1.0
    assert point.coalition_delivery_rate is None


def test_matches_brute_force():
    prices = generate_synthetic_prices(seed=3, days=8, activation_rate=0.4)
    coalition, individual = brute_force_synergy(50, prices, 0.1, seed=11)
    point = synergy_at(50, prices, 0.1, seed=11)
    assert point.coalition_profit == pytest.approx(coalition, abs=1e-9)
    assert point.sum_individual_profit == pytest.approx(individual, abs=1e-9)
    assert point.ratio == pytest.approx(coalition / individual, rel=1e-12)


def test_single_point_grid():
    prices = generate_synthetic_prices(seed=1, days=10)
    curve = synergy_curve([1], prices, 0.1, seed=5)
    assert len(curve.points) == 1
    assert curve.ratios == (1.0,)
    assert curve.rolling_mean == (1.0,)


def test_curve_points_match_individual_runs():
    prices = generate_synthetic_prices(seed=1, days=10, activation_rate=0.5)
    curve = synergy_curve([5, 20, 40], prices, 0.2, seed=5)
    for point in curve.points:
        assert point == synergy_at(point.n_assets, prices, 0.2, seed=5)


def test_parallel_curve_is_identical():
    prices = generate_synthetic_prices(seed=1, days=6, activation_rate=0.5)
    sequential = synergy_curve([2, 4, 8, 16], prices, 0.2, seed=5, jobs=1)
    parallel = synergy_curve([2, 4, 8, 16], prices, 0.2, seed=5, jobs=2)
    assert sequential == parallel


@pytest.mark.parametrize("grid", [[], [0, 5], [5, 5], [10, 5]])
def test_invalid_grid(grid):
    prices = generate_synthetic_prices(seed=1, days=3)
    with pytest.raises(ValueError):
        synergy_curve(grid, prices, 0.1, seed=1)


def test_rolling_mean_of_constant_ratios():
    assert rolling_mean([1.25] * 50, window=40) == pytest.approx((1.25,) * 50)


def test_rolling_mean_window():
    assert rolling_mean([1.0, 3.0, 5.0, 7.0], window=2) == pytest.approx((1.0, 2.0, 4.0, 6.0))
    assert rolling_mean([1.0, None, 3.0], window=2) == pytest.approx((1.0, 1.0, 3.0))
    assert rolling_mean([None], window=3) == (None,)


@settings(max_examples=50, deadline=None)
@given(
    n_assets=st.integers(1, 60),
    days=st.integers(3, 9),
    rate=st.floats(0.0, 1.0),
    penalty=st.floats(0.0, 2.0),
    price_seed=st.integers(0, 10_000),
    seed=st.integers(0, 10_000),
)
def test_coalition_never_loses_to_individuals(n_assets, days, rate, penalty, price_seed, seed):
    """연합 수익 >= 단독 수익 합"""
    prices = generate_synthetic_prices(seed=price_seed, days=days, activation_rate=rate)
    point = synergy_at(n_assets, prices, penalty, seed=seed)

    scale = max(1.0, abs(point.sum_individual_profit))
    assert point.coalition_profit >= point.sum_individual_profit - 1e-9 * scale
    if point.sum_individual_profit > 0:
        assert point.ratio >= 1.0 - 1e-9


@pytest.mark.parametrize("grid, expected", [
    ("10:30:10", [10, 20, 30]),
    ("1,5,10", [1, 5, 10]),
    ({"start": 1, "stop": 3, "step": 1}, [1, 2, 3]),
    ([4, 8], [4, 8]),
])
def test_parse_grid(grid, expected):
    assert parse_grid(grid) == expected
