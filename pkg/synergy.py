"""
시너지 효과 모듈
시너지 효과 = 연합 수익 / 자산별 단독 수익의 합, 포트폴리오 크기에 따른 곡선
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from asset_model import build_population, realize_horizon
from market_data import PriceSeries
from parallel import run_parallel
from settlement import PenaltyLike, as_penalty, delivery_rate, individual_arrays, settle_horizon, ProfitBreakdown

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 40


@dataclass(frozen=True)
class SynergyPoint:
    """포트폴리오 크기 하나의 시너지 효과"""
    n_assets: int
    coalition_profit: float
    sum_individual_profit: float
    ratio: Optional[float]  # 분모가 0이면 None
    zero_denominator: bool = False
    coalition_delivery_rate: Optional[float] = None
    individual_delivery_rate: Optional[float] = None


@dataclass(frozen=True)
class SynergyCurve:
    """n_assets 오름차순 시너지 곡선과 이동 평균"""
    points: Tuple[SynergyPoint, ...]
    window: int
    rolling_mean: Tuple[Optional[float], ...]

    @property
    def ratios(self) -> Tuple[Optional[float], ...]:
        return tuple(point.ratio for point in self.points)


def synergy_at(
    n_assets: int,
    prices: PriceSeries,
    penalty: PenaltyLike,
    seed: int,
    realization: Optional[np.ndarray] = None,
) -> SynergyPoint:
    """
    n_assets개 자산의 시너지 효과

    분자: 단일 수요로 묶은 전체 집단의 연합 정산
    분모: 같은 실현값으로 자산마다 따로 정산한 합계
    """
    if n_assets < 1:
        raise ValueError("자산 수는 1 이상이어야 합니다.")
    penalty = as_penalty(penalty)
    population = build_population(n_assets, 1)
    if realization is None:
        realization = realize_horizon(population, prices.horizon, seed)

    coalition = settle_horizon(population, [1], prices, penalty, seed, realization)
    individual = individual_arrays(population, prices, penalty, seed, realization)
    denominator = math.fsum(individual["total"])

    individual_sum = ProfitBreakdown.from_terms(
        math.fsum(individual["reservation"]),
        math.fsum(individual["activation"]),
        math.fsum(individual["penalty"]),
        delivered_kwh=math.fsum(individual["delivered_kwh"]),
        shortfall_kwh=math.fsum(individual["shortfall_kwh"]),
    )

    if denominator == 0:
        logger.warning(f"[synergy] n={n_assets}: 단독 수익 합계가 0이라 비율을 계산할 수 없습니다.")
        ratio = None
    else:
        ratio = coalition.total / denominator

    return SynergyPoint(
        n_assets=n_assets,
        coalition_profit=coalition.total,
        sum_individual_profit=denominator,
        ratio=ratio,
        zero_denominator=ratio is None,
        coalition_delivery_rate=delivery_rate(coalition),
        individual_delivery_rate=delivery_rate(individual_sum),
    )


def rolling_mean(ratios: Sequence[Optional[float]], window: int = DEFAULT_WINDOW) -> Tuple[Optional[float], ...]:
    """직전 min(k, window)개 비율의 평균 (None 값은 건너뜀)"""
    if window < 1:
        raise ValueError("window는 1 이상이어야 합니다.")
    series = pd.Series([np.nan if ratio is None else ratio for ratio in ratios], dtype=float)
    means = series.rolling(window, min_periods=1).mean()
    return tuple(None if np.isnan(value) else float(value) for value in means)


def synergy_curve(
    n_grid: Sequence[int],
    prices: PriceSeries,
    penalty: PenaltyLike,
    seed: int,
    window: int = DEFAULT_WINDOW,
    jobs: int = 1,
) -> SynergyCurve:
    """
    n_grid 각 크기의 시너지 효과 곡선

    실현값은 max(n_grid) 집단으로 한 번만 뽑고, 작은 집단은 앞쪽 자산을 그대로 쓴다
    (n 자산 집단은 n+1 자산 집단의 prefix).
    """
    grid = [int(n) for n in n_grid]
    if not grid:
        raise ValueError("n_grid가 비어 있습니다.")
    if grid[0] < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"n_grid는 1 이상, 순증가여야 합니다: {grid}")

    penalty = as_penalty(penalty)
    largest = build_population(grid[-1], 1)
    realization = realize_horizon(largest, prices.horizon, seed)
    logger.info(f"[synergy] 곡선 계산: {len(grid)}개 지점, 최대 {grid[-1]}개 자산, {prices.horizon}일")

    points = run_parallel(
        synergy_at,
        [(n, prices, penalty, seed, realization) for n in grid],
        jobs=jobs,
    )
    return SynergyCurve(
        points=tuple(points),
        window=window,
        rolling_mean=rolling_mean([point.ratio for point in points], window),
    )


def parse_grid(grid) -> list:
    """
    격자 지정 해석

    "10:1000:10" (start:stop:step, stop 포함), "1,5,10" 또는 정수 목록
    """
    if isinstance(grid, dict):
        return list(range(int(grid["start"]), int(grid["stop"]) + 1, int(grid["step"])))
    if isinstance(grid, (list, tuple)):
        return [int(n) for n in grid]
    text = str(grid).strip()
    if ":" in text:
        start, stop, step = (int(part) for part in text.split(":"))
        return list(range(start, stop + 1, step))
    return [int(part) for part in text.split(",") if part.strip()]
