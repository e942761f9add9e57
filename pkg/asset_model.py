"""
자산 모델 모듈
1 kW / 1시간 동질 자산 집단, 수요별 소유 관계, 일별 실제 소비 시간
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import FrozenSet, Iterable, List, Optional, Sequence, TextIO, Union

import numpy as np
import pandas as pd

from errors import SplitMismatch, UnknownDemand
from market_data import HOURS_PER_DAY
from rng import uniform_hours

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AssetPopulation:
    """
    자산 집단 (생성 후 불변)

    자산 ID는 1 ~ n_assets, 수요 ID는 1 ~ n_demands.
    owners[i] 는 자산 i+1 의 소유 수요.
    """
    n_demands: int
    owners: np.ndarray
    always_fail: FrozenSet[int] = field(default_factory=frozenset)

    @property
    def n_assets(self) -> int:
        return int(self.owners.shape[0])

    @property
    def asset_ids(self) -> np.ndarray:
        return np.arange(1, self.n_assets + 1)

    @property
    def demands(self) -> List[int]:
        return list(range(1, self.n_demands + 1))

    @property
    def failing(self) -> np.ndarray:
        """자산별 상시 실패 여부"""
        return np.isin(self.owners, sorted(self.always_fail))

    def owner_of(self, asset_id: int) -> int:
        return int(self.owners[asset_id - 1])

    def ownership(self) -> dict:
        """AssetId -> DemandId"""
        return {asset: int(owner) for asset, owner in zip(self.asset_ids.tolist(), self.owners)}

    def demand_sizes(self) -> List[int]:
        return [int(np.count_nonzero(self.owners == demand)) for demand in self.demands]

    def check_subset(self, subset: Iterable[int]) -> FrozenSet[int]:
        members = frozenset(int(demand) for demand in subset)
        for demand in members:
            if not 1 <= demand <= self.n_demands:
                raise UnknownDemand(demand, self.n_demands)
        return members

    def member_mask(self, subset: Iterable[int]) -> np.ndarray:
        """subset 소유 자산 여부"""
        return np.isin(self.owners, sorted(self.check_subset(subset)))

    def prefix(self, n_assets: int) -> "AssetPopulation":
        """앞쪽 n_assets개 자산만 남긴 집단 (추출값은 자산 ID로만 결정되므로 그대로 유지된다)"""
        if not 0 <= n_assets <= self.n_assets:
            raise ValueError(f"prefix 크기 범위 오류: {n_assets}")
        return AssetPopulation(self.n_demands, self.owners[:n_assets], self.always_fail)


@dataclass(frozen=True, eq=False)
class ConsumptionDay:
    """하루의 실제 소비 (자산마다 정확히 한 시간 1 kW)"""
    day: int
    hours: np.ndarray  # hours[i] = 자산 i+1 의 소비 시간 (1 ~ 24)
    population: AssetPopulation

    def hour_of(self, asset_id: int) -> int:
        return int(self.hours[asset_id - 1])

    def load(self, asset_id: int) -> np.ndarray:
        """자산 하나의 24시간 부하 벡터 (kW)"""
        vector = np.zeros(HOURS_PER_DAY)
        vector[self.hour_of(asset_id) - 1] = 1.0
        return vector


def build_population(
    n_assets: int,
    n_demands: int,
    split: Optional[Sequence[int]] = None,
    always_fail: Iterable[int] = (),
) -> AssetPopulation:
    """
    자산 집단 생성

    Args:
        n_assets: 자산 수
        n_demands: 수요 수 (1 이상)
        split: 수요별 자산 수 (None이면 균등 분할, 나머지는 낮은 ID부터)
        always_fail: 활성화 단계에서 항상 실패하는 수요 ID
    """
    if n_demands < 1:
        raise ValueError("수요 수는 1 이상이어야 합니다.")
    if n_assets < 0:
        raise ValueError("자산 수는 0 이상이어야 합니다.")

    if split is None:
        base, remainder = divmod(n_assets, n_demands)
        sizes = [base + (1 if index < remainder else 0) for index in range(n_demands)]
    else:
        sizes = [int(size) for size in split]
        if len(sizes) != n_demands or sum(sizes) != n_assets or min(sizes) < 0:
            raise SplitMismatch(sizes, n_assets)

    owners = np.repeat(np.arange(1, n_demands + 1), sizes).astype(np.int32)
    owners.setflags(write=False)

    failing = frozenset(int(demand) for demand in always_fail)
    for demand in failing:
        if not 1 <= demand <= n_demands:
            raise UnknownDemand(demand, n_demands)

    population = AssetPopulation(n_demands=n_demands, owners=owners, always_fail=failing)
    logger.debug(f"[asset_model] 자산 집단 생성: {n_assets}개 자산, 수요별 {sizes}, 상시 실패 {sorted(failing)}")
    return population


def realize_day(population: AssetPopulation, day: int, seed: int) -> ConsumptionDay:
    """
    day의 실제 소비 시간 추출

    각 자산의 시간은 (seed, day, AssetId)만의 함수이며 1 ~ 24에서 균등하다.
    """
    if day < 1:
        raise ValueError("day는 1 이상이어야 합니다.")
    hours = uniform_hours(seed, day, population.asset_ids, HOURS_PER_DAY)
    hours.setflags(write=False)
    return ConsumptionDay(day=day, hours=hours, population=population)


def realize_horizon(population: AssetPopulation, days: int, seed: int) -> np.ndarray:
    """1 ~ days일 소비 시간 행렬 (days, n_assets)"""
    matrix = np.empty((days, population.n_assets), dtype=np.int16)
    for day in range(1, days + 1):
        matrix[day - 1] = realize_day(population, day, seed).hours
    matrix.setflags(write=False)
    return matrix


def hour_counts(hours: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """소비 시간 배열 -> 24시간 부하 벡터 (kW)"""
    selected = hours if mask is None else hours[mask]
    return np.bincount(np.asarray(selected, dtype=np.int64) - 1, minlength=HOURS_PER_DAY).astype(float)


def aggregate_consumption(cd: ConsumptionDay, subset: Iterable[int]) -> np.ndarray:
    """subset 소유 자산들의 24시간 합계 부하 (kW)"""
    mask = cd.population.member_mask(subset)
    return hour_counts(cd.hours, mask)


def failing_consumption(cd: ConsumptionDay, subset: Iterable[int]) -> np.ndarray:
    """subset 중 상시 실패 수요 자산의 24시간 부하 (kW, 감축 불가)"""
    members = cd.population.check_subset(subset)
    return aggregate_consumption(cd, members & cd.population.always_fail)


def consumption_profile(cd: ConsumptionDay) -> pd.DataFrame:
    """수요별 24시간 부하 (index: hour, columns: demand)"""
    profile = {
        demand: aggregate_consumption(cd, [demand])
        for demand in cd.population.demands
    }
    frame = pd.DataFrame(profile, index=pd.RangeIndex(1, HOURS_PER_DAY + 1, name="hour"))
    frame.columns.name = "demand"
    return frame


def export_consumption(cd: ConsumptionDay, target: Union[str, Path, TextIO]):
    """소비 기록 CSV 저장 (asset,demand,day,hour)"""
    frame = pd.DataFrame({
        "asset": cd.population.asset_ids,
        "demand": cd.population.owners,
        "day": cd.day,
        "hour": cd.hours,
    })
    frame.to_csv(target, index=False, lineterminator="\n")
