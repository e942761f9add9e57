"""
정산 모듈
지속성(persistence) 기준선, 예비력 입찰, 활성화 시 감축량/부족량 계산 및 수익 정산
(예약 지급 + 활성화 지급 - 패널티)
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from asset_model import AssetPopulation, hour_counts, realize_horizon
from errors import HorizonTooShort, InvalidPenalty, NegativeQuantity, VectorLengthMismatch
from market_data import HOURS_PER_DAY, ActivationMask, DayPrices, PriceSeries, activation_mask

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PenaltyPrice:
    """활성화 실패 패널티 가격 (DKK/kWh, 시간 무관 상수)"""
    value: float

    def __post_init__(self):
        if not np.isfinite(self.value) or self.value < 0:
            raise InvalidPenalty(self.value)


@dataclass(frozen=True)
class ProfitBreakdown:
    """
    수익 구성

    total = reservation + activation - penalty 항등식은 생성 시 항상 다시 계산된다.
    bid_kwh / delivered_kwh / shortfall_kwh 는 진단용 합계다.
    """
    reservation: float = 0.0
    activation: float = 0.0
    penalty: float = 0.0
    total: float = 0.0
    bid_kwh: float = 0.0
    delivered_kwh: float = 0.0
    shortfall_kwh: float = 0.0

    @classmethod
    def from_terms(
        cls,
        reservation: float,
        activation: float,
        penalty: float,
        bid_kwh: float = 0.0,
        delivered_kwh: float = 0.0,
        shortfall_kwh: float = 0.0,
    ) -> "ProfitBreakdown":
        return cls(
            reservation=float(reservation),
            activation=float(activation),
            penalty=float(penalty),
            total=float(reservation) + float(activation) - float(penalty),
            bid_kwh=float(bid_kwh),
            delivered_kwh=float(delivered_kwh),
            shortfall_kwh=float(shortfall_kwh),
        )

    def __add__(self, other: "ProfitBreakdown") -> "ProfitBreakdown":
        if not isinstance(other, ProfitBreakdown):
            return NotImplemented
        return ProfitBreakdown.from_terms(
            self.reservation + other.reservation,
            self.activation + other.activation,
            self.penalty + other.penalty,
            self.bid_kwh + other.bid_kwh,
            self.delivered_kwh + other.delivered_kwh,
            self.shortfall_kwh + other.shortfall_kwh,
        )


@dataclass(frozen=True, eq=False)
class DailyPosition:
    """하루 포지션 (모두 24시간 벡터)"""
    day: int
    baseline: np.ndarray  # kW
    bid: np.ndarray  # kW
    actual: np.ndarray  # kW
    delivered: np.ndarray  # kWh
    shortfall: np.ndarray  # kWh


@dataclass(frozen=True)
class DailySettlement:
    """정산 기록 한 줄"""
    day: int
    position: DailyPosition
    breakdown: ProfitBreakdown


@dataclass(frozen=True)
class HorizonResult:
    """기간 정산 결과"""
    subset: Tuple[int, ...]
    days: Tuple[DailySettlement, ...]
    total: ProfitBreakdown


PenaltyLike = Union[PenaltyPrice, float]


def as_penalty(penalty: PenaltyLike) -> PenaltyPrice:
    return penalty if isinstance(penalty, PenaltyPrice) else PenaltyPrice(float(penalty))


def _as_vector(name: str, values) -> np.ndarray:
    vector = np.asarray(values, dtype=float)
    if vector.shape != (HOURS_PER_DAY,):
        raise VectorLengthMismatch(name, int(vector.size))
    negative = np.flatnonzero(vector < 0)
    if negative.size:
        hour = int(negative[0])
        raise NegativeQuantity(name, hour + 1, float(vector[hour]))
    return vector


def persistence_baseline(yesterday) -> np.ndarray:
    """어제 실제 소비를 그대로 내일 기준선으로 사용"""
    return _as_vector("yesterday", yesterday).copy()


def form_bid(baseline) -> np.ndarray:
    """기준선 전체를 mFRR 용량으로 입찰"""
    return _as_vector("baseline", baseline).copy()


def settle_day(
    bid,
    actual,
    failing_kw,
    prices: DayPrices,
    mask: Union[ActivationMask, np.ndarray],
    penalty: PenaltyLike,
    baseline=None,
) -> Tuple[DailyPosition, ProfitBreakdown]:
    """
    하루 정산

    Args:
        bid: 입찰 용량 (kW)
        actual: 실제 소비 (kW)
        failing_kw: 실제 소비 중 감축이 불가능한 상시 실패 자산 부하 (kW)
        prices: 하루 가격
        mask: 활성화 신호
        penalty: 패널티 가격
        baseline: 기록용 기준선 (생략 시 bid)
    """
    bid = _as_vector("bid", bid)
    actual = _as_vector("actual", actual)
    failing_kw = _as_vector("failing_kw", failing_kw)
    penalty = as_penalty(penalty)

    curtailable = actual - failing_kw
    over = np.flatnonzero(curtailable < 0)
    if over.size:
        hour = int(over[0])
        raise NegativeQuantity("actual - failing_kw", hour + 1, float(curtailable[hour]))

    active = mask.as_array() if isinstance(mask, ActivationMask) else np.asarray(mask, dtype=bool)
    if active.shape != (HOURS_PER_DAY,):
        raise VectorLengthMismatch("mask", int(active.size))

    # 활성화 시간만 감축/부족 발생, 감축은 가용 부하를 넘을 수 없음
    delivered = np.where(active, np.minimum(bid, curtailable), 0.0)
    shortfall = np.where(active, bid - delivered, 0.0)

    shortfall_kwh = float(np.sum(shortfall))
    breakdown = ProfitBreakdown.from_terms(
        reservation=float(np.sum(prices.mfrr * bid)),
        activation=float(np.sum(prices.balancing * delivered)),
        penalty=penalty.value * shortfall_kwh,
        bid_kwh=float(np.sum(bid)),
        delivered_kwh=float(np.sum(delivered)),
        shortfall_kwh=shortfall_kwh,
    )
    position = DailyPosition(
        day=prices.day,
        baseline=bid.copy() if baseline is None else np.asarray(baseline, dtype=float),
        bid=bid,
        actual=actual,
        delivered=delivered,
        shortfall=shortfall,
    )
    return position, breakdown


def _resolve_realization(
    population: AssetPopulation, prices: PriceSeries, seed: int, realization: Optional[np.ndarray]
) -> np.ndarray:
    if prices.horizon < 2:
        raise HorizonTooShort(prices.horizon)
    if realization is None:
        return realize_horizon(population, prices.horizon, seed)
    if realization.shape[0] < prices.horizon or realization.shape[1] < population.n_assets:
        raise ValueError(
            f"실현값 행렬 크기 부족: {realization.shape} (필요: {prices.horizon} x {population.n_assets})"
        )
    # 중첩 집단: 앞쪽 자산 열만 사용
    return realization[:prices.horizon, :population.n_assets]


def simulate_horizon(
    population: AssetPopulation,
    subset: Iterable[int],
    prices: PriceSeries,
    penalty: PenaltyLike,
    seed: int,
    realization: Optional[np.ndarray] = None,
) -> HorizonResult:
    """
    2 ~ D일 연합 정산 (일별 기록 포함)

    d일 기준선 = d-1일 subset 실제 소비, 입찰 = 기준선, 실제 = d일 subset 소비.
    realization을 주면 모든 subset이 같은 실현값을 공유한다.
    """
    members = population.check_subset(subset)
    hours = _resolve_realization(population, prices, seed, realization)
    penalty = as_penalty(penalty)

    member_mask = population.member_mask(members)
    failing_mask = member_mask & population.failing

    rows: List[DailySettlement] = []
    total = ProfitBreakdown()
    for day in range(2, prices.horizon + 1):
        baseline = persistence_baseline(hour_counts(hours[day - 2], member_mask))
        bid = form_bid(baseline)
        actual = hour_counts(hours[day - 1], member_mask)
        failing = hour_counts(hours[day - 1], failing_mask)
        position, breakdown = settle_day(
            bid, actual, failing, prices.day(day), activation_mask(prices, day), penalty, baseline=baseline
        )
        rows.append(DailySettlement(day=day, position=position, breakdown=breakdown))
        total = total + breakdown

    logger.debug(f"[settlement] 수요 {sorted(members)}: {len(rows)}일 정산, 수익 {total.total:.6g} DKK")
    return HorizonResult(subset=tuple(sorted(members)), days=tuple(rows), total=total)


def settle_horizon(
    population: AssetPopulation,
    subset: Iterable[int],
    prices: PriceSeries,
    penalty: PenaltyLike,
    seed: int,
    realization: Optional[np.ndarray] = None,
) -> ProfitBreakdown:
    """2 ~ D일 연합 정산 합계"""
    return simulate_horizon(population, subset, prices, penalty, seed, realization).total


def individual_arrays(
    population: AssetPopulation,
    prices: PriceSeries,
    penalty: PenaltyLike,
    seed: int,
    realization: Optional[np.ndarray] = None,
) -> Dict[str, np.ndarray]:
    """
    자산별 단독 정산 합계 (벡터화)

    자산 하나의 입찰은 어제 소비 시간의 1 kW뿐이므로 그 시간만 보면 된다.
    같은 시간에 다시 소비하고 실패 수요가 아니면 1 kWh를 감축한다.
    """
    hours = _resolve_realization(population, prices, seed, realization)
    penalty = as_penalty(penalty)
    failing = population.failing
    activation = prices.activation_matrix()

    n = population.n_assets
    reservation = np.zeros(n)
    activation_pay = np.zeros(n)
    penalty_cost = np.zeros(n)
    bid_kwh = np.zeros(n)
    delivered_kwh = np.zeros(n)
    shortfall_kwh = np.zeros(n)

    for day in range(2, prices.horizon + 1):
        bid_index = np.asarray(hours[day - 2], dtype=np.int64) - 1
        today = np.asarray(hours[day - 1], dtype=np.int64) - 1
        active = activation[day - 1, bid_index]
        delivered = (active & (today == bid_index) & ~failing).astype(float)
        shortfall = active.astype(float) - delivered

        reservation += prices.mfrr[day - 1, bid_index]
        activation_pay += prices.balancing[day - 1, bid_index] * delivered
        penalty_cost += penalty.value * shortfall
        bid_kwh += 1.0
        delivered_kwh += delivered
        shortfall_kwh += shortfall

    return {
        "reservation": reservation,
        "activation": activation_pay,
        "penalty": penalty_cost,
        "total": reservation + activation_pay - penalty_cost,
        "bid_kwh": bid_kwh,
        "delivered_kwh": delivered_kwh,
        "shortfall_kwh": shortfall_kwh,
    }


def settle_individual(
    population: AssetPopulation,
    prices: PriceSeries,
    penalty: PenaltyLike,
    seed: int,
    realization: Optional[np.ndarray] = None,
) -> Dict[int, ProfitBreakdown]:
    """AssetId -> 단독 정산 합계"""
    arrays = individual_arrays(population, prices, penalty, seed, realization)
    return {
        asset: ProfitBreakdown.from_terms(
            arrays["reservation"][index],
            arrays["activation"][index],
            arrays["penalty"][index],
            arrays["bid_kwh"][index],
            arrays["delivered_kwh"][index],
            arrays["shortfall_kwh"][index],
        )
        for index, asset in enumerate(population.asset_ids.tolist())
    }


def delivery_rate(breakdown: ProfitBreakdown) -> Optional[float]:
    """활성화 시간 감축 성공률 (활성화가 없었으면 None)"""
    called = breakdown.delivered_kwh + breakdown.shortfall_kwh
    if called == 0:
        return None
    return breakdown.delivered_kwh / called


def reprice(breakdown: ProfitBreakdown, penalty: PenaltyLike) -> ProfitBreakdown:
    """다른 패널티 가격으로 재평가 (패널티 항만 λp에 의존)"""
    penalty = as_penalty(penalty)
    return ProfitBreakdown.from_terms(
        breakdown.reservation,
        breakdown.activation,
        penalty.value * breakdown.shortfall_kwh,
        breakdown.bid_kwh,
        breakdown.delivered_kwh,
        breakdown.shortfall_kwh,
    )
