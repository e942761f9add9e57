"""
Shapley 배분 모듈
수요 부분집합별 특성 함수 v(S), 정확한 Shapley 값, 순열 샘플링 근사,
leave-one-out 배분 및 패널티 가격 스윕
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from asset_model import AssetPopulation, realize_horizon
from errors import IncompleteTable, TooManyDemands, UnknownDemand
from market_data import PriceSeries
from parallel import run_parallel
from rng import canonical_seed
from settlement import PenaltyLike, ProfitBreakdown, as_penalty, reprice, settle_horizon

logger = logging.getLogger(__name__)

# 정확 계산 한도 (2^20 ≈ 100만 부분집합 정산)
MAX_EXACT_DEMANDS = 20

# 효율성(예산 균형) 허용 오차 계수: 1e-9 * |D|
EFFICIENCY_TOLERANCE = 1e-9


def _popcounts(n_bits: int) -> np.ndarray:
    masks = np.arange(1 << n_bits)
    sizes = np.zeros(1 << n_bits, dtype=np.int64)
    for bit in range(n_bits):
        sizes += (masks >> bit) & 1
    return sizes


@dataclass(frozen=True, eq=False)
class CharacteristicTable:
    """
    특성 함수 테이블

    demands[i] 가 비트 i 에 대응한다. values[mask] = v(S), values[0] = v(∅) = 0.
    아직 평가하지 않은 부분집합은 NaN 으로 둘 수 있다 (정확 계산 시 IncompleteTable).
    """
    demands: Tuple[int, ...]
    values: np.ndarray
    subsets_evaluated: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (1 << len(self.demands),):
            raise IncompleteTable(int(values.size), len(self.demands))
        if values[0] != 0.0:
            raise ValueError(f"v(∅)는 0이어야 합니다: {values[0]}")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_demands(self) -> int:
        return len(self.demands)

    @property
    def is_complete(self) -> bool:
        return not np.isnan(self.values).any()

    def mask_of(self, subset: Iterable[int]) -> int:
        index = {demand: position for position, demand in enumerate(self.demands)}
        mask = 0
        for demand in subset:
            if demand not in index:
                raise UnknownDemand(demand, self.n_demands)
            mask |= 1 << index[demand]
        return mask

    def subset_of(self, mask: int) -> Tuple[int, ...]:
        return tuple(demand for position, demand in enumerate(self.demands) if mask >> position & 1)

    def value(self, subset: Iterable[int]) -> float:
        return float(self.values[self.mask_of(subset)])

    def __add__(self, other: "CharacteristicTable") -> "CharacteristicTable":
        if not isinstance(other, CharacteristicTable):
            return NotImplemented
        if other.demands != self.demands:
            raise ValueError("수요 집합이 다른 테이블은 더할 수 없습니다.")
        return CharacteristicTable(self.demands, self.values + other.values)

    def restrict(self, excluded: int) -> "CharacteristicTable":
        """excluded를 뺀 부분 게임 테이블 (필요한 v(S)는 이미 모두 있음)"""
        if excluded not in self.demands:
            raise UnknownDemand(excluded, self.n_demands)
        positions = [position for position, demand in enumerate(self.demands) if demand != excluded]
        sub_masks = np.arange(1 << len(positions))
        full_masks = np.zeros_like(sub_masks)
        for sub_bit, position in enumerate(positions):
            full_masks |= ((sub_masks >> sub_bit) & 1) << position
        return CharacteristicTable(
            demands=tuple(self.demands[position] for position in positions),
            values=self.values[full_masks],
        )

    @classmethod
    def from_function(
        cls, demands: Sequence[int], value_fn: Callable[[FrozenSet[int]], float]
    ) -> "CharacteristicTable":
        """모든 비어 있지 않은 부분집합에 value_fn을 적용해 테이블 생성"""
        demands = tuple(demands)
        values = np.zeros(1 << len(demands))
        table = cls(demands, values)
        for mask in range(1, 1 << len(demands)):
            values[mask] = value_fn(frozenset(table.subset_of(mask)))
        return cls(demands, values, subsets_evaluated=(1 << len(demands)) - 1)


@dataclass(frozen=True)
class Allocation:
    """수요별 지급액"""
    payments: Dict[int, float]
    grand_value: float
    mode: str  # "exact" | "sampled"
    subsets_evaluated: int = 0
    n_samples: Optional[int] = None
    sample_seed: Optional[int] = None
    stderr: Optional[Dict[int, float]] = None

    @property
    def total_paid(self) -> float:
        return math.fsum(self.payments.values())

    @property
    def efficiency_gap(self) -> float:
        """Σφ - v(D) (정확 모드에서는 0에 가깝고, 샘플 모드에서는 보고만 함)"""
        return self.total_paid - self.grand_value


def exact_shapley(table: CharacteristicTable) -> Allocation:
    """
    정확한 Shapley 값

    φ_d = Σ_{S∋d} (|S|-1)!(|D|-|S|)!/|D|! · [v(S) - v(S∖{d})]
    가중치는 1 / (|D| · C(|D|-1, |S|-1)) 로 계산해 계승 오버플로를 피한다.
    """
    n = table.n_demands
    values = np.asarray(table.values, dtype=float)
    if not table.is_complete:
        raise IncompleteTable(int(np.count_nonzero(~np.isnan(values))), n)

    payments: Dict[int, float] = {}
    if n == 0:
        return Allocation(payments=payments, grand_value=0.0, mode="exact", subsets_evaluated=0)

    sizes = _popcounts(n)
    size_weights = np.array([0.0] + [1.0 / (n * math.comb(n - 1, s - 1)) for s in range(1, n + 1)])
    weights = size_weights[sizes]
    masks = np.arange(1 << n)

    for position, demand in enumerate(table.demands):
        bit = 1 << position
        with_d = masks[(masks & bit) != 0]
        marginal = values[with_d] - values[with_d ^ bit]
        payments[demand] = math.fsum((weights[with_d] * marginal).tolist())

    allocation = Allocation(
        payments=payments,
        grand_value=float(values[-1]),
        mode="exact",
        subsets_evaluated=table.subsets_evaluated,
    )
    limit = EFFICIENCY_TOLERANCE * n * max(1.0, abs(allocation.grand_value))
    if abs(allocation.efficiency_gap) > limit:
        logger.warning(f"[shapley] 예산 균형 오차가 허용치를 넘었습니다: {allocation.efficiency_gap:.6g}")
    return allocation


def sampled_shapley(
    value_fn: Callable[[FrozenSet[int]], float],
    n_demands: int,
    m_samples: int,
    sample_seed: int,
    exhaustive: bool = False,
    demands: Optional[Sequence[int]] = None,
) -> Allocation:
    """
    순열 샘플링 Shapley 근사

    Args:
        value_fn: 수요 ID frozenset -> 수익
        n_demands: 수요 수
        m_samples: 균등 추출 순열 수 (exhaustive면 무시)
        sample_seed: 순열 추출 시드
        exhaustive: 모든 |D|! 순열 열거 (비복원 모드)
        demands: 수요 ID (기본값 1 ~ n_demands)

    추정치는 보정 없이 그대로 보고하며, 수요별 표준오차를 함께 돌려준다.
    """
    if m_samples < 1 and not exhaustive:
        raise ValueError("m_samples는 1 이상이어야 합니다.")
    ids = tuple(demands) if demands is not None else tuple(range(1, n_demands + 1))
    index = {demand: position for position, demand in enumerate(ids)}

    cache: Dict[FrozenSet[int], float] = {frozenset(): 0.0}

    def value(members: FrozenSet[int]) -> float:
        if members not in cache:
            cache[members] = float(value_fn(members))
        return cache[members]

    if exhaustive:
        orders: Iterable[Sequence[int]] = itertools.permutations(ids)
        m = math.factorial(len(ids))
    else:
        rng = np.random.default_rng(canonical_seed(sample_seed))
        m = m_samples
        orders = (tuple(rng.permutation(np.array(ids)).tolist()) for _ in range(m))

    contributions = np.zeros((m, len(ids)))
    for row, order in enumerate(orders):
        members: FrozenSet[int] = frozenset()
        previous = 0.0
        for demand in order:
            members = members | {demand}
            current = value(members)
            contributions[row, index[demand]] = current - previous
            previous = current

    payments = contributions.mean(axis=0)
    if m > 1:
        stderr = contributions.std(axis=0, ddof=1) / math.sqrt(m)
    else:
        stderr = np.zeros(len(ids))

    allocation = Allocation(
        payments={demand: float(payments[index[demand]]) for demand in ids},
        grand_value=value(frozenset(ids)),
        mode="sampled",
        subsets_evaluated=len(cache) - 1,
        n_samples=m,
        sample_seed=None if exhaustive else sample_seed,
        stderr={demand: float(stderr[index[demand]]) for demand in ids},
    )
    logger.info(
        f"[shapley] 샘플링 완료: {m}개 순열, {allocation.subsets_evaluated}개 부분집합 평가, "
        f"효율성 차이 {allocation.efficiency_gap:.6g}"
    )
    return allocation


def leave_one_out(table: CharacteristicTable, excluded: int) -> Allocation:
    """excluded가 연합에 없을 때 나머지 수요의 정확한 Shapley 값"""
    return exact_shapley(table.restrict(excluded))


def individual_rationality(table: CharacteristicTable, allocation: Allocation, tolerance: float = 1e-9) -> Dict[int, float]:
    """
    수요별 φ_d - v({d})

    음수면 단독으로 더 벌 수 있다는 뜻이다. 위반은 경고로 기록만 한다.
    """
    surplus = {demand: allocation.payments[demand] - table.value([demand]) for demand in table.demands}
    for demand, gap in surplus.items():
        if gap < -tolerance * max(1.0, abs(table.value([demand]))):
            logger.warning(f"[shapley] 개인 합리성 위반: 수요 {demand}, φ - v({{d}}) = {gap:.6g}")
    return surplus


# ========== 부분집합 정산 ==========

def characteristic_terms(
    population: AssetPopulation,
    prices: PriceSeries,
    penalty: PenaltyLike,
    seed: int,
    jobs: int = 1,
    realization: Optional[np.ndarray] = None,
) -> List[ProfitBreakdown]:
    """
    모든 부분집합의 기간 정산 (index = 비트마스크, 0번은 빈 집합)

    모든 부분집합이 같은 실현값을 공유하므로 각 수요의 자산은 어느 부분집합에서나 똑같이 행동한다.
    """
    n = population.n_demands
    if n > MAX_EXACT_DEMANDS:
        raise TooManyDemands(n, MAX_EXACT_DEMANDS)
    penalty = as_penalty(penalty)
    if realization is None:
        realization = realize_horizon(population, prices.horizon, seed)

    demands = population.demands
    subsets = [
        tuple(demand for position, demand in enumerate(demands) if mask >> position & 1)
        for mask in range(1, 1 << n)
    ]
    totals = run_parallel(
        settle_horizon,
        [(population, subset, prices, penalty, seed, realization) for subset in subsets],
        jobs=jobs,
    )
    return [ProfitBreakdown()] + list(totals)


def characteristic_table(
    population: AssetPopulation,
    prices: PriceSeries,
    penalty: PenaltyLike,
    seed: int,
    jobs: int = 1,
    realization: Optional[np.ndarray] = None,
) -> CharacteristicTable:
    """v(S) = S 부분집합만의 기간 정산 수익 (모든 S에 같은 seed)"""
    breakdowns = characteristic_terms(population, prices, penalty, seed, jobs, realization)
    table = CharacteristicTable(
        demands=tuple(population.demands),
        values=np.array([breakdown.total for breakdown in breakdowns]),
        subsets_evaluated=len(breakdowns) - 1,
    )
    logger.info(f"[shapley] 특성 함수 계산 완료: {table.subsets_evaluated}개 부분집합, v(D) = {table.values[-1]:.6g}")
    return table


def table_at_penalty(
    demands: Sequence[int], breakdowns: Sequence[ProfitBreakdown], penalty: PenaltyLike
) -> CharacteristicTable:
    """캐시된 (예약, 활성화, 부족량) 으로 다른 패널티 가격의 테이블 재구성"""
    values = np.array([reprice(breakdown, penalty).total for breakdown in breakdowns])
    values[0] = 0.0
    return CharacteristicTable(tuple(demands), values, subsets_evaluated=len(breakdowns) - 1)


# ========== 패널티 가격 스윕 ==========

@dataclass(frozen=True)
class PenaltySweepResult:
    """
    패널티 가격별 네 계열

    focus_in_coalition: 연합 안에서 focus 수요의 φ
    rest_in_coalition: 연합 안에서 나머지 수요 φ 합
    focus_alone: focus가 연합 밖일 때의 수익 v({focus})
    rest_without_focus: focus를 뺀 연합의 leave-one-out 지급 합 (= v(D∖{focus}))
    """
    grid: Tuple[float, ...]
    focus: int
    focus_in_coalition: Tuple[float, ...]
    rest_in_coalition: Tuple[float, ...]
    focus_alone: Tuple[float, ...]
    rest_without_focus: Tuple[float, ...]
    reprice_fast: bool = False
    subsets_evaluated: int = 0

    @property
    def focus_prefers_coalition(self) -> Tuple[bool, ...]:
        return tuple(a >= b - 1e-9 * max(1.0, abs(b)) for a, b in zip(self.focus_in_coalition, self.focus_alone))

    @property
    def rest_prefers_coalition(self) -> Tuple[bool, ...]:
        return tuple(a >= b - 1e-9 * max(1.0, abs(b)) for a, b in zip(self.rest_in_coalition, self.rest_without_focus))

    def zero_crossing(self) -> Optional[float]:
        """focus_in_coalition이 처음 음수가 되는 구간의 선형 보간 λp"""
        points = list(zip(self.grid, self.focus_in_coalition))
        for (x0, y0), (x1, y1) in zip(points, points[1:]):
            if y0 >= 0 > y1:
                return x0 + (x1 - x0) * y0 / (y0 - y1)
        return None


def penalty_sweep(
    population: AssetPopulation,
    prices: PriceSeries,
    lambda_grid: Sequence[float],
    seed: int,
    focus: int = 1,
    reprice_fast: bool = False,
    jobs: int = 1,
) -> PenaltySweepResult:
    """
    패널티 가격을 바꿔 가며 Shapley / leave-one-out 배분 계산

    기본 경로는 λp마다 모든 부분집합을 다시 정산한다.
    reprice_fast면 λp=0 정산의 (예약, 활성화, 부족량) 을 재사용해 패널티 항만 다시 계산한다.
    """
    if focus not in population.demands:
        raise UnknownDemand(focus, population.n_demands)
    if focus not in population.always_fail:
        logger.warning(f"[shapley] 수요 {focus}가 상시 실패로 설정되어 있지 않습니다 (always_fail={sorted(population.always_fail)})")

    grid = tuple(float(value) for value in lambda_grid)
    penalties = [as_penalty(value) for value in grid]
    realization = realize_horizon(population, prices.horizon, seed)
    cached = characteristic_terms(population, prices, 0.0, seed, jobs, realization) if reprice_fast else None

    series: Dict[str, List[float]] = {key: [] for key in ("focus_in", "rest_in", "focus_alone", "rest_without")}
    subsets_evaluated = 0
    for penalty in penalties:
        if cached is not None:
            table = table_at_penalty(population.demands, cached, penalty)
        else:
            table = characteristic_table(population, prices, penalty, seed, jobs, realization)
        subsets_evaluated = table.subsets_evaluated

        grand = exact_shapley(table)
        without = leave_one_out(table, focus)

        series["focus_in"].append(grand.payments[focus])
        series["rest_in"].append(math.fsum(value for demand, value in grand.payments.items() if demand != focus))
        series["focus_alone"].append(table.value([focus]))
        series["rest_without"].append(without.total_paid)
        logger.info(
            f"[shapley] λp={penalty.value:g}: φ_{focus}={grand.payments[focus]:.6g}, "
            f"단독 {table.value([focus]):.6g}"
        )

    return PenaltySweepResult(
        grid=grid,
        focus=focus,
        focus_in_coalition=tuple(series["focus_in"]),
        rest_in_coalition=tuple(series["rest_in"]),
        focus_alone=tuple(series["focus_alone"]),
        rest_without_focus=tuple(series["rest_without"]),
        reprice_fast=reprice_fast,
        subsets_evaluated=subsets_evaluated,
    )
