"""
시장 가격 데이터 모듈
시간별 spot / balancing / mFRR 가격 로드, 검증, 합성 생성 및 TSO 활성화 신호 계산
"""
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Dict, Iterator, Optional, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from errors import (
    DayOutOfRange,
    DuplicateRecord,
    EmptySource,
    EncodingError,
    InvalidHour,
    MalformedRow,
    MissingHour,
    NonNumericPrice,
    SchemaError,
)
from rng import canonical_seed

logger = logging.getLogger(__name__)

HOURS_PER_DAY = 24

# 정규 컬럼 순서 (day,hour,spot,balancing,mfrr)
PRICE_FIELDS = ("day", "hour", "spot", "balancing", "mfrr")
PRICE_COLUMNS = ("spot", "balancing", "mfrr")
DEFAULT_SCHEMA: Dict[str, str] = {field: field for field in PRICE_FIELDS}

# 합성 가격 양자화 단위 (DKK). 2의 거듭제곱 분모라서 정수 kW 수량과의 곱/합이 정확하다.
SYNTHETIC_PRICE_STEP = 1.0 / 256.0


@dataclass(frozen=True)
class PriceRecord:
    """시간별 가격 레코드"""
    day: int  # 1부터 시작
    hour: int  # 1 ~ 24
    spot: float  # DKK/kWh
    balancing: float  # DKK/kWh
    mfrr: float  # DKK/kW/h


@dataclass(frozen=True)
class DayPrices:
    """하루치 가격 (24시간 벡터)"""
    day: int
    spot: np.ndarray
    balancing: np.ndarray
    mfrr: np.ndarray


@dataclass(frozen=True)
class ActivationMask:
    """TSO 활성화 신호 (balancing > spot 인 시간만 True)"""
    day: int
    active: Tuple[bool, ...]

    def as_array(self) -> np.ndarray:
        return np.array(self.active, dtype=bool)

    @property
    def n_active(self) -> int:
        return sum(self.active)


@dataclass(frozen=True)
class PriceSummary:
    """가격 데이터 요약"""
    horizon: int
    activation_rate: float
    mean_spot: float
    mean_balancing: float
    mean_mfrr: float
    mean_premium_active: Optional[float]  # 활성화 시간의 평균 (balancing - spot)


class PriceSeries:
    """
    D일 x 24시간 가격 시계열 (로드 후 불변)

    내부적으로 (D, 24) 배열 3개를 보관한다. 배열은 읽기 전용이다.
    """

    def __init__(self, spot: np.ndarray, balancing: np.ndarray, mfrr: np.ndarray):
        arrays = []
        for name, values in (("spot", spot), ("balancing", balancing), ("mfrr", mfrr)):
            array = np.array(values, dtype=float).reshape(-1, HOURS_PER_DAY)
            if not np.all(np.isfinite(array)):
                day, hour = np.argwhere(~np.isfinite(array))[0] + 1
                raise NonNumericPrice(int(day), int(hour), name, str(array[day - 1, hour - 1]))
            array.setflags(write=False)
            arrays.append(array)
        self.spot, self.balancing, self.mfrr = arrays
        if not (self.spot.shape == self.balancing.shape == self.mfrr.shape):
            raise ValueError("spot / balancing / mfrr 배열 크기가 다릅니다.")

    @property
    def horizon(self) -> int:
        return self.spot.shape[0]

    def __len__(self) -> int:
        return self.horizon * HOURS_PER_DAY

    def __eq__(self, other) -> bool:
        if not isinstance(other, PriceSeries):
            return NotImplemented
        return (
            np.array_equal(self.spot, other.spot)
            and np.array_equal(self.balancing, other.balancing)
            and np.array_equal(self.mfrr, other.mfrr)
        )

    def __repr__(self) -> str:
        return f"PriceSeries(horizon={self.horizon})"

    def _check_day(self, day: int):
        if not 1 <= day <= self.horizon:
            raise DayOutOfRange(day, self.horizon)

    def record(self, day: int, hour: int) -> PriceRecord:
        """(day, hour) 레코드 조회"""
        self._check_day(day)
        if not 1 <= hour <= HOURS_PER_DAY:
            raise InvalidHour(day, hour)
        return PriceRecord(
            day=day,
            hour=hour,
            spot=float(self.spot[day - 1, hour - 1]),
            balancing=float(self.balancing[day - 1, hour - 1]),
            mfrr=float(self.mfrr[day - 1, hour - 1]),
        )

    def records(self) -> Iterator[PriceRecord]:
        """(day, hour) 순서로 모든 레코드 반환"""
        for day in range(1, self.horizon + 1):
            for hour in range(1, HOURS_PER_DAY + 1):
                yield self.record(day, hour)

    def day(self, day: int) -> DayPrices:
        """하루치 가격 벡터"""
        self._check_day(day)
        return DayPrices(
            day=day,
            spot=self.spot[day - 1],
            balancing=self.balancing[day - 1],
            mfrr=self.mfrr[day - 1],
        )

    def truncate(self, days: int) -> "PriceSeries":
        """앞쪽 days일만 남긴 시계열"""
        if not 1 <= days <= self.horizon:
            raise DayOutOfRange(days, self.horizon)
        return PriceSeries(self.spot[:days], self.balancing[:days], self.mfrr[:days])

    def activation_matrix(self) -> np.ndarray:
        """(D, 24) 활성화 행렬 (balancing > spot, 엄격 부등호)"""
        return self.balancing > self.spot


def activation_mask(prices: PriceSeries, day: int) -> ActivationMask:
    """
    day의 TSO 활성화 신호

    balancing == spot 인 시간은 활성화되지 않는다.
    """
    day_prices = prices.day(day)
    active = day_prices.balancing > day_prices.spot
    return ActivationMask(day=day, active=tuple(bool(flag) for flag in active))


def load_prices(
    source: Union[BinaryIO, bytes],
    schema: Optional[Dict[str, str]] = None,
    unit_scale: float = 1.0,
) -> PriceSeries:
    """
    구분자 텍스트(CSV)에서 가격 시계열 로드

    Args:
        source: UTF-8 바이트 스트림 또는 bytes (헤더 행 포함)
        schema: {day, hour, spot, balancing, mfrr} -> 실제 컬럼명 매핑
        unit_scale: 세 가격 컬럼에 곱할 단위 변환 계수 (DKK/MWh 데이터는 0.001)
    """
    mapping = dict(DEFAULT_SCHEMA)
    if schema:
        mapping.update(schema)

    raw = bytes(source if isinstance(source, (bytes, bytearray)) else source.read())
    if not raw.strip():
        raise EmptySource()
    try:
        raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise EncodingError(raw.count(b"\n", 0, e.start) + 1, e.start, raw[e.start:e.start + 1])

    try:
        frame = pd.read_csv(
            io.BytesIO(raw),
            dtype=str,
            encoding="utf-8",
            keep_default_na=False,
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError:
        raise EmptySource()
    except pd.errors.ParserError as e:
        raise MalformedRow(str(e))
    if frame.empty:
        raise EmptySource()

    frame.columns = [str(column).strip() for column in frame.columns]
    for field in PRICE_FIELDS:
        if mapping[field] not in frame.columns:
            raise SchemaError(mapping[field])
    frame = frame[[mapping[field] for field in PRICE_FIELDS]].copy()
    frame.columns = list(PRICE_FIELDS)
    frame = frame.apply(lambda column: column.str.strip())

    # day / hour 정수 검증
    days = pd.to_numeric(frame["day"], errors="coerce")
    hours = pd.to_numeric(frame["hour"], errors="coerce")
    bad_index = (
        days.isna() | hours.isna()
        | (days != days.round()) | (hours != hours.round())
        | (days < 1) | (hours < 1) | (hours > HOURS_PER_DAY)
    )
    if bad_index.any():
        row = frame[bad_index].iloc[0]
        raise InvalidHour(row["day"], row["hour"])
    frame["day"] = days.astype(int)
    frame["hour"] = hours.astype(int)

    # 가격 숫자 검증 (NaN / inf 거부, 음수 허용)
    for column in PRICE_COLUMNS:
        values = frame[column].map(_parse_price)
        bad = ~np.isfinite(values.to_numpy(dtype=float))
        if bad.any():
            row = frame[bad].iloc[0]
            raise NonNumericPrice(int(row["day"]), int(row["hour"]), column, row[column])
        frame[column] = values.astype(float)

    duplicated = frame.duplicated(subset=["day", "hour"])
    if duplicated.any():
        row = frame[duplicated].iloc[0]
        raise DuplicateRecord(int(row["day"]), int(row["hour"]))

    frame = frame.sort_values(["day", "hour"], kind="mergesort").reset_index(drop=True)

    # 1일부터 연속된 day, day당 정확히 24행
    counts = frame.groupby("day").size()
    horizon = int(frame["day"].max())
    for day in range(1, horizon + 1):
        count = int(counts.get(day, 0))
        if count != HOURS_PER_DAY:
            present = set(frame.loc[frame["day"] == day, "hour"])
            missing = min(set(range(1, HOURS_PER_DAY + 1)) - present)
            raise MissingHour(day, hour=missing, count=count)

    arrays = [frame[column].to_numpy(dtype=float).reshape(horizon, HOURS_PER_DAY) for column in PRICE_COLUMNS]
    if unit_scale != 1.0:
        arrays = [array * unit_scale for array in arrays]

    prices = PriceSeries(*arrays)
    logger.info(f"[market_data] 가격 로드 완료: {horizon}일 ({len(frame)}행)")
    return prices


def _parse_price(text: str) -> float:
    # float()은 정확히 반올림되므로 save_prices 출력과 비트 단위로 일치한다
    try:
        return float(text)
    except ValueError:
        return float("nan")


def load_prices_file(
    path: Union[str, Path],
    schema: Optional[Dict[str, str]] = None,
    unit_scale: float = 1.0,
) -> PriceSeries:
    """파일 경로에서 가격 시계열 로드 (파일이 없으면 FileNotFoundError)"""
    with open(path, "rb") as f:
        return load_prices(f, schema=schema, unit_scale=unit_scale)


def save_prices(prices: PriceSeries, target: Union[str, Path, TextIO]):
    """
    정규 CSV로 저장 (day,hour,spot,balancing,mfrr)

    float은 최단 왕복 표현으로 기록하므로 load_prices로 비트 단위까지 복원된다.
    """
    days = np.repeat(np.arange(1, prices.horizon + 1), HOURS_PER_DAY)
    hours = np.tile(np.arange(1, HOURS_PER_DAY + 1), prices.horizon)
    frame = pd.DataFrame({
        "day": days,
        "hour": hours,
        "spot": prices.spot.ravel(),
        "balancing": prices.balancing.ravel(),
        "mfrr": prices.mfrr.ravel(),
    })
    frame["spot"] = [repr(float(value)) for value in frame["spot"]]
    frame["balancing"] = [repr(float(value)) for value in frame["balancing"]]
    frame["mfrr"] = [repr(float(value)) for value in frame["mfrr"]]
    frame.to_csv(target, index=False, lineterminator="\n")


def generate_synthetic_prices(seed: int, days: int, activation_rate: float = 0.25) -> PriceSeries:
    """
    합성 가격 생성 (실제 DK1 데이터 대체용)

    Args:
        seed: 난수 시드
        days: 일 수 (1 이상)
        activation_rate: balancing > spot 인 시간의 목표 비율 (0.0 ~ 1.0)

    spot은 일중 형태 + 일별 수준 + 잡음으로 만들고 0 이상으로 자른다.
    활성화 시간에는 양의 프리미엄을, 나머지 시간에는 0 이상의 할인을 준다.
    모든 가격은 SYNTHETIC_PRICE_STEP 배수로 양자화된다.
    """
    if days < 1:
        raise ValueError("days는 1 이상이어야 합니다.")
    if not 0.0 <= activation_rate <= 1.0:
        raise ValueError("activation_rate는 0.0 ~ 1.0 사이여야 합니다.")

    rng = np.random.default_rng(canonical_seed(seed))
    shape = (days, HOURS_PER_DAY)
    hours = np.arange(1, HOURS_PER_DAY + 1)

    daily_shape = 1.0 + 0.4 * np.sin(2.0 * np.pi * (hours - 9) / HOURS_PER_DAY)
    daily_level = rng.normal(1.0, 0.25, size=(days, 1))
    noise = rng.normal(0.0, 0.15, size=shape)
    spot = _quantize(np.clip(daily_level * daily_shape + noise, 0.0, None))

    active = rng.random(shape) < activation_rate
    premium = np.maximum(_quantize(rng.exponential(0.4, size=shape)), SYNTHETIC_PRICE_STEP)
    discount = _quantize(rng.exponential(0.1, size=shape))
    balancing = np.where(active, spot + premium, spot - discount)

    mfrr = _quantize(rng.gamma(2.0, 0.05, size=shape))

    logger.debug(f"[market_data] 합성 가격 생성: seed={seed}, {days}일, 활성화 {int(active.sum())}시간")
    return PriceSeries(spot, balancing, mfrr)


def _quantize(values: np.ndarray) -> np.ndarray:
    return np.round(np.asarray(values) / SYNTHETIC_PRICE_STEP) * SYNTHETIC_PRICE_STEP


def describe_prices(prices: PriceSeries) -> PriceSummary:
    """활성화 빈도와 평균 가격 요약"""
    active = prices.activation_matrix()
    premium = prices.balancing - prices.spot
    return PriceSummary(
        horizon=prices.horizon,
        activation_rate=float(active.mean()),
        mean_spot=float(prices.spot.mean()),
        mean_balancing=float(prices.balancing.mean()),
        mean_mfrr=float(prices.mfrr.mean()),
        mean_premium_active=float(premium[active].mean()) if active.any() else None,
    )
