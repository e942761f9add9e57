"""
시뮬레이터 예외 정의
모든 예외는 ValueError 계열이며, 문제가 된 좌표(day, hour 등)를 속성으로 가진다.
"""
from typing import Optional


class SimulationError(ValueError):
    """시뮬레이터 공통 예외"""


# ========== 설정 ==========

class ConfigError(SimulationError):
    """설정 오류 (CLI 종료 코드 1)"""


# ========== 가격 데이터 (CLI 종료 코드 2) ==========

class PriceDataError(SimulationError):
    """가격 데이터 오류 공통"""

    def __init__(self, message: str, day: Optional[int] = None, hour: Optional[int] = None):
        super().__init__(message)
        self.day = day
        self.hour = hour


class EmptySource(PriceDataError):
    def __init__(self):
        super().__init__("가격 데이터가 비어 있습니다.")


class SchemaError(PriceDataError):
    def __init__(self, column: str):
        super().__init__(f"필수 컬럼이 없습니다: {column}")
        self.column = column


class MissingHour(PriceDataError):
    def __init__(self, day: int, hour: Optional[int] = None, count: Optional[int] = None):
        if hour is not None:
            message = f"누락된 시간: day={day}, hour={hour}"
        else:
            message = f"24개 시간이 아닙니다: day={day} ({count}행)"
        super().__init__(message, day=day, hour=hour)
        self.count = count


class NonNumericPrice(PriceDataError):
    def __init__(self, day, hour, column: str, value: str):
        super().__init__(
            f"숫자가 아닌 가격: day={day}, hour={hour}, {column}={value!r}",
            day=day, hour=hour,
        )
        self.column = column
        self.value = value


class DuplicateRecord(PriceDataError):
    def __init__(self, day: int, hour: int):
        super().__init__(f"중복 레코드: day={day}, hour={hour}", day=day, hour=hour)


class InvalidHour(PriceDataError):
    def __init__(self, day, hour):
        super().__init__(f"잘못된 day/hour 값: day={day}, hour={hour}", day=day, hour=hour)


class EncodingError(PriceDataError):
    def __init__(self, line: int, position: int, byte: bytes):
        super().__init__(f"UTF-8이 아닌 바이트: {line}행 (위치 {position}), 값 {byte!r}")
        self.line = line
        self.position = position
        self.byte = byte


class MalformedRow(PriceDataError):
    """CSV 구문 오류 (열 개수 불일치, 닫히지 않은 따옴표 등)"""

    def __init__(self, detail: str):
        super().__init__(f"CSV 구문 오류: {detail}")
        self.detail = detail


class DayOutOfRange(PriceDataError):
    def __init__(self, day: int, horizon: int):
        super().__init__(f"day 범위 오류: {day} (1 ~ {horizon})", day=day)
        self.horizon = horizon


# ========== 자산 모델 ==========

class SplitMismatch(SimulationError):
    def __init__(self, split, n_assets: int):
        super().__init__(f"분할 합계 {sum(split)} != 자산 수 {n_assets} (split={list(split)})")
        self.split = tuple(split)
        self.n_assets = n_assets


class UnknownDemand(SimulationError):
    def __init__(self, demand: int, n_demands: int):
        super().__init__(f"알 수 없는 수요: {demand} (1 ~ {n_demands})")
        self.demand = demand
        self.n_demands = n_demands


# ========== 정산 ==========

class NegativeQuantity(SimulationError):
    def __init__(self, name: str, hour: int, value: float):
        super().__init__(f"음수 수량: {name}[hour={hour}] = {value}")
        self.name = name
        self.hour = hour
        self.value = value


class VectorLengthMismatch(SimulationError):
    def __init__(self, name: str, length: int, expected: int = 24):
        super().__init__(f"벡터 길이 오류: {name} 길이 {length} (기대값 {expected})")
        self.name = name
        self.length = length


class HorizonTooShort(SimulationError):
    def __init__(self, horizon: int):
        super().__init__(f"정산 기간이 너무 짧습니다: {horizon}일 (최소 2일, 1일차는 기준선 전용)")
        self.horizon = horizon


class InvalidPenalty(SimulationError):
    def __init__(self, value: float):
        super().__init__(f"패널티 가격은 0 이상이어야 합니다: {value}")
        self.value = value


# ========== Shapley ==========

class TooManyDemands(SimulationError):
    def __init__(self, n_demands: int, limit: int):
        super().__init__(f"수요 수 {n_demands} > 정확 계산 한도 {limit} (샘플링 모드를 사용하세요)")
        self.n_demands = n_demands
        self.limit = limit


class IncompleteTable(SimulationError):
    def __init__(self, n_values: int, n_demands: int):
        super().__init__(f"특성 함수 테이블 불완전: {n_values}개 값 (기대값 {2 ** n_demands})")
        self.n_values = n_values
        self.n_demands = n_demands
