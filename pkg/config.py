"""
설정 파일
실행 설정 기본값, 검증 및 JSON 로드/저장
"""
import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Optional

from errors import ConfigError

# 시스템 기본 설정
# 기본 실험 조건: 수요 5개, 자산 1000개, 233일, 패널티 0.1 DKK/kWh
DEFAULT_RUN_CONFIG: Dict[str, Any] = {
    "prices_path": None,  # 실제 가격 CSV (지정 시 synthetic은 null)
    "synthetic": {
        "seed": 7,
        "days": 233,
        "activation_rate": 0.25,  # balancing > spot 인 시간 비율
    },
    "schema": None,  # {"day": ..., "hour": ..., "spot": ..., "balancing": ..., "mfrr": ...}
    "unit_scale": 1.0,  # DKK/MWh 데이터는 0.001
    "n_assets": 1000,
    "n_demands": 5,
    "split": None,  # 수요별 자산 수 (null이면 균등 분할)
    "always_fail": [],  # 활성화 시 항상 실패하는 수요 ID
    "penalty": 0.1,  # DKK/kWh
    "seed": 42,  # 자산 소비 시간 시드
    "horizon_days": None,  # null이면 가격 데이터 전체
    "output_dir": "results",
    "format": "csv",  # csv | json
    "jobs": 1,
    "trace": True,  # simulate 일별 정산 기록
    "window": 40,  # 시너지 이동 평균 창
    "n_grid": "10:1000:10",  # start:stop:step 또는 목록
    "lambda_grid": [0.25 * step for step in range(13)],  # 0 ~ 3.0 DKK/kWh
    "focus": 1,  # 패널티 스윕 대상 수요
    "reprice_fast": False,
    "shapley_samples": None,  # 지정 시 순열 샘플링 모드
    "sample_seed": 0,
}

OUTPUT_FORMATS = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    """실행 설정 (생성 후 validate()로 검증)"""
    prices_path: Optional[str] = None
    synthetic: Optional[Dict[str, Any]] = field(default_factory=lambda: dict(DEFAULT_RUN_CONFIG["synthetic"]))
    schema: Optional[Dict[str, str]] = None
    unit_scale: float = 1.0
    n_assets: int = 1000
    n_demands: int = 5
    split: Optional[List[int]] = None
    always_fail: List[int] = field(default_factory=list)
    penalty: float = 0.1
    seed: int = 42
    horizon_days: Optional[int] = None
    output_dir: str = "results"
    format: str = "csv"
    jobs: int = 1
    trace: bool = True
    window: int = 40
    n_grid: Any = "10:1000:10"
    lambda_grid: List[float] = field(default_factory=lambda: list(DEFAULT_RUN_CONFIG["lambda_grid"]))
    focus: int = 1
    reprice_fast: bool = False
    shapley_samples: Optional[int] = None
    sample_seed: int = 0

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "RunConfig":
        """dict -> RunConfig (알 수 없는 키는 오류)"""
        known = {item.name for item in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"알 수 없는 설정 키: {', '.join(unknown)}")
        merged = dict(DEFAULT_RUN_CONFIG)
        merged.update(values)
        if values.get("prices_path") is not None and "synthetic" not in values:
            merged["synthetic"] = None
        return cls(**merged)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_overrides(self, overrides: Dict[str, Any]) -> "RunConfig":
        """None이 아닌 값만 덮어쓰기 (CLI 플래그 우선)"""
        changes = {key: value for key, value in overrides.items() if value is not None}
        # 가격 소스는 하나만
        if changes.get("prices_path") is not None:
            changes.setdefault("synthetic", None)
        elif "synthetic" in changes and self.prices_path is not None:
            changes["prices_path"] = None
        return replace(self, **changes)

    def validate(self) -> "RunConfig":
        """설정 검증 (오류 시 ConfigError)"""
        if (self.prices_path is None) == (self.synthetic is None):
            raise ConfigError("가격 소스는 prices_path 또는 synthetic 중 정확히 하나여야 합니다.")
        if self.synthetic is not None:
            missing = {"seed", "days", "activation_rate"} - set(self.synthetic)
            if missing:
                raise ConfigError(f"synthetic 설정 누락: {', '.join(sorted(missing))}")
            if int(self.synthetic["days"]) < 1:
                raise ConfigError("synthetic.days는 1 이상이어야 합니다.")
            if not 0.0 <= float(self.synthetic["activation_rate"]) <= 1.0:
                raise ConfigError("synthetic.activation_rate는 0.0 ~ 1.0 사이여야 합니다.")
        if self.penalty < 0:
            raise ConfigError(f"penalty는 0 이상이어야 합니다: {self.penalty}")
        if any(value < 0 for value in self.lambda_grid):
            raise ConfigError(f"lambda_grid 값은 0 이상이어야 합니다: {self.lambda_grid}")
        if self.n_assets < 1:
            raise ConfigError("n_assets는 1 이상이어야 합니다.")
        if self.n_demands < 1:
            raise ConfigError("n_demands는 1 이상이어야 합니다.")
        if self.split is not None and (len(self.split) != self.n_demands or sum(self.split) != self.n_assets):
            raise ConfigError(f"split {self.split}이 n_demands={self.n_demands}, n_assets={self.n_assets}와 맞지 않습니다.")
        for demand in self.always_fail:
            if not 1 <= demand <= self.n_demands:
                raise ConfigError(f"always_fail 수요 ID 범위 오류: {demand}")
        if not 1 <= self.focus <= self.n_demands:
            raise ConfigError(f"focus 수요 ID 범위 오류: {self.focus}")
        if self.horizon_days is not None and self.horizon_days < 2:
            raise ConfigError("horizon_days는 2 이상이어야 합니다 (1일차는 기준선 전용).")
        if self.format not in OUTPUT_FORMATS:
            raise ConfigError(f"format은 {'|'.join(OUTPUT_FORMATS)} 중 하나여야 합니다: {self.format}")
        if self.jobs < 1:
            raise ConfigError("jobs는 1 이상이어야 합니다.")
        if self.window < 1:
            raise ConfigError("window는 1 이상이어야 합니다.")
        if self.unit_scale <= 0:
            raise ConfigError("unit_scale은 0보다 커야 합니다.")
        if self.shapley_samples is not None and self.shapley_samples < 1:
            raise ConfigError("shapley_samples는 1 이상이어야 합니다.")
        return self


def load_run_config_from_file(filepath: str) -> RunConfig:
    """파일에서 실행 설정 로드"""
    try:
        with open(filepath, 'r', encoding='utf-8') as f:
            values = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"설정 파일이 없습니다: {filepath}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"설정 파일 파싱 오류: {filepath} ({e})")
    if not isinstance(values, dict):
        raise ConfigError(f"설정 파일 최상위는 객체여야 합니다: {filepath}")
    return RunConfig.from_dict(values)


def save_run_config_to_file(filepath: str, config: RunConfig):
    """실행 설정을 파일에 저장"""
    with open(filepath, 'w', encoding='utf-8', newline="\n") as f:
        json.dump(config.to_dict(), f, indent=2, ensure_ascii=False)
        f.write("\n")
