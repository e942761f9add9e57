"""
결과 파일 출력
모든 숫자는 유효숫자 12자리로 기록해 재실행 시 파일이 바이트 단위로 같도록 한다.
"""
import json
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import pandas as pd

from settlement import HorizonResult, ProfitBreakdown, delivery_rate
from shapley import Allocation, CharacteristicTable, PenaltySweepResult
from synergy import SynergyCurve

SIGNIFICANT_DIGITS = 12

BREAKDOWN_FIELDS = ("reservation", "activation", "penalty", "total")


def fmt(value: Optional[float]) -> str:
    """CSV용 숫자 문자열 (None은 빈 칸)"""
    if value is None:
        return ""
    return f"{float(value):.{SIGNIFICANT_DIGITS}g}"


def rounded(value: Optional[float]) -> Optional[float]:
    """JSON용 유효숫자 12자리 float"""
    if value is None:
        return None
    return float(fmt(value))


def _write_csv(rows: List[Dict[str, object]], columns: Iterable[str], path: Union[str, Path]):
    frame = pd.DataFrame(rows, columns=list(columns))
    frame.to_csv(path, index=False, lineterminator="\n")


def _write_json(payload: dict, path: Union[str, Path]):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, ensure_ascii=False)
        f.write("\n")


def subset_id(subset: Iterable[int]) -> int:
    """수요 ID 집합 -> 비트마스크 (수요 d는 비트 d-1)"""
    mask = 0
    for demand in subset:
        mask |= 1 << (demand - 1)
    return mask


def write_trace(result: HorizonResult, path: Union[str, Path]):
    """일별 정산 기록 (day,subset_id,reservation,activation,penalty,total)"""
    sid = subset_id(result.subset)
    rows = [
        {
            "day": row.day,
            "subset_id": sid,
            **{name: fmt(getattr(row.breakdown, name)) for name in BREAKDOWN_FIELDS},
        }
        for row in result.days
    ]
    _write_csv(rows, ("day", "subset_id") + BREAKDOWN_FIELDS, path)


def breakdown_dict(breakdown: ProfitBreakdown) -> Dict[str, Optional[float]]:
    return {
        "reservation": rounded(breakdown.reservation),
        "activation": rounded(breakdown.activation),
        "penalty": rounded(breakdown.penalty),
        "total": rounded(breakdown.total),
        "bid_kwh": rounded(breakdown.bid_kwh),
        "delivered_kwh": rounded(breakdown.delivered_kwh),
        "shortfall_kwh": rounded(breakdown.shortfall_kwh),
        "delivery_rate": rounded(delivery_rate(breakdown)),
    }


def write_summary(summary: Dict[str, ProfitBreakdown], path: Union[str, Path], fmt_name: str = "csv"):
    """정산 요약 (행: coalition, individual_sum 등)"""
    if fmt_name == "json":
        _write_json({name: breakdown_dict(breakdown) for name, breakdown in summary.items()}, path)
        return
    rows = []
    for name, breakdown in summary.items():
        values = breakdown_dict(breakdown)
        rows.append({"scope": name, **{key: fmt(value) for key, value in values.items()}})
    _write_csv(rows, ["scope"] + list(breakdown_dict(ProfitBreakdown()).keys()), path)


def write_synergy(curve: SynergyCurve, path: Union[str, Path]):
    """시너지 곡선 (n_assets,coalition_profit,sum_individual,ratio,rolling_mean)"""
    rows = [
        {
            "n_assets": point.n_assets,
            "coalition_profit": fmt(point.coalition_profit),
            "sum_individual": fmt(point.sum_individual_profit),
            "ratio": fmt(point.ratio),
            "rolling_mean": fmt(mean),
            "zero_denominator": int(point.zero_denominator),
            "coalition_delivery_rate": fmt(point.coalition_delivery_rate),
            "individual_delivery_rate": fmt(point.individual_delivery_rate),
        }
        for point, mean in zip(curve.points, curve.rolling_mean)
    ]
    _write_csv(
        rows,
        ("n_assets", "coalition_profit", "sum_individual", "ratio", "rolling_mean",
         "zero_denominator", "coalition_delivery_rate", "individual_delivery_rate"),
        path,
    )


def allocation_dict(
    allocation: Allocation,
    table: Optional[CharacteristicTable] = None,
    rationality: Optional[Dict[int, float]] = None,
) -> dict:
    """{mode, grand_value, payments, stderr?, subsets_evaluated, ...}"""
    payload = {
        "mode": allocation.mode,
        "grand_value": rounded(allocation.grand_value),
        "payments": {str(demand): rounded(value) for demand, value in allocation.payments.items()},
    }
    if allocation.stderr is not None:
        payload["stderr"] = {str(demand): rounded(value) for demand, value in allocation.stderr.items()}
        payload["n_samples"] = allocation.n_samples
        payload["sample_seed"] = allocation.sample_seed
    payload["subsets_evaluated"] = allocation.subsets_evaluated
    payload["efficiency_gap"] = rounded(allocation.efficiency_gap)
    if table is not None:
        payload["subset_values"] = {
            ",".join(str(demand) for demand in table.subset_of(mask)): rounded(value)
            for mask, value in enumerate(table.values)
            if mask > 0
        }
    if rationality is not None:
        payload["individual_rationality"] = {str(demand): rounded(gap) for demand, gap in rationality.items()}
    return payload


def write_allocation(
    allocation: Allocation,
    path: Union[str, Path],
    fmt_name: str = "json",
    table: Optional[CharacteristicTable] = None,
    rationality: Optional[Dict[int, float]] = None,
):
    """Shapley 배분 결과"""
    if fmt_name == "json":
        _write_json(allocation_dict(allocation, table, rationality), path)
        return
    # 배분 전체 값은 행마다 반복
    rows = []
    for demand, payment in allocation.payments.items():
        rows.append({
            "mode": allocation.mode,
            "grand_value": fmt(allocation.grand_value),
            "subsets_evaluated": allocation.subsets_evaluated,
            "efficiency_gap": fmt(allocation.efficiency_gap),
            "demand": demand,
            "payment": fmt(payment),
            "stderr": fmt(allocation.stderr[demand]) if allocation.stderr else "",
            "standalone": fmt(table.value([demand])) if table is not None else "",
            "surplus": fmt(rationality[demand]) if rationality is not None else "",
        })
    _write_csv(
        rows,
        ("mode", "grand_value", "subsets_evaluated", "efficiency_gap",
         "demand", "payment", "stderr", "standalone", "surplus"),
        path,
    )


def write_penalty_sweep(result: PenaltySweepResult, path: Union[str, Path], fmt_name: str = "csv"):
    """패널티 스윕 네 계열"""
    focus_prefers = result.focus_prefers_coalition
    rest_prefers = result.rest_prefers_coalition
    if fmt_name == "json":
        _write_json({
            "focus": result.focus,
            "reprice_fast": result.reprice_fast,
            "subsets_evaluated": result.subsets_evaluated,
            "lambda_p": [rounded(value) for value in result.grid],
            "focus_in_coalition": [rounded(value) for value in result.focus_in_coalition],
            "rest_in_coalition": [rounded(value) for value in result.rest_in_coalition],
            "focus_alone": [rounded(value) for value in result.focus_alone],
            "rest_without_focus": [rounded(value) for value in result.rest_without_focus],
            "focus_prefers_coalition": list(focus_prefers),
            "rest_prefers_coalition": list(rest_prefers),
            "focus_zero_crossing": rounded(result.zero_crossing()),
        }, path)
        return
    rows = [
        {
            "lambda_p": fmt(result.grid[index]),
            "focus_in_coalition": fmt(result.focus_in_coalition[index]),
            "rest_in_coalition": fmt(result.rest_in_coalition[index]),
            "focus_alone": fmt(result.focus_alone[index]),
            "rest_without_focus": fmt(result.rest_without_focus[index]),
            "focus_prefers_coalition": int(focus_prefers[index]),
            "rest_prefers_coalition": int(rest_prefers[index]),
        }
        for index in range(len(result.grid))
    ]
    _write_csv(
        rows,
        ("lambda_p", "focus_in_coalition", "rest_in_coalition", "focus_alone", "rest_without_focus",
         "focus_prefers_coalition", "rest_prefers_coalition"),
        path,
    )
