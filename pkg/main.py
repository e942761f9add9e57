"""
수요 유연성 연합 mFRR 시뮬레이터 메인 프로그램
하위 명령: simulate, synergy, shapley, penalty-sweep, gen-prices
"""
import argparse
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

from asset_model import AssetPopulation, build_population, export_consumption, realize_day, realize_horizon
from config import DEFAULT_RUN_CONFIG, OUTPUT_FORMATS, RunConfig, load_run_config_from_file, save_run_config_to_file
from errors import ConfigError, PriceDataError, SimulationError
from market_data import PriceSeries, describe_prices, generate_synthetic_prices, load_prices_file, save_prices
from results import write_allocation, write_penalty_sweep, write_summary, write_synergy, write_trace
from settlement import PenaltyPrice, ProfitBreakdown, individual_arrays, simulate_horizon, settle_horizon
from shapley import (
    MAX_EXACT_DEMANDS,
    characteristic_table,
    exact_shapley,
    individual_rationality,
    penalty_sweep,
    sampled_shapley,
)
from synergy import parse_grid, synergy_curve

logger = logging.getLogger("main")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2


class _ArgumentParser(argparse.ArgumentParser):
    """사용법 오류도 설정 오류(종료 코드 1)로 처리"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: 오류: {message}\n")


def _int_list(text: str) -> List[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _float_list(text: str) -> List[float]:
    if ":" in text:
        start, stop, step = (float(part) for part in text.split(":"))
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + step * index for index in range(count)]
    return [float(part) for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON 설정 파일")
    common.add_argument("--seed", type=int, help="자산 소비 시간 시드")
    common.add_argument("--penalty", type=float, help="패널티 가격 λp (DKK/kWh)")
    common.add_argument("--jobs", type=int, help="병렬 프로세스 수")
    common.add_argument("--out", dest="output_dir", help="출력 디렉터리")
    common.add_argument("--format", choices=OUTPUT_FORMATS, help="결과 형식")
    common.add_argument("--prices", dest="prices_path", help="가격 CSV (day,hour,spot,balancing,mfrr)")
    common.add_argument("--unit-scale", type=float, help="가격 단위 변환 계수 (DKK/MWh -> 0.001)")
    common.add_argument("--synthetic-seed", type=int, help="합성 가격 시드")
    common.add_argument("--days", type=int, help="합성 가격 일 수")
    common.add_argument("--activation-rate", type=float, help="합성 가격 활성화 비율")
    common.add_argument("--n-assets", type=int, help="자산 수")
    common.add_argument("--n-demands", type=int, help="수요 수")
    common.add_argument("--split", type=_int_list, help="수요별 자산 수 (예: 400,300,300)")
    common.add_argument("--always-fail", type=_int_list, help="상시 실패 수요 ID (예: 1)")
    common.add_argument("--horizon", dest="horizon_days", type=int, help="정산 일 수")
    common.add_argument("--log-level", default="INFO", help="로그 레벨 (기본값 INFO)")

    parser = _ArgumentParser(prog="mfrr-coalition", description="수요 유연성 연합 mFRR 시뮬레이터")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    simulate = commands.add_parser("simulate", parents=[common], help="연합 기간 정산")
    simulate.add_argument("--trace", dest="trace", action="store_true", default=None, help="일별 정산 기록 출력")
    simulate.add_argument("--no-trace", dest="trace", action="store_false", help="일별 정산 기록 생략")
    simulate.add_argument("--export-consumption", type=int, metavar="DAY", help="DAY의 자산별 소비 CSV 출력")

    synergy = commands.add_parser("synergy", parents=[common], help="시너지 효과 곡선")
    synergy.add_argument("--grid", dest="n_grid", help="자산 수 격자 (start:stop:step 또는 1,5,10)")
    synergy.add_argument("--window", type=int, help="이동 평균 창")

    shapley = commands.add_parser("shapley", parents=[common], help="Shapley 배분")
    shapley.add_argument("--samples", dest="shapley_samples", type=int, help="순열 샘플 수 (지정 시 샘플링 모드)")
    shapley.add_argument("--sample-seed", type=int, help="순열 샘플링 시드")

    sweep = commands.add_parser("penalty-sweep", parents=[common], help="패널티 가격 스윕")
    sweep.add_argument("--lambda-grid", type=_float_list, help="λp 격자 (start:stop:step 또는 목록)")
    sweep.add_argument("--reprice-fast", action="store_true", default=None, help="부족량 캐시로 패널티 항만 재계산")
    sweep.add_argument("--focus", type=int, help="스윕 대상 수요 ID (기본값 1)")

    commands.add_parser("gen-prices", parents=[common], help="합성 가격 CSV 생성")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """기본값 < 설정 파일 < CLI 플래그"""
    config = load_run_config_from_file(args.config) if args.config else RunConfig.from_dict({})

    synthetic = None
    synthetic_flags = {
        "seed": getattr(args, "synthetic_seed", None),
        "days": getattr(args, "days", None),
        "activation_rate": getattr(args, "activation_rate", None),
    }
    if any(value is not None for value in synthetic_flags.values()):
        synthetic = dict(config.synthetic or DEFAULT_RUN_CONFIG["synthetic"])
        synthetic.update({key: value for key, value in synthetic_flags.items() if value is not None})

    overrides = {
        "synthetic": synthetic,
        **{
            name: getattr(args, name, None)
            for name in (
                "prices_path", "seed", "penalty", "jobs", "output_dir", "format", "unit_scale",
                "n_assets", "n_demands", "split", "always_fail", "horizon_days",
                "trace", "n_grid", "window", "shapley_samples", "sample_seed",
                "lambda_grid", "reprice_fast", "focus",
            )
        },
    }
    return config.with_overrides(overrides).validate()


def load_price_series(config: RunConfig) -> PriceSeries:
    """설정의 가격 소스 로드 후 정산 기간으로 자르기"""
    if config.prices_path is not None:
        prices = load_prices_file(config.prices_path, schema=config.schema, unit_scale=config.unit_scale)
    else:
        synthetic = config.synthetic
        prices = generate_synthetic_prices(
            seed=int(synthetic["seed"]),
            days=int(synthetic["days"]),
            activation_rate=float(synthetic["activation_rate"]),
        )
    if config.horizon_days is not None:
        if config.horizon_days > prices.horizon:
            raise ConfigError(f"horizon_days {config.horizon_days} > 가격 데이터 {prices.horizon}일")
        prices = prices.truncate(config.horizon_days)
    return prices


def build_population_from(config: RunConfig) -> AssetPopulation:
    return build_population(
        n_assets=config.n_assets,
        n_demands=config.n_demands,
        split=config.split,
        always_fail=config.always_fail,
    )


def _prepare_output(config: RunConfig) -> Path:
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    save_run_config_to_file(str(output_dir / "config.json"), config)
    return output_dir


def cmd_simulate(config: RunConfig, export_day: Optional[int] = None) -> List[Path]:
    """전체 연합 기간 정산 + 자산별 단독 정산 요약"""
    output_dir = _prepare_output(config)
    prices = load_price_series(config)
    population = build_population_from(config)
    penalty = PenaltyPrice(config.penalty)

    summary_prices = describe_prices(prices)
    logger.info(
        f"[coalition] 가격 {summary_prices.horizon}일, 활성화 비율 {summary_prices.activation_rate:.3f}, "
        f"평균 mFRR {summary_prices.mean_mfrr:.4g} DKK/kW/h"
    )

    realization = realize_horizon(population, prices.horizon, config.seed)
    result = simulate_horizon(population, population.demands, prices, penalty, config.seed, realization)
    individual = individual_arrays(population, prices, penalty, config.seed, realization)
    individual_sum = ProfitBreakdown.from_terms(
        math.fsum(individual["reservation"]),
        math.fsum(individual["activation"]),
        math.fsum(individual["penalty"]),
        math.fsum(individual["bid_kwh"]),
        math.fsum(individual["delivered_kwh"]),
        math.fsum(individual["shortfall_kwh"]),
    )
    summary = {"coalition": result.total, "individual_sum": individual_sum}
    for demand in population.demands:
        summary[f"demand_{demand}"] = settle_horizon(population, [demand], prices, penalty, config.seed, realization)

    written = []
    if config.trace:
        trace_path = output_dir / "trace.csv"
        write_trace(result, trace_path)
        written.append(trace_path)
    summary_path = output_dir / f"summary.{config.format}"
    write_summary(summary, summary_path, config.format)
    written.append(summary_path)

    if export_day is not None:
        if not 1 <= export_day <= prices.horizon:
            raise ConfigError(f"--export-consumption day 범위 오류: {export_day}")
        consumption_path = output_dir / f"consumption_day{export_day}.csv"
        export_consumption(realize_day(population, export_day, config.seed), consumption_path)
        written.append(consumption_path)

    logger.info(
        f"[coalition] 정산 {len(result.days)}일: 연합 수익 {result.total.total:.2f} DKK, "
        f"단독 합계 {individual_sum.total:.2f} DKK"
    )
    return written


def cmd_synergy(config: RunConfig) -> List[Path]:
    """시너지 효과 곡선"""
    output_dir = _prepare_output(config)
    prices = load_price_series(config)
    try:
        grid = parse_grid(config.n_grid)
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"n_grid 해석 오류: {config.n_grid} ({e})")
    try:
        curve = synergy_curve(grid, prices, PenaltyPrice(config.penalty), config.seed, config.window, config.jobs)
    except ValueError as e:
        if isinstance(e, SimulationError):
            raise
        raise ConfigError(str(e))
    path = output_dir / "synergy.csv"
    write_synergy(curve, path)
    last = curve.rolling_mean[-1]
    logger.info(f"[synergy] {len(curve.points)}개 지점 저장, 마지막 이동 평균 {last if last is not None else 'N/A'}")
    return [path]


def cmd_shapley(config: RunConfig) -> List[Path]:
    """Shapley 배분 (정확 또는 샘플링)"""
    output_dir = _prepare_output(config)
    prices = load_price_series(config)
    population = build_population_from(config)
    penalty = PenaltyPrice(config.penalty)
    realization = realize_horizon(population, prices.horizon, config.seed)

    table = None
    rationality = None
    if config.shapley_samples is not None or population.n_demands > MAX_EXACT_DEMANDS:
        samples = config.shapley_samples or 1000

        def value_fn(members):
            return settle_horizon(population, members, prices, penalty, config.seed, realization).total

        allocation = sampled_shapley(value_fn, population.n_demands, samples, config.sample_seed)
    else:
        table = characteristic_table(population, prices, penalty, config.seed, config.jobs, realization)
        allocation = exact_shapley(table)
        rationality = individual_rationality(table, allocation)

    logger.info(f"[shapley] {allocation.subsets_evaluated}개 부분집합 평가, v(D) = {allocation.grand_value:.2f} DKK")
    for demand, payment in allocation.payments.items():
        logger.info(f"[shapley]   수요 {demand}: φ = {payment:.2f} DKK")

    path = output_dir / f"shapley.{config.format}"
    write_allocation(allocation, path, config.format, table=table, rationality=rationality)
    return [path]


def cmd_penalty_sweep(config: RunConfig) -> List[Path]:
    """패널티 가격 스윕 (네 계열)"""
    output_dir = _prepare_output(config)
    prices = load_price_series(config)
    population = build_population_from(config)
    result = penalty_sweep(
        population,
        prices,
        config.lambda_grid,
        config.seed,
        focus=config.focus,
        reprice_fast=config.reprice_fast,
        jobs=config.jobs,
    )
    for index, prefers in enumerate(result.focus_prefers_coalition):
        if not prefers:
            logger.warning(f"[shapley] λp={result.grid[index]:g}: 수요 {result.focus}가 연합 밖에서 더 유리합니다.")
    crossing = result.zero_crossing()
    logger.info(f"[shapley] φ_{result.focus} 부호 변화 λp ≈ {crossing if crossing is not None else '없음'}")

    path = output_dir / f"penalty_sweep.{config.format}"
    write_penalty_sweep(result, path, config.format)
    return [path]


def cmd_gen_prices(config: RunConfig) -> List[Path]:
    """가격 CSV 생성 (합성 또는 로드한 데이터를 정규 형식으로)"""
    output_dir = _prepare_output(config)
    prices = load_price_series(config)
    path = output_dir / "prices.csv"
    save_prices(prices, path)
    logger.info(f"[market_data] 가격 {prices.horizon}일 저장")
    return [path]


def main(argv: Optional[List[str]] = None) -> int:
    """메인 함수"""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )

    logger.info("=" * 60)
    logger.info(f"수요 유연성 연합 mFRR 시뮬레이터 - {args.command}")
    logger.info("=" * 60)

    config = None
    try:
        config = resolve_config(args)
        if args.command == "simulate":
            written = cmd_simulate(config, export_day=args.export_consumption)
        elif args.command == "synergy":
            written = cmd_synergy(config)
        elif args.command == "shapley":
            written = cmd_shapley(config)
        elif args.command == "penalty-sweep":
            written = cmd_penalty_sweep(config)
        else:
            written = cmd_gen_prices(config)
    except PriceDataError as e:
        source = config.prices_path if config is not None and config.prices_path else "합성 가격"
        print(f"데이터 오류: {source}: {e}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as e:
        print(f"데이터 오류: 파일을 찾을 수 없습니다: {e.filename}", file=sys.stderr)
        return EXIT_DATA
    except SimulationError as e:
        print(f"설정 오류: {e}", file=sys.stderr)
        return EXIT_CONFIG

    for path in written:
        logger.info(f"저장: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
