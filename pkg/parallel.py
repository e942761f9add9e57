"""
병렬 실행 도우미
--jobs 개수만큼 프로세스로 나눠 계산하고, 결과는 항상 입력 순서대로 돌려준다.
"""
import logging
from multiprocessing import Pool
from typing import Callable, List, Sequence, Tuple, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


def run_parallel(func: Callable[..., T], args_list: Sequence[Tuple], jobs: int = 1) -> List[T]:
    """
    func(*args)를 args_list 각각에 대해 실행

    Args:
        func: 모듈 최상위 함수 (pickle 가능해야 함)
        args_list: 인자 튜플 목록
        jobs: 프로세스 수 (1 이하면 현재 프로세스에서 순차 실행)
    """
    if jobs <= 1 or len(args_list) <= 1:
        return [func(*args) for args in args_list]

    processes = min(jobs, len(args_list))
    logger.debug(f"[parallel] {len(args_list)}개 작업을 {processes}개 프로세스로 실행")
    with Pool(processes) as pool:
        # starmap은 입력 순서를 보존한다
        return pool.starmap(func, args_list)
