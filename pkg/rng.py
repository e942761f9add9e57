"""
카운터 기반 결정적 난수
(seed, day, asset) 조합을 BLAKE2b로 해시해 균등 난수를 만든다. 숨은 전역 상태가 없다.
"""
import hashlib

import numpy as np

_TWO_64 = 1 << 64


def canonical_seed(seed: int) -> int:
    """임의 정수 시드 -> 0 ~ 2^64-1 (음수, 큰 정수 모두 허용)"""
    return int(seed) % _TWO_64


def draw_u64(seed: int, day: int, asset: int) -> int:
    """(seed, day, asset) -> 64비트 정수"""
    h = hashlib.blake2b(digest_size=8)
    h.update(canonical_seed(seed).to_bytes(8, "little", signed=False))
    h.update(day.to_bytes(8, "little", signed=False))
    h.update(asset.to_bytes(8, "little", signed=False))
    return int.from_bytes(h.digest(), "little", signed=False)


def uniform_index(seed: int, day: int, asset: int, n: int) -> int:
    """
    {0, ..., n-1} 중 균등 추출

    곱셈-시프트 방식이라 편향은 n / 2^64 수준이다.
    """
    return (draw_u64(seed, day, asset) * n) >> 64


def uniform_hours(seed: int, day: int, asset_ids, hours_per_day: int = 24) -> np.ndarray:
    """자산별 소비 시간 (1 ~ hours_per_day)"""
    return np.fromiter(
        (uniform_index(seed, day, int(asset), hours_per_day) + 1 for asset in asset_ids),
        dtype=np.int16,
        count=len(asset_ids),
    )
