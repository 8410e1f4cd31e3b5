from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(master: int, *path: int) -> int:
    """由主种子与计数路径 (折序号, 网格序号...) 派生子种子。

    与调度顺序无关：同一路径永远得到同一个 64 位种子。
    """
    ss = np.random.SeedSequence(int(master) & _MASK64, spawn_key=tuple(int(p) for p in path))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


def make_rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *path))
