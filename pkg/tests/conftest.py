import json
import os

import numpy as np
import pytest

from src.data import SynthSpec, synthesize_with_truth
from src.preprocess import preprocess_global

# 小规模合成数据: 每类样本数足够做 10 折外层 + 5 折内层
SMALL_SYNTH = {
    "n_samples": 45,
    "n_features_pos": 30,
    "n_features_neg": 20,
    "n_class0": 15,
    "n_class1": 30,
    "n_informative": 6,
    "effect_size": 2.0,
    "seed": 11,
}


@pytest.fixture
def labels_27_54():
    return np.array([0] * 27 + [1] * 54, dtype=np.int8)


@pytest.fixture
def small_tables():
    pos, neg, truth = synthesize_with_truth(SynthSpec(**SMALL_SYNTH))
    return pos, neg, truth


@pytest.fixture
def planted_xy():
    """全局预处理后的合并矩阵与标签"""
    from src.data import merge_modes

    pos, neg, _ = synthesize_with_truth(SynthSpec(**SMALL_SYNTH))
    merged = merge_modes(pos, neg)
    return preprocess_global(merged), merged.labels.astype(np.int64)


@pytest.fixture
def blobs():
    """两团高斯点，类别 0 与 1 略有重叠"""
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0.0, 1.0, size=(20, 4)), rng.normal(1.5, 1.0, size=(30, 4))])
    y = np.array([0] * 20 + [1] * 30)
    return X, y


@pytest.fixture
def write_text(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return _write


@pytest.fixture
def run_config(tmp_path):
    """写出 JSON 运行配置，返回路径"""

    def _make(**overrides):
        cfg = {"synth": dict(SMALL_SYNTH), "out": str(tmp_path / "out"), "excel": False}
        cfg.update(overrides)
        path = tmp_path / "run.json"
        path.write_text(json.dumps(cfg), encoding="utf-8")
        return str(path)

    return _make


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture
def file_bytes():
    return read_bytes


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "out"
    os.makedirs(path, exist_ok=True)
    return str(path)
