from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Tuple

from src.errors import ConfigError

# ================= 文件格式 =================
SAMPLE_ID_COLUMN = "sample_id"
LABEL_COLUMN = "label"
UNKNOWN_PREFIX = "unknown"
METADATA_COLUMNS = ("name", "mode", "known")
# 数据表写出用 17 位有效数字 (可逐位往返)，报告与矩阵输出用 12 位
TABLE_FLOAT_FORMAT = "%.17g"
REPORT_FLOAT_FORMAT = "%.12g"


class Family(str, Enum):
    LOGISTIC_RIDGE = "LOGISTIC_RIDGE"
    RANDOM_FOREST = "RANDOM_FOREST"
    GBDT = "GBDT"
    SVM_RBF = "SVM_RBF"
    MLP = "MLP"
    KNN = "KNN"
    DUMMY_MOST_FREQUENT = "DUMMY_MOST_FREQUENT"
    DUMMY_UNIFORM = "DUMMY_UNIFORM"


class DatasetName(str, Enum):
    ESI_POS = "ESI+"
    ESI_NEG = "ESI-"
    MERGED = "MERGED"

    @property
    def slug(self) -> str:
        return {"ESI+": "esi_pos", "ESI-": "esi_neg", "MERGED": "merged"}[self.value]


class RunMode(str, Enum):
    BASE = "BASE"
    TUNED = "TUNED"


class PreprocessMode(str, Enum):
    GLOBAL = "GLOBAL"
    FOLD_SAFE = "FOLD_SAFE"


class Evaluation(str, Enum):
    PER_FOLD = "PER_FOLD"
    POOLED = "POOLED"


# 表格行顺序: XGB, RF, SVM, MLP, LR, K-NN, DCM, DCU
MODEL_ORDER: Tuple[Family, ...] = (
    Family.GBDT,
    Family.RANDOM_FOREST,
    Family.SVM_RBF,
    Family.MLP,
    Family.LOGISTIC_RIDGE,
    Family.KNN,
    Family.DUMMY_MOST_FREQUENT,
    Family.DUMMY_UNIFORM,
)

MODEL_LABELS: Dict[Family, str] = {
    Family.GBDT: "XGB",
    Family.RANDOM_FOREST: "RF",
    Family.SVM_RBF: "SVM",
    Family.MLP: "MLP",
    Family.LOGISTIC_RIDGE: "LR",
    Family.KNN: "K-NN",
    Family.DUMMY_MOST_FREQUENT: "DCM",
    Family.DUMMY_UNIFORM: "DCU",
}

# 未调参 (BASE) 时使用的默认超参数
DEFAULT_HYPERPARAMETERS: Dict[Family, Dict[str, Any]] = {
    Family.LOGISTIC_RIDGE: {"C": 1.0, "solver": "lbfgs", "class_weight": None, "max_iter": 100},
    Family.RANDOM_FOREST: {"n_trees": 100, "max_depth": None, "min_leaf": 1, "mtry": "sqrt", "bootstrap": True},
    Family.GBDT: {"n_rounds": 100, "eta": 0.3, "lambda": 1.0, "gamma": 0.0, "max_depth": 6},
    Family.SVM_RBF: {"C": 1.0, "gamma": "scale", "class_weight": None, "tol": 1e-3, "max_passes": 1000},
    Family.MLP: {
        "hidden": 100,
        "activation": "relu",
        "alpha": 1e-4,
        "learning_rate": 1e-3,
        "max_epochs": 200,
        "patience": 10,
    },
    Family.KNN: {"k": 5},
    Family.DUMMY_MOST_FREQUENT: {"strategy": "most_frequent"},
    Family.DUMMY_UNIFORM: {"strategy": "uniform"},
}

# 网格搜索默认空间；只有逻辑回归的网格来自已发表的研究 (published)，其余为内置选择 (builtin)
DEFAULT_GRIDS: Dict[Family, List[Tuple[str, List[Any]]]] = {
    Family.LOGISTIC_RIDGE: [("C", [1.0, 0.1]), ("solver", ["lbfgs", "newton-cg"]), ("class_weight", [None, "balanced"])],
    Family.RANDOM_FOREST: [("n_trees", [100, 300]), ("max_depth", [None, 10])],
    Family.GBDT: [("eta", [0.1, 0.3]), ("max_depth", [3, 6])],
    Family.SVM_RBF: [("C", [1.0, 10.0]), ("gamma", ["scale", "auto"])],
    Family.MLP: [("hidden", [50, 100]), ("alpha", [1e-4, 1e-3])],
    Family.KNN: [("k", [3, 5, 7])],
    Family.DUMMY_MOST_FREQUENT: [],
    Family.DUMMY_UNIFORM: [],
}

GRID_PROVENANCE: Dict[Family, str] = {
    Family.LOGISTIC_RIDGE: "published",
    Family.RANDOM_FOREST: "builtin",
    Family.GBDT: "builtin",
    Family.SVM_RBF: "builtin",
    Family.MLP: "builtin",
    Family.KNN: "builtin",
    Family.DUMMY_MOST_FREQUENT: "none",
    Family.DUMMY_UNIFORM: "none",
}

_LABEL_TO_FAMILY = {v.upper(): k for k, v in MODEL_LABELS.items()}
_LABEL_TO_FAMILY["XGBOOST"] = Family.GBDT
_LABEL_TO_FAMILY["KNN"] = Family.KNN


def parse_family(value: Any) -> Family:
    """接受枚举名 (LOGISTIC_RIDGE) 或表格简称 (LR / DCM ...)"""
    if isinstance(value, Family):
        return value
    key = str(value).strip().upper()
    if key in Family.__members__:
        return Family[key]
    if key in _LABEL_TO_FAMILY:
        return _LABEL_TO_FAMILY[key]
    raise ConfigError(f"未知模型: {value}")


def _parse_enum(enum_cls, value: Any, aliases: Optional[Mapping[str, str]] = None):
    if isinstance(value, enum_cls):
        return value
    key = str(value).strip()
    if aliases and key.lower() in aliases:
        key = aliases[key.lower()]
    for member in enum_cls:
        if key.upper() == member.name or key == member.value or key.upper() == member.value.upper():
            return member
    raise ConfigError(f"无效取值 {value!r}，可选: {[m.value for m in enum_cls]}")


def parse_dataset(value: Any) -> DatasetName:
    return _parse_enum(DatasetName, value, {"esi_pos": "ESI+", "esi_neg": "ESI-", "pos": "ESI+", "neg": "ESI-"})


def parse_preprocess(value: Any) -> PreprocessMode:
    return _parse_enum(PreprocessMode, value, {"fold-safe": "FOLD_SAFE", "fold_safe": "FOLD_SAFE"})


def parse_evaluation(value: Any) -> Evaluation:
    return _parse_enum(Evaluation, value, {"per-fold": "PER_FOLD", "per_fold": "PER_FOLD"})


def parse_modes(value: Any) -> Tuple[RunMode, ...]:
    if isinstance(value, str):
        if value.lower() == "both":
            return (RunMode.BASE, RunMode.TUNED)
        value = [value]
    return tuple(_parse_enum(RunMode, v) for v in value)


# ================= 运行配置 =================
@dataclass(frozen=True)
class RunConfig:
    esi_pos: Optional[str] = None
    esi_neg: Optional[str] = None
    metadata: Optional[str] = None
    synth: Optional[Dict[str, Any]] = None
    datasets: Tuple[DatasetName, ...] = (DatasetName.ESI_POS, DatasetName.ESI_NEG, DatasetName.MERGED)
    preprocess: PreprocessMode = PreprocessMode.GLOBAL
    k_outer: int = 10
    k_inner: int = 5
    modes: Tuple[RunMode, ...] = (RunMode.BASE, RunMode.TUNED)
    models: Tuple[Family, ...] = MODEL_ORDER
    grids: Dict[str, List[Tuple[str, List[Any]]]] = field(default_factory=dict)
    evaluation: Evaluation = Evaluation.PER_FOLD
    seed: int = 0
    out: str = "results"
    threads: int = 1
    top_n: int = 10
    svg: bool = False
    excel: bool = True

    def __post_init__(self):
        if self.k_outer < 2 or self.k_inner < 2:
            raise ConfigError(f"k_outer/k_inner 必须 >= 2 (当前 {self.k_outer}/{self.k_inner})")
        if not self.datasets or not self.models or not self.modes:
            raise ConfigError("至少需要一个数据集、一个模型和一种模式")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed 必须是 64 位无符号整数: {self.seed}")
        if self.threads < 1:
            raise ConfigError("threads 必须 >= 1")
        if self.top_n < 1:
            raise ConfigError("top_n 必须 >= 1")
        if (self.esi_pos is None) != (self.esi_neg is None):
            raise ConfigError("esi_pos 与 esi_neg 必须同时给出")

    @property
    def uses_synthetic(self) -> bool:
        return self.esi_pos is None

    def grid_axes(self, family: Family) -> List[Tuple[str, List[Any]]]:
        """用户覆盖优先，否则取内置默认网格"""
        for key, axes in self.grids.items():
            if parse_family(key) == family:
                return [(name, list(values)) for name, values in axes]
        return [(name, list(values)) for name, values in DEFAULT_GRIDS[family]]

    def grid_provenance(self, family: Family) -> str:
        if any(parse_family(k) == family for k in self.grids):
            return "user"
        return GRID_PROVENANCE[family]

    def override(self, **changes: Any) -> "RunConfig":
        """命令行参数覆盖配置文件 (None 表示未指定)"""
        return from_mapping({**self.to_dict(), **{k: v for k, v in changes.items() if v is not None}})

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["datasets"] = [x.value for x in self.datasets]
        d["preprocess"] = self.preprocess.value
        d["modes"] = [m.value for m in self.modes]
        d["models"] = [f.value for f in self.models]
        d["evaluation"] = self.evaluation.value
        d["grids"] = {k: [[name, list(values)] for name, values in axes] for k, axes in self.grids.items()}
        return d


_CONFIG_KEYS = {f for f in RunConfig.__dataclass_fields__}


def from_mapping(raw: Mapping[str, Any]) -> RunConfig:
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"配置包含未知字段: {sorted(unknown)}")
    kw: Dict[str, Any] = dict(raw)
    try:
        if "datasets" in kw:
            ds = kw["datasets"]
            kw["datasets"] = tuple(parse_dataset(d) for d in ([ds] if isinstance(ds, str) else ds))
        if "models" in kw:
            ms = kw["models"]
            kw["models"] = tuple(parse_family(m) for m in ([ms] if isinstance(ms, str) else ms))
        if "modes" in kw:
            kw["modes"] = parse_modes(kw["modes"])
        if "preprocess" in kw:
            kw["preprocess"] = parse_preprocess(kw["preprocess"])
        if "evaluation" in kw:
            kw["evaluation"] = parse_evaluation(kw["evaluation"])
        if "grids" in kw:
            grids = {}
            for fam, axes in (kw["grids"] or {}).items():
                parse_family(fam)
                # JSON 中既可写 {"k": [3, 5]} 也可写 [["k", [3, 5]]]，轴顺序按声明顺序
                items = axes.items() if isinstance(axes, Mapping) else axes
                grids[fam] = [(str(name), list(values)) for name, values in items]
            kw["grids"] = grids
        for key in ("k_outer", "k_inner", "seed", "threads", "top_n"):
            if key in kw:
                kw[key] = int(kw[key])
        if kw.get("synth") is not None and not isinstance(kw["synth"], Mapping):
            raise ConfigError("synth 必须是对象")
    except (TypeError, ValueError) as e:
        raise ConfigError(f"配置格式错误: {e}") from e
    return RunConfig(**kw)


def load_run_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    if not os.path.exists(path):
        raise ConfigError(f"找不到配置文件: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"配置文件不是合法 JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("配置文件顶层必须是对象")
    return from_mapping(raw)
