"""命令行入口: synth / validate / benchmark / coeffs

退出码: 0 成功，2 数据校验失败，3 配置错误，4 数值失败。
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from src.config import DatasetName, Family, PreprocessMode, RunConfig, RunMode, load_run_config, parse_family
from src.data import (
    IonMode,
    MetaboliteTable,
    SynthSpec,
    dataset_info,
    load_csv,
    merge_modes,
    scan_csv,
    synthesize_with_truth,
    write_csv,
)
from src.errors import MetaboBenchError
from src.models import ModelSpec, fit_model
from src.preprocess import preprocess_for_mode, preprocess_global
from src.report import (
    CoefficientFilter,
    ReportLayout,
    build_report,
    rank_coefficients,
    summary_frame,
    write_coefficients,
    write_report,
)
from src.resample import CvResult, run_cv, run_nested_cv
from src.tuning import HyperGrid, grid_search
from src.utils.log import setup_logging
from src.version import APP_NAME, APP_VERSION

logger = logging.getLogger(__name__)

SYNTH_FILES = {IonMode.ESI_POS: "esi_pos.csv", IonMode.ESI_NEG: "esi_neg.csv"}


# ================= 配置与数据 =================
def _split_list(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    return [v.strip() for v in value.split(",") if v.strip()]


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """配置文件 + 命令行覆盖 (命令行优先)"""
    cfg = load_run_config(args.config)
    return cfg.override(
        seed=args.seed,
        out=args.out,
        threads=args.threads,
        preprocess=args.preprocess,
        modes=args.mode,
        models=_split_list(getattr(args, "models", None)),
        datasets=_split_list(getattr(args, "datasets", None)),
        evaluation=getattr(args, "evaluation", None),
        svg=True if getattr(args, "svg", False) else None,
    )


def synth_spec(cfg: RunConfig) -> SynthSpec:
    # 未显式给出合成种子时跟随 --seed
    return SynthSpec.from_dict(cfg.synth or {}, default_seed=cfg.seed)


def load_tables(cfg: RunConfig) -> Tuple[Dict[DatasetName, MetaboliteTable], Optional[List[str]]]:
    """返回三个数据集 (ESI+, ESI-, 合并) 以及合成数据的植入特征名"""
    truth = None
    if cfg.uses_synthetic:
        spec = synth_spec(cfg)
        logger.info("no input files configured, using synthetic data (seed %d)", spec.seed)
        pos, neg, truth = synthesize_with_truth(spec)
    else:
        pos = load_csv(cfg.esi_pos, IonMode.ESI_POS, cfg.metadata)
        neg = load_csv(cfg.esi_neg, IonMode.ESI_NEG, cfg.metadata)
    tables = {DatasetName.ESI_POS: pos, DatasetName.ESI_NEG: neg, DatasetName.MERGED: merge_modes(pos, neg)}
    return tables, truth


# ================= 子命令 =================
def cmd_synth(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    spec = synth_spec(cfg)
    pos, neg, truth = synthesize_with_truth(spec)
    os.makedirs(cfg.out, exist_ok=True)
    for mode, table in ((IonMode.ESI_POS, pos), (IonMode.ESI_NEG, neg)):
        path = os.path.join(cfg.out, SYNTH_FILES[mode])
        write_csv(table, path)
        print(f"已写出 {path}: {table.n_samples} 样本 x {table.n_features} 特征")
    path = os.path.join(cfg.out, "synth_truth.csv")
    pd.DataFrame({"name": truth}).to_csv(path, index=False, lineterminator="\n")
    print(f"已写出 {path}: {len(truth)} 个信息特征")
    return 0


def _guess_mode(path: str) -> IonMode:
    name = os.path.basename(path).lower()
    return IonMode.ESI_NEG if ("neg" in name or "esi-" in name) else IonMode.ESI_POS


def cmd_validate(args: argparse.Namespace) -> int:
    paths = list(args.paths)
    if not paths:
        cfg = resolve_config(args)
        if cfg.uses_synthetic:
            print("没有需要校验的文件")
            return 0
        paths = [cfg.esi_pos, cfg.esi_neg]

    failed = 0
    for path in paths:
        _, issues = scan_csv(path)
        if issues:
            failed += 1
            print(f"{path}: {len(issues)} 个问题")
            for issue in issues:
                print(f"  {issue.kind.__name__}: {issue}")
            continue
        info = dataset_info(load_csv(path, _guess_mode(path)))
        counts = ", ".join(f"{k}={v}" for k, v in info.to_dict().items())
        print(f"{path}: OK ({counts})")
    return 2 if failed else 0


def _run_cell(cfg: RunConfig, X, y, family: Family, mode: RunMode) -> CvResult:
    spec = ModelSpec(family, {}, cfg.seed)
    fold_safe = cfg.preprocess == PreprocessMode.FOLD_SAFE
    common = dict(seed=cfg.seed, fold_safe=fold_safe, evaluation=cfg.evaluation, threads=cfg.threads)
    if mode == RunMode.BASE:
        return run_cv(X, y, spec, cfg.k_outer, **common)
    grid = HyperGrid(family, tuple((name, tuple(values)) for name, values in cfg.grid_axes(family)))
    return run_nested_cv(X, y, spec, grid, cfg.k_outer, cfg.k_inner, **common)


def cmd_benchmark(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    tables, _ = load_tables(cfg)

    results, skipped = {}, {}
    for dataset in cfg.datasets:
        table = tables[dataset]
        X = preprocess_for_mode(table, cfg.preprocess)
        for family in cfg.models:
            for mode in cfg.modes:
                # 内置网格为空 (基线模型) 时跳过调参；用户给出的空网格照常报错
                if mode == RunMode.TUNED and not cfg.grid_axes(family) and cfg.grid_provenance(family) != "user":
                    skipped[(dataset, family, mode)] = "no grid"
                    continue
                result = _run_cell(cfg, X, table.labels, family, mode)
                summary = result.summary()
                logger.info(
                    "%s %s %s: auc %.4f +/- %.4f",
                    dataset.value, family.value, mode.value, summary.mean["auc"], summary.sd["auc"],
                )
                results[(dataset, family, mode)] = result

    config_doc = cfg.to_dict()
    # 线程数不影响结果，不写入报告
    config_doc.pop("threads", None)
    report = build_report(
        results,
        ReportLayout(cfg.datasets, cfg.models, cfg.modes),
        skipped=skipped,
        provenance={f: cfg.grid_provenance(f) for f in cfg.models},
        config=config_doc,
        dataset_info={d.slug: dataset_info(tables[d]).to_dict() for d in cfg.datasets},
    )
    write_report(report, cfg.out, svg=cfg.svg, excel=cfg.excel)

    for dataset in cfg.datasets:
        for mode in cfg.modes:
            print(f"\n== {dataset.value} / {mode.value} ==")
            print(summary_frame(report, dataset, mode).to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    print(f"\n结果已写入 {cfg.out}")
    return 0


def cmd_coeffs(args: argparse.Namespace) -> int:
    """在全部合并数据 (全局预处理) 上网格搜索逻辑回归，整体重训后按系数排名"""
    cfg = resolve_config(args)
    tables, _ = load_tables(cfg)
    merged = tables[DatasetName.MERGED]
    X = preprocess_global(merged)
    y = merged.labels

    family = Family.LOGISTIC_RIDGE
    search = grid_search(X, y, family, cfg.grid_axes(family), cfg.k_inner, cfg.seed, threads=cfg.threads)
    model = fit_model(ModelSpec(family, search.best, cfg.seed), X, y)
    source = {
        "family": family.value,
        "dataset": DatasetName.MERGED.value,
        "preprocess": PreprocessMode.GLOBAL.value,
        "fit": "full-data refit after grid search",
        "hyperparameters": dict(model.hyperparameters),
        "grid_provenance": cfg.grid_provenance(family),
        "grid_search": search.to_dict(),
        "seed": cfg.seed,
        "converged": bool(model.diagnostics.get("converged", True)),
    }
    reports = [rank_coefficients(model, merged.features, cfg.top_n, f, source=source) for f in CoefficientFilter]
    write_coefficients(reports, cfg.out)

    for rep in reports:
        print(f"\n== {rep.filter.value} (top {cfg.top_n}) ==")
        print(rep.frame().to_string(index=False))
    print(f"\n结果已写入 {cfg.out}")
    return 0


# ================= 解析与入口 =================
def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON 运行配置文件")
    common.add_argument("--seed", type=int, help="主随机种子 (64 位无符号整数)")
    common.add_argument("--out", help="输出目录")
    common.add_argument("--threads", type=int, help="并行任务数")
    common.add_argument("--preprocess", choices=["global", "fold-safe"], help="预处理模式")
    common.add_argument("--mode", choices=["base", "tuned", "both"], help="未调参 / 调参 / 两者")
    common.add_argument("-v", "--verbose", action="count", default=0, help="输出调试日志")
    common.add_argument("-q", "--quiet", action="count", default=0, help="只输出警告与错误")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog=APP_NAME, description="代谢组学二分类基准测试")
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="生成合成 ESI+/ESI- 数据")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", parents=[common], help="校验输入 CSV")
    p.add_argument("paths", nargs="*", help="CSV 文件 (默认取配置中的 esi_pos/esi_neg)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("benchmark", parents=[common], help="运行完整基准测试")
    p.add_argument("--models", help="逗号分隔的模型列表 (如 LR,DCM)")
    p.add_argument("--datasets", help="逗号分隔的数据集列表 (ESI+,ESI-,MERGED)")
    p.add_argument("--evaluation", choices=["per-fold", "pooled"], help="逐折平均或合并预测")
    p.add_argument("--svg", action="store_true", help="同时输出 scatter.svg")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("coeffs", parents=[common], help="逻辑回归系数排名")
    p.set_defaults(func=cmd_coeffs)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose - args.quiet)
    try:
        return args.func(args)
    except MetaboBenchError as e:
        logger.debug("command failed", exc_info=True)
        print(f"错误: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
