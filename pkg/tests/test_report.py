import dataclasses
import json
import os

import numpy as np
import pandas as pd
import pytest

from src.config import DatasetName, Family, RunMode
from src.data import FeatureMeta, IonMode, merge_modes
from src.errors import EmptyInput, MissingCell, ShapeMismatch, WrongFamily
from src.models import ModelSpec, TrainedModel, fit_model
from src.preprocess import preprocess_global
from src.report import (
    SCATTER_COLUMNS,
    CoefficientFilter,
    ReportLayout,
    build_report,
    consistency_scatter,
    rank_coefficients,
    read_scatter_csv,
    summary_frame,
    write_coefficients,
    write_report,
)
from src.resample import run_cv, run_nested_cv
from src.tuning import HyperGrid

# 基线模型没有网格，调参格子标记为跳过
NO_GRID = {(d, Family.DUMMY_MOST_FREQUENT, RunMode.TUNED): "no grid" for d in DatasetName}


@pytest.fixture
def cv_results(small_tables):
    pos, neg, _ = small_tables
    tables = {DatasetName.ESI_POS: pos, DatasetName.ESI_NEG: neg, DatasetName.MERGED: merge_modes(pos, neg)}
    results = {}
    for dataset, table in tables.items():
        X = preprocess_global(table)
        for family in (Family.KNN, Family.DUMMY_MOST_FREQUENT):
            spec = ModelSpec(family)
            results[(dataset, family, RunMode.BASE)] = run_cv(X, table.labels, spec, k=5, seed=0)
        grid = HyperGrid(Family.KNN, (("k", (1, 3)),))
        results[(dataset, Family.KNN, RunMode.TUNED)] = run_nested_cv(X, table.labels, ModelSpec(Family.KNN), grid, 5, 3, seed=0)
    return results


def _lr_model(coef):
    return TrainedModel(Family.LOGISTIC_RIDGE, {"C": 1.0}, {"coef": np.array(coef), "intercept": 0.0}, len(coef), 0.5, 0)


def test_rows_follow_table_order(cv_results):
    report = build_report(cv_results, skipped=NO_GRID)
    labels = [c.label for c in report.rows(DatasetName.MERGED, RunMode.BASE)]
    assert labels == ["K-NN", "DCM"]
    frame = summary_frame(report, DatasetName.MERGED, RunMode.BASE)
    assert list(frame.columns) == ["Model", "AUC", "B.A.", "MCC", "Spec.", "F1"]


def test_dummy_rows_identical_across_datasets(cv_results):
    report = build_report(cv_results, skipped=NO_GRID)
    rows = [report.cell(d, Family.DUMMY_MOST_FREQUENT, RunMode.BASE).summary for d in DatasetName]
    assert rows[0] == rows[1] == rows[2]
    assert rows[0].mean["auc"] == 0.5 and rows[0].mean["mcc"] == 0.0


def test_summary_mean_recomputed_from_folds(cv_results):
    report = build_report(cv_results, skipped=NO_GRID)
    cell = report.cell(DatasetName.ESI_POS, Family.KNN, RunMode.BASE)
    aucs = [m.auc for m in cell.result.per_fold]
    assert cell.summary.mean["auc"] == pytest.approx(np.mean(aucs), abs=1e-12)
    assert cell.summary.sd["auc"] == pytest.approx(np.std(aucs, ddof=1), abs=1e-12)


def test_single_fold_has_zero_sd(cv_results):
    key = (DatasetName.MERGED, Family.KNN, RunMode.BASE)
    result = cv_results[key]
    single = dataclasses.replace(result, records=result.records[:1])
    report = build_report({key: single})
    assert report.cell(*key).summary.sd["auc"] == 0.0


def test_scatter_points(cv_results):
    report = build_report(cv_results, skipped=NO_GRID)
    points = consistency_scatter(report)
    assert len(points) == 9
    assert not [p for p in points if p.model == "DCM" and p.mode == "TUNED"]
    dcm = [p for p in points if p.model == "DCM"]
    assert all((p.mean_auc, p.sd_auc) == (0.5, 0.0) for p in dcm)
    knn = {(p.dataset, p.mode): p for p in points if p.model == "K-NN"}
    assert knn[("MERGED", "BASE")] != knn[("MERGED", "TUNED")]


def test_missing_and_empty():
    with pytest.raises(EmptyInput):
        build_report({})


def test_layout_requires_every_cell(cv_results):
    layout = ReportLayout((DatasetName.MERGED,), (Family.KNN, Family.SVM_RBF), (RunMode.BASE,))
    with pytest.raises(MissingCell):
        build_report(cv_results, layout)
    report = build_report(cv_results, skipped=NO_GRID)
    with pytest.raises(MissingCell):
        report.cell(DatasetName.MERGED, Family.SVM_RBF, RunMode.BASE)


def test_skipped_cells_are_kept_out_of_tables(cv_results):
    key = (DatasetName.MERGED, Family.SVM_RBF, RunMode.BASE)
    layout = ReportLayout((DatasetName.MERGED,), (Family.KNN, Family.SVM_RBF), (RunMode.BASE,))
    report = build_report(cv_results, layout, skipped={key: "not requested"})
    assert [c.label for c in report.rows(DatasetName.MERGED, RunMode.BASE)] == ["K-NN"]
    assert report.cell(*key).to_dict()["skipped"] == "not requested"


def test_rank_coefficients_example():
    rep = rank_coefficients(_lr_model([0.5, -0.7, 0.1]), ["a", "b", "c"], top_n=2)
    assert rep.entries == (("b", -0.7), ("a", 0.5))
    assert rep.frame()["order"].tolist() == [1, 2]


def test_rank_coefficients_known_only_and_suffix():
    features = [
        FeatureMeta.from_name("unknown303", IonMode.ESI_POS),
        FeatureMeta.from_name("Hypoxanthin", IonMode.ESI_NEG),
        FeatureMeta.from_name("Militarinone A", IonMode.ESI_POS),
    ]
    model = _lr_model([3.0, -1.0, 2.0])
    rep = rank_coefficients(model, features, filter=CoefficientFilter.KNOWN_ONLY)
    assert rep.entries == (("Militarinone A_ESI+", 2.0), ("Hypoxanthin_ESI-", -1.0))
    assert rank_coefficients(model, features).entries[0] == ("unknown303_ESI+", 3.0)


def test_rank_coefficients_ignores_feature_order():
    names = ["m1", "m2", "m3", "m4"]
    coef = [0.2, -0.9, 0.2, 0.4]
    perm = [2, 0, 3, 1]
    a = rank_coefficients(_lr_model(coef), names, top_n=4)
    b = rank_coefficients(_lr_model([coef[i] for i in perm]), [names[i] for i in perm], top_n=4)
    assert a.entries == b.entries
    assert [n for n, _ in a.entries] == ["m2", "m4", "m1", "m3"]


def test_rank_coefficients_rejects_other_families(blobs):
    X, y = blobs
    with pytest.raises(WrongFamily):
        rank_coefficients(fit_model(ModelSpec(Family.KNN), X, y), ["a", "b", "c", "d"])
    with pytest.raises(ShapeMismatch):
        rank_coefficients(_lr_model([1.0, 2.0]), ["a"])


def test_write_report_files(cv_results, out_dir):
    report = build_report(cv_results, skipped=NO_GRID, config={"seed": 0})
    written = write_report(report, out_dir, excel=True)
    names = {os.path.basename(p) for p in written}
    assert {"report.json", "scatter.csv", "summary.xlsx", "summary_merged_base.csv", "summary_esi_neg_tuned.csv"} <= names

    with open(os.path.join(out_dir, "report.json"), encoding="utf-8") as fh:
        doc = json.load(fh)
    assert doc["config"] == {"seed": 0}
    assert len(doc["cells"]) == 12

    frame = pd.read_csv(os.path.join(out_dir, "summary_merged_base.csv"))
    assert frame["Model"].tolist() == ["K-NN", "DCM"]

    sheets = pd.read_excel(os.path.join(out_dir, "summary.xlsx"), sheet_name=None)
    assert set(sheets) == {f"{d.slug}_{m}" for d in DatasetName for m in ("base", "tuned")} | {"scatter"}
    assert list(sheets["scatter"].columns) == list(SCATTER_COLUMNS)


def test_write_report_is_repeatable(cv_results, tmp_path, file_bytes):
    report = build_report(cv_results, skipped=NO_GRID)
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    write_report(report, a, svg=True, excel=False)
    write_report(report, b, svg=True, excel=False)
    for name in ("report.json", "scatter.csv", "scatter.svg"):
        assert file_bytes(os.path.join(a, name)) == file_bytes(os.path.join(b, name))


def test_scatter_csv_round_trip(cv_results, out_dir):
    report = build_report(cv_results, skipped=NO_GRID)
    write_report(report, out_dir, excel=False)
    back = read_scatter_csv(os.path.join(out_dir, "scatter.csv"))
    points = consistency_scatter(report)
    assert [(p.dataset, p.model, p.mode) for p in back] == [(p.dataset, p.model, p.mode) for p in points]
    for p, q in zip(points, back):
        assert q.mean_auc == float("%.12g" % p.mean_auc)
        assert q.sd_auc == float("%.12g" % p.sd_auc)


def test_write_coefficients(out_dir):
    model = _lr_model([0.5, -0.7, 0.1])
    reports = [rank_coefficients(model, ["a", "unknown1", "c"], filter=f) for f in CoefficientFilter]
    written = write_coefficients(reports, out_dir)
    assert {os.path.basename(p) for p in written} == {"coefficients_all.csv", "coefficients_known_only.csv", "coefficients.json"}
    known = pd.read_csv(os.path.join(out_dir, "coefficients_known_only.csv"))
    assert known["name"].tolist() == ["a", "c"]


def test_top_coefficients_recover_planted_features():
    from src.data import SynthSpec, synthesize_with_truth

    spec = SynthSpec(81, 1922, 939, 27, 54, 40, 1.5, seed=0)
    pos, neg, truth = synthesize_with_truth(spec)
    merged = merge_modes(pos, neg)
    model = fit_model(ModelSpec(Family.LOGISTIC_RIDGE), preprocess_global(merged), merged.labels)
    rep = rank_coefficients(model, merged.features, top_n=50)
    hits = {name for name, _ in rep.entries} & set(truth)
    assert len(hits) >= 30
