import json

import pytest

from src.config import (
    DEFAULT_GRIDS,
    DatasetName,
    Evaluation,
    Family,
    PreprocessMode,
    RunConfig,
    RunMode,
    from_mapping,
    load_run_config,
    parse_family,
    parse_modes,
)
from src.errors import (
    ConfigError,
    DataValidationError,
    FoldFitError,
    MissingValue,
    NonFiniteLoss,
    TooFewPerClass,
)


def test_exit_codes_follow_hierarchy():
    assert DataValidationError("x").exit_code == 2
    assert TooFewPerClass("x").exit_code == 3
    assert NonFiniteLoss("x").exit_code == 4


def test_fold_fit_error_keeps_cause_and_exit_code():
    cause = TooFewPerClass("too few")
    err = FoldFitError(3, cause)
    assert err.fold == 3
    assert err.cause is cause
    assert err.exit_code == 3
    assert "fold 3" in str(err)


def test_error_location_is_reported():
    err = MissingValue("缺失", row=4, column="m1")
    assert "4" in str(err) and "m1" in str(err)


def test_parse_family_accepts_names_and_table_labels():
    assert parse_family("LOGISTIC_RIDGE") is Family.LOGISTIC_RIDGE
    assert parse_family("lr") is Family.LOGISTIC_RIDGE
    assert parse_family("XGB") is Family.GBDT
    assert parse_family("K-NN") is Family.KNN
    assert parse_family("DCU") is Family.DUMMY_UNIFORM
    with pytest.raises(ConfigError):
        parse_family("ADABOOST")


def test_parse_modes_both():
    assert parse_modes("both") == (RunMode.BASE, RunMode.TUNED)
    assert parse_modes("tuned") == (RunMode.TUNED,)


def test_defaults():
    cfg = RunConfig()
    assert cfg.k_outer == 10 and cfg.k_inner == 5
    assert cfg.preprocess is PreprocessMode.GLOBAL
    assert cfg.evaluation is Evaluation.PER_FOLD
    assert cfg.uses_synthetic


@pytest.mark.parametrize(
    "raw",
    [
        {"k_outer": 1},
        {"models": []},
        {"threads": 0},
        {"esi_pos": "a.csv"},
        {"unexpected": 1},
        {"preprocess": "sometimes"},
    ],
)
def test_invalid_configs_raise_config_error(raw):
    with pytest.raises(ConfigError):
        from_mapping(raw)


def test_from_mapping_parses_enums_and_grids():
    cfg = from_mapping(
        {
            "datasets": "MERGED",
            "models": ["LR", "DCM"],
            "modes": "base",
            "preprocess": "fold-safe",
            "grids": {"LR": {"C": [0.5, 2.0]}},
        }
    )
    assert cfg.datasets == (DatasetName.MERGED,)
    assert cfg.models == (Family.LOGISTIC_RIDGE, Family.DUMMY_MOST_FREQUENT)
    assert cfg.modes == (RunMode.BASE,)
    assert cfg.preprocess is PreprocessMode.FOLD_SAFE
    assert cfg.grid_axes(Family.LOGISTIC_RIDGE) == [("C", [0.5, 2.0])]
    assert cfg.grid_provenance(Family.LOGISTIC_RIDGE) == "user"
    assert cfg.grid_axes(Family.KNN) == [(n, list(v)) for n, v in DEFAULT_GRIDS[Family.KNN]]
    assert cfg.grid_provenance(Family.KNN) == "builtin"


def test_override_prefers_flags_and_survives_round_trip():
    cfg = from_mapping({"seed": 3, "grids": {"KNN": [["k", [1, 3]]]}})
    new = cfg.override(seed=9, modes="both", out=None)
    assert new.seed == 9
    assert new.out == cfg.out
    assert new.grid_axes(Family.KNN) == [("k", [1, 3])]


def test_load_run_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 5, "datasets": ["ESI+", "ESI-"]}), encoding="utf-8")
    cfg = load_run_config(str(path))
    assert cfg.seed == 5
    assert cfg.datasets == (DatasetName.ESI_POS, DatasetName.ESI_NEG)
    assert load_run_config(None) == RunConfig()


def test_load_run_config_rejects_bad_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(str(path))
    with pytest.raises(ConfigError):
        load_run_config(str(tmp_path / "missing.json"))
