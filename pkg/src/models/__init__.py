# 模型族: 导入各实现模块即完成注册
from src.models.base import (
    ModelSpec,
    TrainedModel,
    fit_model,
    load_model,
    model_from_dict,
    model_to_dict,
    predict_labels,
    predict_scores,
    save_model,
)
from src.models.dummy import fit_dummy
from src.models.forest import fit_random_forest
from src.models.gbdt import fit_gbdt
from src.models.knn import fit_knn
from src.models.logistic import fit_logistic_ridge
from src.models.mlp import fit_mlp
from src.models.svm import fit_svm_rbf

__all__ = [
    "ModelSpec",
    "TrainedModel",
    "fit_model",
    "predict_scores",
    "predict_labels",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
    "fit_logistic_ridge",
    "fit_random_forest",
    "fit_gbdt",
    "fit_svm_rbf",
    "fit_mlp",
    "fit_knn",
    "fit_dummy",
]
