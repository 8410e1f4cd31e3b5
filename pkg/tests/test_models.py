import numpy as np
import pytest

from src.config import Family
from src.errors import InvalidSpec, NonFiniteInput, ShapeMismatch, UnknownSolver
from src.models import (
    ModelSpec,
    fit_dummy,
    fit_gbdt,
    fit_knn,
    fit_logistic_ridge,
    fit_mlp,
    fit_model,
    fit_random_forest,
    fit_svm_rbf,
    load_model,
    predict_labels,
    predict_scores,
    save_model,
)
from src.models.gbdt import log_loss, margins
from src.models.logistic import objective_value, ridge_logistic_loss
from src.models.mlp import init_params, mlp_loss_and_grad

DETERMINISTIC = [
    (Family.LOGISTIC_RIDGE, {}),
    (Family.RANDOM_FOREST, {"n_trees": 15}),
    (Family.GBDT, {"n_rounds": 15}),
    (Family.SVM_RBF, {}),
    (Family.MLP, {"hidden": 8, "max_epochs": 50}),
    (Family.KNN, {}),
    (Family.DUMMY_MOST_FREQUENT, {}),
]


# ---------------- 统一契约 ----------------
@pytest.mark.parametrize("family, hp", DETERMINISTIC)
def test_labels_follow_threshold(blobs, family, hp):
    X, y = blobs
    model = fit_model(ModelSpec(family, hp, seed=1), X, y)
    external = np.random.default_rng(9).normal(0.7, 2.0, size=(60, X.shape[1]))
    scores = predict_scores(model, external)
    assert np.all(np.isfinite(scores))
    assert np.array_equal(predict_labels(model, external), (scores >= model.threshold).astype(np.int8))


@pytest.mark.parametrize("family, hp", DETERMINISTIC)
def test_scores_are_row_independent(blobs, family, hp):
    X, y = blobs
    model = fit_model(ModelSpec(family, hp, seed=1), X, y)
    batch = predict_scores(model, X[:6])
    singles = np.array([predict_scores(model, X[i])[0] for i in range(6)])
    assert np.allclose(batch, singles, rtol=0, atol=1e-12)
    dup = predict_scores(model, np.vstack([X[:1], X[:1]]))
    assert dup[0] == pytest.approx(dup[1], abs=1e-12)


@pytest.mark.parametrize("family, hp", DETERMINISTIC)
def test_same_seed_same_scores(blobs, family, hp):
    X, y = blobs
    a = fit_model(ModelSpec(family, hp, seed=4), X, y)
    b = fit_model(ModelSpec(family, hp, seed=4), X, y)
    assert np.array_equal(predict_scores(a, X), predict_scores(b, X))


def test_query_validation(blobs):
    X, y = blobs
    model = fit_logistic_ridge(X, y)
    with pytest.raises(ShapeMismatch):
        predict_scores(model, X[:, :2])
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(NonFiniteInput):
        predict_scores(model, bad)
    with pytest.raises(ShapeMismatch):
        fit_model(ModelSpec(Family.KNN), X, y[:-1])


def test_spec_validation():
    with pytest.raises(InvalidSpec):
        ModelSpec(Family.LOGISTIC_RIDGE, {"C": 0.0})
    with pytest.raises(InvalidSpec):
        ModelSpec(Family.KNN, {"k": 0})
    with pytest.raises(InvalidSpec):
        ModelSpec(Family.GBDT, {"eta": 1.5})
    with pytest.raises(InvalidSpec):
        ModelSpec(Family.RANDOM_FOREST, {"depth": 3})
    with pytest.raises(InvalidSpec):
        ModelSpec(Family.SVM_RBF, {"gamma": "wide"})
    with pytest.raises(UnknownSolver):
        ModelSpec(Family.LOGISTIC_RIDGE, {"solver": "sag"})


@pytest.mark.parametrize("family, hp", [(Family.LOGISTIC_RIDGE, {}), (Family.GBDT, {"n_rounds": 5})])
def test_saved_model_predicts_identically(tmp_path, blobs, family, hp):
    X, y = blobs
    model = fit_model(ModelSpec(family, hp, seed=2), X, y)
    path = str(tmp_path / "m.json")
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.family is family
    assert np.array_equal(predict_scores(loaded, X), predict_scores(model, X))


# ---------------- 逻辑回归 ----------------
def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n, p = rng.integers(5, 30), rng.integers(1, 8)
        X = rng.normal(size=(n, p))
        y = rng.integers(0, 2, size=n).astype(float)
        theta = rng.normal(size=p + 1)
        C = float(rng.uniform(0.1, 10.0))
        w = rng.uniform(0.5, 2.0, size=n)
        _, grad = ridge_logistic_loss(theta, X, y, C, w)
        h = 1e-6
        fd = np.array(
            [
                (ridge_logistic_loss(theta + h * e, X, y, C, w)[0] - ridge_logistic_loss(theta - h * e, X, y, C, w)[0]) / (2 * h)
                for e in np.eye(p + 1)
            ]
        )
        assert np.linalg.norm(fd - grad) / max(np.linalg.norm(grad), 1e-8) < 1e-5


@pytest.mark.parametrize("class_weight", [None, "balanced"])
def test_solvers_agree(blobs, class_weight):
    X, y = blobs
    a = fit_logistic_ridge(X, y, {"solver": "lbfgs", "class_weight": class_weight})
    b = fit_logistic_ridge(X, y, {"solver": "newton-cg", "class_weight": class_weight})
    assert a.diagnostics["converged"] and b.diagnostics["converged"]
    assert abs(objective_value(a, X, y) - objective_value(b, X, y)) < 1e-4
    assert np.array_equal(predict_labels(a, X), predict_labels(b, X))


def test_logistic_stationarity(blobs):
    X, y = blobs
    model = fit_logistic_ridge(X, y, {"C": 0.1})
    theta = np.append(model.params["coef"], model.params["intercept"])
    _, grad = ridge_logistic_loss(theta, X, y.astype(float), 0.1)
    assert np.max(np.abs(grad)) <= 1e-5


def test_logistic_iteration_cap_is_reported(blobs):
    X, y = blobs
    model = fit_logistic_ridge(X, y, {"C": 100.0, "max_iter": 1})
    assert model.diagnostics["converged"] is False
    assert model.diagnostics["n_iter"] == 1


@pytest.mark.parametrize("solver", ["lbfgs", "newton-cg"])
def test_logistic_weight_norm_shrinks_with_c(planted_xy, solver):
    X, y = planted_xy
    norms = [np.linalg.norm(fit_logistic_ridge(X, y, {"C": C, "solver": solver, "max_iter": 500}).params["coef"]) for C in (1.0, 0.1)]
    assert norms[1] <= norms[0] + 1e-9


def test_balanced_weights_raise_minority_recall():
    rng = np.random.default_rng(4)
    X = np.vstack([rng.normal(0.0, 1.0, size=(10, 2)), rng.normal(1.0, 1.0, size=(40, 2))])
    y = np.array([0] * 10 + [1] * 40)
    recall = {}
    for cw in (None, "balanced"):
        pred = predict_labels(fit_logistic_ridge(X, y, {"C": 0.1, "class_weight": cw}), X)
        recall[cw] = np.mean(pred[y == 0] == 0)
    assert recall["balanced"] >= recall[None]
    assert recall["balanced"] > 0.5


# ---------------- 随机森林 ----------------
def test_forest_single_class_is_prior_only(blobs):
    X, _ = blobs
    model = fit_random_forest(X, np.ones(X.shape[0], dtype=int), {"n_trees": 3})
    assert np.all(predict_scores(model, X) == 1.0)


def test_single_full_tree_reproduces_training_labels(blobs):
    X, y = blobs
    model = fit_random_forest(X, y, {"n_trees": 1, "mtry": X.shape[1], "bootstrap": False})
    assert np.array_equal(predict_labels(model, X), y)


def test_forest_seed_changes_trees(blobs):
    X, y = blobs
    a = fit_random_forest(X, y, {"n_trees": 10}, seed=1)
    b = fit_random_forest(X, y, {"n_trees": 10}, seed=2)
    assert not np.array_equal(predict_scores(a, X), predict_scores(b, X))


# ---------------- 梯度提升 ----------------
def test_gbdt_zero_rounds_scores_prior(blobs):
    X, y = blobs
    model = fit_gbdt(X, y, {"n_rounds": 0})
    assert np.allclose(predict_scores(model, X), y.mean())


def test_gbdt_training_loss_non_increasing(blobs):
    X, y = blobs
    model = fit_gbdt(X, y, {"n_rounds": 40, "max_depth": 3})
    history = np.array(model.diagnostics["loss_history"])
    assert history.size == 41
    assert np.all(np.diff(history) <= 1e-12)
    assert history[-1] == pytest.approx(log_loss(y, margins(model.params, X)))


def test_gbdt_separable_one_dimensional():
    X = np.arange(10, dtype=float).reshape(-1, 1)
    y = (X[:, 0] >= 5).astype(int)
    model = fit_gbdt(X, y, {"n_rounds": 30})
    assert np.mean(predict_labels(model, X) == y) == 1.0


# ---------------- SVM ----------------
def test_svm_dual_constraints(blobs):
    X, y = blobs
    for cw in (None, "balanced"):
        model = fit_svm_rbf(X, y, {"C": 2.0, "class_weight": cw})
        alpha, box = model.diagnostics["alpha"], model.diagnostics["box"]
        ysign = 2.0 * y - 1.0
        assert np.all(alpha >= -1e-8) and np.all(alpha <= box + 1e-8)
        assert abs(float(alpha @ ysign)) < 1e-8
        assert model.diagnostics["converged"]


def test_svm_xor():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0, 0, 1, 1])
    model = fit_svm_rbf(X, y, {"C": 10.0})
    assert np.array_equal(predict_labels(model, X), y)
    assert model.threshold == 0.0


def test_svm_duplicate_point_with_opposite_labels(blobs):
    X, y = blobs
    X2 = np.vstack([X, X[:1]])
    y2 = np.append(y, 1 - y[0])
    model = fit_svm_rbf(X2, y2)
    assert np.all(np.isfinite(predict_scores(model, X2)))


def test_svm_gamma_options(blobs):
    X, y = blobs
    assert fit_svm_rbf(X, y, {"gamma": "auto"}).params["gamma"] == pytest.approx(1 / X.shape[1])
    assert fit_svm_rbf(X, y, {"gamma": "scale"}).params["gamma"] == pytest.approx(1 / (X.shape[1] * X.var()))
    assert fit_svm_rbf(X, y, {"gamma": 0.3}).params["gamma"] == 0.3


def test_svm_pass_cap_counts_full_sweeps(blobs):
    X, y = blobs
    capped = fit_svm_rbf(X, y, {"C": 10.0, "max_passes": 1})
    assert capped.diagnostics["max_updates"] == X.shape[0]
    assert 1 < capped.diagnostics["n_iter"] <= X.shape[0]
    full = fit_svm_rbf(X, y, {"C": 10.0})
    assert full.diagnostics["converged"]
    assert full.diagnostics["n_iter"] < full.diagnostics["max_updates"]


# ---------------- MLP ----------------
@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_mlp_gradient_matches_finite_differences(activation):
    rng = np.random.default_rng(1)
    X = rng.normal(size=(5, 3))
    y = np.array([0.0, 1.0, 1.0, 0.0, 1.0])
    params = init_params(3, 4, activation, rng)
    params["b1"] = rng.normal(size=4)
    _, grads = mlp_loss_and_grad(params, X, y, 1e-2, activation)
    h = 1e-6
    for name, value in params.items():
        fd = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            plus = {k: v.copy() for k, v in params.items()}
            minus = {k: v.copy() for k, v in params.items()}
            plus[name][idx] += h
            minus[name][idx] -= h
            fd[idx] = (mlp_loss_and_grad(plus, X, y, 1e-2, activation)[0] - mlp_loss_and_grad(minus, X, y, 1e-2, activation)[0]) / (2 * h)
        assert np.linalg.norm(fd - grads[name]) / max(np.linalg.norm(grads[name]), 1e-8) < 1e-4


def test_mlp_zero_hidden_rejected():
    with pytest.raises(InvalidSpec):
        ModelSpec(Family.MLP, {"hidden": 0})


def test_mlp_same_seed_same_trajectory(blobs):
    X, y = blobs
    a = fit_mlp(X, y, {"hidden": 6, "max_epochs": 30}, seed=3)
    b = fit_mlp(X, y, {"hidden": 6, "max_epochs": 30}, seed=3)
    assert a.diagnostics["loss_history"] == b.diagnostics["loss_history"]
    assert np.array_equal(a.params["W1"], b.params["W1"])


def test_mlp_learns_blobs(blobs):
    X, y = blobs
    model = fit_mlp(X, y, {"hidden": 16, "learning_rate": 1e-2, "max_epochs": 300})
    history = model.diagnostics["loss_history"]
    assert history[-1] < history[0]
    assert np.mean(predict_labels(model, X) == y) > 0.8


# ---------------- k 近邻 ----------------
def test_knn_one_neighbour_recovers_training_labels(blobs):
    X, y = blobs
    assert np.array_equal(predict_labels(fit_knn(X, y, {"k": 1}), X), y)


def test_knn_all_neighbours_is_prior(blobs):
    X, y = blobs
    assert np.allclose(predict_scores(fit_knn(X, y, {"k": X.shape[0]}), X), y.mean())


def test_knn_distance_tie_prefers_lower_index():
    X = np.array([[5.0, 5.0], [6.0, 6.0], [1.0, 0.0], [7.0, 7.0], [8.0, 8.0], [-1.0, 0.0]])
    y = np.array([1, 1, 0, 1, 1, 1])
    model = fit_knn(X, y, {"k": 1})
    assert predict_scores(model, np.array([[0.0, 0.0]]))[0] == 0.0


def test_knn_k_larger_than_training_set(blobs):
    X, y = blobs
    with pytest.raises(InvalidSpec):
        fit_knn(X[:4], y[:4], {"k": 5})


# ---------------- 基线 ----------------
def test_most_frequent_on_27_54(labels_27_54):
    X = np.ones((81, 2))
    model = fit_dummy(X, labels_27_54, {"strategy": "most_frequent"})
    assert np.all(predict_labels(model, X) == 1)
    assert np.allclose(predict_scores(model, X), 2 / 3)


def test_most_frequent_tie_goes_to_class_one():
    X = np.ones((4, 1))
    model = fit_dummy(X, np.array([0, 1, 0, 1]), {"strategy": "most_frequent"})
    assert np.all(predict_labels(model, X) == 1)


def test_most_frequent_minority_positive():
    X = np.ones((5, 1))
    model = fit_dummy(X, np.array([0, 0, 0, 1, 0]), {"strategy": "most_frequent"})
    assert np.all(predict_labels(model, X) == 0)
    assert np.allclose(predict_scores(model, X), 0.2)


def test_uniform_coin(labels_27_54):
    model = fit_dummy(np.ones((81, 1)), labels_27_54, {"strategy": "uniform"}, seed=5)
    queries = np.zeros((10_000, 1))
    labels = predict_labels(model, queries)
    assert abs(labels.mean() - 0.5) < 0.02
    assert np.all(predict_scores(model, queries) == 0.5)
    assert np.array_equal(labels, predict_labels(model, queries))
