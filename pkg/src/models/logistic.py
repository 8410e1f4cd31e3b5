"""岭惩罚逻辑回归。

目标: J(w, b) = 1/2 ||w||² + C * sum_i ω_i * log(1 + exp(-ỹ_i (w·x_i + b)))，ỹ ∈ {-1, +1}，截距不惩罚。
求解器: lbfgs (记忆 10，强 Wolfe 线搜索) 与 newton-cg (精确 Hessian-向量积的共轭梯度内解)。
"""
from __future__ import annotations

import logging
import warnings
from collections import deque
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import line_search
from scipy.special import expit

from src.config import Family
from src.errors import UnknownSolver
from src.models.base import (
    FamilyImpl,
    ModelSpec,
    TrainedModel,
    class_weights,
    fit_model,
    register,
    require_choice,
    require_int,
    require_real,
)

logger = logging.getLogger(__name__)

SOLVERS = ("lbfgs", "newton-cg")
GRAD_TOL = 1e-5
LBFGS_MEMORY = 10

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]


def _validate(hp: Dict[str, Any]) -> None:
    require_real(hp, "C", 0.0, open_low=True)
    require_choice(hp, "solver", SOLVERS, err=UnknownSolver)
    require_choice(hp, "class_weight", (None, "balanced"))
    require_int(hp, "max_iter", 1)


def ridge_logistic_loss(
    theta: np.ndarray, X: np.ndarray, y: np.ndarray, C: float, weights: Optional[np.ndarray] = None
) -> Tuple[float, np.ndarray]:
    """theta = [w, b]；y 取 0/1。返回 (J, ∇J)"""
    w, b = theta[:-1], theta[-1]
    ysign = 2.0 * y - 1.0
    omega = np.ones(X.shape[0]) if weights is None else weights
    m = ysign * (X @ w + b)
    f = 0.5 * float(w @ w) + C * float(omega @ np.logaddexp(0.0, -m))
    d = -C * omega * ysign * expit(-m)
    grad = np.empty_like(theta)
    grad[:-1] = w + X.T @ d
    grad[-1] = d.sum()
    return f, grad


def _hessp_factory(theta: np.ndarray, X: np.ndarray, C: float, omega: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    s = expit(X @ theta[:-1] + theta[-1])
    D = C * omega * s * (1.0 - s)

    def hessp(v: np.ndarray) -> np.ndarray:
        u = D * (X @ v[:-1] + v[-1])
        out = np.empty_like(v)
        out[:-1] = v[:-1] + X.T @ u
        out[-1] = u.sum()
        return out

    return hessp


class _Cached:
    """line_search 分别调用 f 与 fprime，这里缓存最近一次求值"""

    def __init__(self, fg: Objective):
        self.fg = fg
        self.x: Optional[np.ndarray] = None
        self.val: Tuple[float, np.ndarray] = (0.0, np.empty(0))

    def __call__(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        if self.x is None or not np.array_equal(x, self.x):
            self.x = np.array(x, copy=True)
            self.val = self.fg(x)
        return self.val

    def f(self, x: np.ndarray) -> float:
        return self(x)[0]

    def g(self, x: np.ndarray) -> np.ndarray:
        return self(x)[1]


def _armijo(fg: _Cached, x: np.ndarray, d: np.ndarray, f0: float, g0: np.ndarray, alpha: float = 1.0) -> Optional[float]:
    slope = float(g0 @ d)
    for _ in range(40):
        if fg.f(x + alpha * d) <= f0 + 1e-4 * alpha * slope:
            return alpha
        alpha *= 0.5
    return None


def _step(fg: _Cached, x, d, f, g, old_f) -> Optional[float]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alpha = line_search(fg.f, fg.g, x, d, gfk=g, old_fval=f, old_old_fval=old_f, c1=1e-4, c2=0.9, maxiter=30)[0]
    if alpha is None or not np.isfinite(alpha) or alpha <= 0:
        alpha = _armijo(fg, x, d, f, g)
    return alpha


def _lbfgs(fg: _Cached, x0: np.ndarray, max_iter: int) -> Tuple[np.ndarray, int, bool]:
    x = x0.copy()
    f, g = fg(x)
    old_f = f + np.linalg.norm(g) / 2
    S: deque = deque(maxlen=LBFGS_MEMORY)
    Y: deque = deque(maxlen=LBFGS_MEMORY)
    for it in range(max_iter):
        if np.max(np.abs(g)) <= GRAD_TOL:
            return x, it, True
        # 双循环递推求 -H g
        q = g.copy()
        alphas = []
        for s, yv in reversed(list(zip(S, Y))):
            rho = 1.0 / float(yv @ s)
            a = rho * float(s @ q)
            q -= a * yv
            alphas.append((rho, a))
        if S:
            q *= float(S[-1] @ Y[-1]) / float(Y[-1] @ Y[-1])
        for (s, yv), (rho, a) in zip(zip(S, Y), reversed(alphas)):
            q += (a - rho * float(yv @ q)) * s
        d = -q
        if float(g @ d) >= 0:
            S.clear()
            Y.clear()
            d = -g
        alpha = _step(fg, x, d, f, g, old_f)
        if alpha is None:
            return x, it, False
        x_new = x + alpha * d
        f_new, g_new = fg(x_new)
        s, yv = x_new - x, g_new - g
        if float(s @ yv) > 1e-12:
            S.append(s)
            Y.append(yv)
        old_f, x, f, g = f, x_new, f_new, g_new
    return x, max_iter, bool(np.max(np.abs(g)) <= GRAD_TOL)


def _conjugate_gradient(hessp: Callable[[np.ndarray], np.ndarray], b: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = float(r @ r)
    for i in range(max_iter):
        if np.sqrt(rr) <= tol:
            break
        Hp = hessp(p)
        curv = float(p @ Hp)
        if curv <= 0:
            # 负曲率: 第一步退化为最速下降
            return b if i == 0 else x
        a = rr / curv
        x += a * p
        r -= a * Hp
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def _newton_cg(fg: _Cached, x0: np.ndarray, max_iter: int, X: np.ndarray, C: float, omega: np.ndarray) -> Tuple[np.ndarray, int, bool]:
    x = x0.copy()
    f, g = fg(x)
    old_f = f + np.linalg.norm(g) / 2
    for it in range(max_iter):
        if np.max(np.abs(g)) <= GRAD_TOL:
            return x, it, True
        gnorm = float(np.linalg.norm(g))
        d = _conjugate_gradient(_hessp_factory(x, X, C, omega), -g, min(0.5, np.sqrt(gnorm)) * gnorm, 200)
        if float(g @ d) >= 0:
            d = -g
        alpha = _step(fg, x, d, f, g, old_f)
        if alpha is None:
            return x, it, False
        x = x + alpha * d
        old_f = f
        f, g = fg(x)
    return x, max_iter, bool(np.max(np.abs(g)) <= GRAD_TOL)


def _fit(X: np.ndarray, y: np.ndarray, hp: Dict[str, Any], seed: int):
    C = float(hp["C"])
    omega = class_weights(y, hp["class_weight"])
    fg = _Cached(lambda theta: ridge_logistic_loss(theta, X, y, C, omega))
    theta0 = np.zeros(X.shape[1] + 1)
    if hp["solver"] == "lbfgs":
        theta, n_iter, converged = _lbfgs(fg, theta0, hp["max_iter"])
    else:
        theta, n_iter, converged = _newton_cg(fg, theta0, hp["max_iter"], X, C, omega)
    f, g = fg(theta)
    if not converged:
        logger.warning("logistic ridge (%s) stopped after %d iterations, |grad|inf=%.2e", hp["solver"], n_iter, np.max(np.abs(g)))
    params = {"coef": theta[:-1].copy(), "intercept": float(theta[-1])}
    diagnostics = {"n_iter": n_iter, "converged": converged, "objective": f, "grad_inf_norm": float(np.max(np.abs(g)))}
    return params, diagnostics


def _decision(params: Dict[str, Any], X: np.ndarray) -> np.ndarray:
    return expit(X @ np.asarray(params["coef"]) + float(params["intercept"]))


register(Family.LOGISTIC_RIDGE, FamilyImpl(fit=_fit, decision=_decision, validate=_validate))


def fit_logistic_ridge(X, y, hp: Optional[Dict[str, Any]] = None, seed: int = 0) -> TrainedModel:
    return fit_model(ModelSpec(Family.LOGISTIC_RIDGE, hp or {}, seed), X, y)


def objective_value(model: TrainedModel, X, y) -> float:
    """训练目标 J 在拟合参数处的取值 (用于跨求解器比较)"""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    theta = np.append(np.asarray(model.params["coef"]), model.params["intercept"])
    omega = class_weights(y, model.hyperparameters["class_weight"])
    return ridge_logistic_loss(theta, X, y, float(model.hyperparameters["C"]), omega)[0]
