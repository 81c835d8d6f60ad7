"""Three-model ranking ensemble for hypernym candidate filtering.

A linear-kernel SVM, an RBF-kernel SVM and a logistic regression are trained
on the same feature vectors; each raw decision value is squashed to [0, 1]
by a per-model logistic calibration and the ensemble score is the mean of
the three calibrated scores.

The SVMs are solved exactly on the dual problem with a maximal-violating-pair
working-set strategy; at desk scale this is fast and fully deterministic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import TrainingError

MODEL_FORMAT_VERSION = 1
FEATURE_COUNT = 6


@dataclass
class TrainingConfig:
    seed: int = 0
    svm_c: float = 1.0
    rbf_gamma: float = 1.0 / FEATURE_COUNT
    lr_l2: float = 1e-4
    max_smo_passes: int = 200_000
    smo_tolerance: float = 1e-6


@dataclass
class LinearModel:
    """Weight-vector + bias model; raw score is w·x + b."""

    weights: np.ndarray
    bias: float

    def decision(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) @ self.weights + self.bias


@dataclass
class RbfSvmModel:
    """Kernelized SVM kept as support vectors with dual coefficients."""

    support_vectors: np.ndarray  # (m, n_features)
    dual_coef: np.ndarray  # (m,), alpha_i * y_i
    bias: float
    gamma: float

    def decision(self, features: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        d2 = (
            np.sum(x * x, axis=1)[:, None]
            + np.sum(self.support_vectors * self.support_vectors, axis=1)[None, :]
            - 2.0 * x @ self.support_vectors.T
        )
        k = np.exp(-self.gamma * np.maximum(d2, 0.0))
        return k @ self.dual_coef + self.bias


def _sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class Calibration:
    """Monotone logistic squash sigma(a*s + b) with a >= 0."""

    a: float
    b: float

    def apply(self, scores: np.ndarray) -> np.ndarray:
        return _sigmoid(self.a * np.asarray(scores, dtype=np.float64) + self.b)


@dataclass
class RankerEnsemble:
    linear_svm: LinearModel
    rbf_svm: RbfSvmModel
    logistic: LinearModel
    calibration: dict[str, Calibration] = field(default_factory=dict)
    feature_count: int = FEATURE_COUNT
    config: TrainingConfig = field(default_factory=TrainingConfig)

    def sub_scores(self, features: np.ndarray) -> dict[str, np.ndarray]:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        return {
            "linear_svm": self.calibration["linear_svm"].apply(self.linear_svm.decision(x)),
            "rbf_svm": self.calibration["rbf_svm"].apply(self.rbf_svm.decision(x)),
            "logistic": self.calibration["logistic"].apply(self.logistic.decision(x)),
        }

    def score(self, features: np.ndarray) -> np.ndarray:
        subs = self.sub_scores(features)
        return (subs["linear_svm"] + subs["rbf_svm"] + subs["logistic"]) / 3.0

    def score_one(self, features: Sequence[float]) -> float:
        return float(self.score(np.asarray(features, dtype=np.float64))[0])


def _smo_solve(
    kernel: np.ndarray,
    labels: np.ndarray,
    c: float,
    tol: float,
    max_passes: int,
) -> tuple[np.ndarray, float]:
    """Solve the C-SVM dual with maximal-violating-pair selection.

    minimize 1/2 a^T Q a - e^T a  s.t. 0 <= a <= C, y^T a = 0,
    with Q_ij = y_i y_j K_ij.  Returns (alpha, bias).
    """
    n = len(labels)
    y = labels.astype(np.float64)
    q = (y[:, None] * y[None, :]) * kernel
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the dual objective

    for _ in range(max_passes):
        # I_up: y=+1 & a<C, or y=-1 & a>0; I_low symmetric.
        up = ((y > 0) & (alpha < c - 1e-12)) | ((y < 0) & (alpha > 1e-12))
        low = ((y > 0) & (alpha > 1e-12)) | ((y < 0) & (alpha < c - 1e-12))
        if not up.any() or not low.any():
            break
        viol = -y * grad
        i = int(np.argmax(np.where(up, viol, -np.inf)))
        j = int(np.argmin(np.where(low, viol, np.inf)))
        if viol[i] - viol[j] < tol:
            break

        # analytic step t along the direction (alpha_i += y_i t,
        # alpha_j -= y_j t), which preserves y^T a = 0
        quad = q[i, i] + q[j, j] - 2.0 * y[i] * y[j] * q[i, j]
        quad = max(quad, 1e-12)
        t = (viol[i] - viol[j]) / quad
        t = min(t, c - alpha[i] if y[i] > 0 else alpha[i])
        t = min(t, alpha[j] if y[j] > 0 else c - alpha[j])
        if t <= 1e-15:
            break
        di = y[i] * t
        dj = -y[j] * t
        alpha[i] += di
        alpha[j] += dj
        grad += q[:, i] * di + q[:, j] * dj

    # bias from the midpoint of the active bounds (free vectors if any)
    up = ((y > 0) & (alpha < c - 1e-12)) | ((y < 0) & (alpha > 1e-12))
    low = ((y > 0) & (alpha > 1e-12)) | ((y < 0) & (alpha < c - 1e-12))
    viol = -y * grad
    free = (alpha > 1e-12) & (alpha < c - 1e-12)
    if free.any():
        bias = float(np.mean(viol[free]))
    else:
        hi = np.max(viol[up]) if up.any() else 0.0
        lo = np.min(viol[low]) if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    return alpha, bias


def _rbf_kernel(x: np.ndarray, gamma: float) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * x @ x.T
    return np.exp(-gamma * np.maximum(d2, 0.0))


def _fit_linear_svm(x: np.ndarray, y_pm: np.ndarray, cfg: TrainingConfig) -> LinearModel:
    kernel = x @ x.T
    alpha, bias = _smo_solve(kernel, y_pm, cfg.svm_c, cfg.smo_tolerance, cfg.max_smo_passes)
    weights = (alpha * y_pm) @ x
    return LinearModel(weights=weights, bias=bias)


def _fit_rbf_svm(x: np.ndarray, y_pm: np.ndarray, cfg: TrainingConfig) -> RbfSvmModel:
    kernel = _rbf_kernel(x, cfg.rbf_gamma)
    alpha, bias = _smo_solve(kernel, y_pm, cfg.svm_c, cfg.smo_tolerance, cfg.max_smo_passes)
    keep = alpha > 1e-10
    if not keep.any():
        # degenerate but possible on unseparable tiny data: keep everything
        keep = np.ones(len(alpha), dtype=bool)
    return RbfSvmModel(
        support_vectors=x[keep].copy(),
        dual_coef=(alpha * y_pm)[keep].copy(),
        bias=bias,
        gamma=cfg.rbf_gamma,
    )


def _fit_logistic(x: np.ndarray, y01: np.ndarray, cfg: TrainingConfig) -> LinearModel:
    """L2-regularized logistic regression by Newton iterations."""
    n, d = x.shape
    xb = np.hstack([x, np.ones((n, 1))])
    w = np.zeros(d + 1)
    for _ in range(100):
        p = _sigmoid(xb @ w)
        grad = xb.T @ (p - y01) / n + cfg.lr_l2 * w
        r = np.maximum(p * (1.0 - p), 1e-10)
        hess = (xb.T * r) @ xb / n + cfg.lr_l2 * np.eye(d + 1)
        step = np.linalg.solve(hess, grad)
        w -= step
        if float(np.linalg.norm(step)) < 1e-10:
            break
    return LinearModel(weights=w[:-1], bias=float(w[-1]))


def _fit_calibration(scores: np.ndarray, y01: np.ndarray) -> Calibration:
    """Platt-style logistic fit sigma(a*s + b), constrained to a >= 0.

    Uses the usual smoothed targets so perfectly separated scores do not
    drive the slope to infinity.
    """
    n_pos = float(np.sum(y01 == 1))
    n_neg = float(np.sum(y01 == 0))
    t = np.where(y01 == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    a, b = 1.0, 0.0
    for _ in range(200):
        p = _sigmoid(a * scores + b)
        ga = float(np.sum((p - t) * scores))
        gb = float(np.sum(p - t))
        r = np.maximum(p * (1.0 - p), 1e-10)
        haa = float(np.sum(r * scores * scores)) + 1e-10
        hab = float(np.sum(r * scores))
        hbb = float(np.sum(r)) + 1e-10
        det = haa * hbb - hab * hab
        if abs(det) < 1e-18:
            break
        da = (gb * hab - ga * hbb) / det
        db = (ga * hab - gb * haa) / det
        a, b = a + da, b + db
        if a < 0.0:
            a = 0.0
        if abs(da) + abs(db) < 1e-12:
            break
    return Calibration(a=max(a, 0.0), b=b)


def train_rankers(
    data: Sequence[tuple[Sequence[float], int]],
    config: TrainingConfig | None = None,
) -> RankerEnsemble:
    """Fit the three rankers plus calibrations on (features, label) rows."""
    cfg = config or TrainingConfig()
    if not data:
        raise TrainingError("no training data")
    x = np.asarray([row[0] for row in data], dtype=np.float64)
    y01 = np.asarray([row[1] for row in data], dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != FEATURE_COUNT:
        raise TrainingError(f"feature vectors must have length {FEATURE_COUNT}")
    if set(np.unique(y01)) != {0.0, 1.0}:
        raise TrainingError("training data must contain both labels")
    y_pm = np.where(y01 == 1, 1.0, -1.0)

    linear = _fit_linear_svm(x, y_pm, cfg)
    rbf = _fit_rbf_svm(x, y_pm, cfg)
    logistic = _fit_logistic(x, y01, cfg)
    calibration = {
        "linear_svm": _fit_calibration(linear.decision(x), y01),
        "rbf_svm": _fit_calibration(rbf.decision(x), y01),
        "logistic": _fit_calibration(logistic.decision(x), y01),
    }
    return RankerEnsemble(
        linear_svm=linear,
        rbf_svm=rbf,
        logistic=logistic,
        calibration=calibration,
        config=cfg,
    )


def save_ensemble(ensemble: RankerEnsemble, path) -> None:
    """Write the ensemble as a single self-describing JSON model file."""
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "model_type": "ranker_ensemble",
        "feature_count": ensemble.feature_count,
        "linear_svm": {
            "weights": [float(w) for w in ensemble.linear_svm.weights],
            "bias": float(ensemble.linear_svm.bias),
        },
        "rbf_svm": {
            "gamma": float(ensemble.rbf_svm.gamma),
            "support_vectors": [[float(v) for v in row] for row in ensemble.rbf_svm.support_vectors],
            "dual_coef": [float(v) for v in ensemble.rbf_svm.dual_coef],
            "bias": float(ensemble.rbf_svm.bias),
        },
        "logistic": {
            "weights": [float(w) for w in ensemble.logistic.weights],
            "bias": float(ensemble.logistic.bias),
        },
        "calibration": {
            name: {"a": float(cal.a), "b": float(cal.b)}
            for name, cal in sorted(ensemble.calibration.items())
        },
        "training": {
            "seed": ensemble.config.seed,
            "svm_c": ensemble.config.svm_c,
            "rbf_gamma": ensemble.config.rbf_gamma,
            "lr_l2": ensemble.config.lr_l2,
            "labeling": "multi-source-agreement+seed-list",
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, indent=1)
        fh.write("\n")


def load_ensemble(path) -> RankerEnsemble:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != MODEL_FORMAT_VERSION or doc.get("model_type") != "ranker_ensemble":
        raise TrainingError(f"unsupported ranker model file: {path}")
    cfg = TrainingConfig(
        seed=doc["training"]["seed"],
        svm_c=doc["training"]["svm_c"],
        rbf_gamma=doc["training"]["rbf_gamma"],
        lr_l2=doc["training"]["lr_l2"],
    )
    return RankerEnsemble(
        linear_svm=LinearModel(
            weights=np.asarray(doc["linear_svm"]["weights"], dtype=np.float64),
            bias=float(doc["linear_svm"]["bias"]),
        ),
        rbf_svm=RbfSvmModel(
            support_vectors=np.asarray(doc["rbf_svm"]["support_vectors"], dtype=np.float64).reshape(
                len(doc["rbf_svm"]["dual_coef"]), doc["feature_count"]
            ),
            dual_coef=np.asarray(doc["rbf_svm"]["dual_coef"], dtype=np.float64),
            bias=float(doc["rbf_svm"]["bias"]),
            gamma=float(doc["rbf_svm"]["gamma"]),
        ),
        logistic=LinearModel(
            weights=np.asarray(doc["logistic"]["weights"], dtype=np.float64),
            bias=float(doc["logistic"]["bias"]),
        ),
        calibration={
            name: Calibration(a=float(cal["a"]), b=float(cal["b"]))
            for name, cal in doc["calibration"].items()
        },
        feature_count=int(doc["feature_count"]),
        config=cfg,
    )


def auc_score(scores: np.ndarray, labels01: np.ndarray) -> float:
    """Area under the ROC curve via the rank statistic (ties averaged)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels01 = np.asarray(labels01)
    n_pos = int(np.sum(labels01 == 1))
    n_neg = int(np.sum(labels01 == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    pos_rank_sum = float(np.sum(ranks[labels01 == 1]))
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
