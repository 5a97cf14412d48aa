"""Lightweight predictors with a scikit-learn compatible interface.

Every estimator here follows the usual ``fit``/``predict``/``get_params``
contract so it can be cloned, put in a Pipeline, or swapped for any other
scikit-learn regressor. The explainer only needs a :class:`PredictorHandle`,
a deterministic batch prediction function; :func:`as_predictor` builds one
from any fitted estimator.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dataset import DataMatrix
from .exceptions import DataError, KTooLarge, NonBinaryTarget, SingularDesign
from .linalg import SingularSystem, gauss_solve


class OutputKind(str, enum.Enum):
    REGRESSION_SCORE = "regression_score"
    CLASSIFICATION_LOGIT = "classification_logit"


@dataclass(frozen=True)
class PredictorHandle:
    """A pure batch prediction function ``(b, m) -> (b,)``."""

    predict_batch: Callable[[np.ndarray], np.ndarray]
    output_kind: OutputKind = OutputKind.REGRESSION_SCORE
    descriptor: str = "callable"
    n_features: int | None = field(default=None, compare=False)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.asarray(self.predict_batch(X), dtype=float).reshape(-1)


def as_predictor(model) -> PredictorHandle:
    """Wrap a fitted estimator (or plain callable) as a PredictorHandle.

    Classifiers exposing ``decision_function`` are explained on the logit
    scale; everything else through ``predict``.
    """
    if isinstance(model, PredictorHandle):
        return model
    n_features = getattr(model, "n_features_in_", None)
    if hasattr(model, "decision_function") and getattr(model, "_estimator_type", None) == "classifier":
        return PredictorHandle(
            model.decision_function, OutputKind.CLASSIFICATION_LOGIT, repr(model), n_features
        )
    if hasattr(model, "predict"):
        return PredictorHandle(model.predict, OutputKind.REGRESSION_SCORE, repr(model), n_features)
    if callable(model):
        return PredictorHandle(model, OutputKind.REGRESSION_SCORE, getattr(model, "__name__", "callable"))
    raise TypeError(f"cannot build a predictor from {type(model).__name__}")


def _rowdot(X, w):
    # Row-wise reduction keeps batch and single-row predictions bitwise equal.
    return (X * w).sum(axis=1)


class LinearRegressor(RegressorMixin, BaseEstimator):
    """Least squares via the normal equations, with an optional ridge term.

    The intercept is not penalized: slopes solve
    ``(Xc'Xc + ridge_eps I) w = Xc'yc`` on centered data.
    """

    def __init__(self, ridge_eps=0.0):
        self.ridge_eps = ridge_eps

    def fit(self, X, y):
        if self.ridge_eps < 0:
            raise ValueError("ridge_eps must be >= 0")
        X, y = check_X_y(X, y, dtype=float)
        x_mean, y_mean = X.mean(axis=0), y.mean()
        Xc, yc = X - x_mean, y - y_mean
        gram = Xc.T @ Xc + self.ridge_eps * np.eye(X.shape[1])
        try:
            # Relative pivot test; rank-deficient designs leave a pivot near
            # roundoff of the largest diagonal.
            self.coef_, _ = gauss_solve(gram, Xc.T @ yc, rel_tol=1e-12)
        except SingularSystem as exc:
            raise SingularDesign(
                f"normal equations are singular (pivot {exc.min_pivot:.3g}); "
                "remove collinear columns or set ridge_eps > 0"
            ) from None
        self.intercept_ = float(y_mean - x_mean @ self.coef_)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        return _rowdot(X, self.coef_) + self.intercept_


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_loss(y, z):
    # log(1 + e^z) - y z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


class LogisticClassifier(ClassifierMixin, BaseEstimator):
    """Binary logistic regression trained by full-batch gradient descent.

    ``decision_function`` returns the logit, which is what gets explained.
    ``loss_history_`` holds the training log-loss before each epoch and after
    the last one.
    """

    def __init__(self, lr=0.1, epochs=500):
        self.lr = lr
        self.epochs = epochs

    def fit(self, X, y):
        if self.lr <= 0 or self.epochs < 1:
            raise ValueError("lr must be > 0 and epochs >= 1")
        X, y = check_X_y(X, y, dtype=float)
        levels = set(np.unique(y).tolist())
        if not levels <= {0.0, 1.0}:
            raise NonBinaryTarget(f"target must be 0/1, found levels {sorted(levels)}")
        n, m = X.shape
        w, b = np.zeros(m), 0.0
        history = []
        for _ in range(int(self.epochs)):
            z = X @ w + b
            history.append(_log_loss(y, z))
            resid = _sigmoid(z) - y
            w = w - self.lr * (X.T @ resid) / n
            b = b - self.lr * float(resid.mean())
        history.append(_log_loss(y, X @ w + b))
        self.coef_, self.intercept_ = w, b
        self.loss_history_ = np.array(history)
        self.classes_ = np.array([0.0, 1.0])
        self.n_features_in_ = m
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        return _rowdot(X, self.coef_) + self.intercept_

    def predict_proba(self, X):
        p = _sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(float)


class CARTRegressor(RegressorMixin, BaseEstimator):
    """Greedy regression tree minimizing within-node squared error.

    Thresholds sit midway between consecutive distinct values. Features are
    scanned in a fresh random order at every node and only a strictly better
    gain replaces the incumbent, so exact ties (e.g. duplicated columns) are
    broken at random, reproducibly for a given ``random_state``.
    """

    def __init__(self, max_depth=6, min_samples_leaf=1, random_state=0):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state

    def fit(self, X, y):
        if self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("max_depth and min_samples_leaf must be >= 1")
        X, y = check_X_y(X, y, dtype=float)
        self._feature, self._threshold = [], []
        self._left, self._right, self._value = [], [], []
        self._rng = np.random.default_rng(self.random_state)
        self._grow(X, y, np.arange(len(y)), 0)
        self.feature_ = np.array(self._feature, dtype=int)
        self.threshold_ = np.array(self._threshold, dtype=float)
        self.left_ = np.array(self._left, dtype=int)
        self.right_ = np.array(self._right, dtype=int)
        self.value_ = np.array(self._value, dtype=float)
        for name in ("_feature", "_threshold", "_left", "_right", "_value", "_rng"):
            delattr(self, name)
        self.n_features_in_ = X.shape[1]
        return self

    def _new_node(self, value):
        self._feature.append(-1)
        self._threshold.append(0.0)
        self._left.append(-1)
        self._right.append(-1)
        self._value.append(value)
        return len(self._value) - 1

    def _grow(self, X, y, rows, depth):
        yr = y[rows]
        node = self._new_node(float(yr.mean()))
        if depth >= self.max_depth or len(rows) < 2 * self.min_samples_leaf:
            return node
        split = self._best_split(X[rows], yr)
        if split is None:
            return node
        j, thr = split
        go_left = X[rows, j] <= thr
        self._feature[node] = j
        self._threshold[node] = thr
        self._left[node] = self._grow(X, y, rows[go_left], depth + 1)
        self._right[node] = self._grow(X, y, rows[~go_left], depth + 1)
        return node

    def _best_split(self, X, y):
        n = len(y)
        leaf = self.min_samples_leaf
        total = y.sum()
        # Parent SSE is constant, so maximizing sum^2/count over children suffices.
        parent = total * total / n
        best_gain, best = 1e-12 * max(1.0, float(np.sum((y - y.mean()) ** 2))), None
        sizes = np.arange(1, n)
        for j in self._rng.permutation(X.shape[1]):
            order = np.argsort(X[:, j], kind="stable")
            xs, ys = X[order, j], y[order]
            csum = np.cumsum(ys)[:-1]
            score = csum**2 / sizes + (total - csum) ** 2 / (n - sizes)
            valid = (xs[1:] > xs[:-1]) & (sizes >= leaf) & (n - sizes >= leaf)
            if not valid.any():
                continue
            score = np.where(valid, score - parent, -np.inf)
            pos = int(np.argmax(score))
            if score[pos] > best_gain:
                best_gain = score[pos]
                best = (int(j), 0.5 * (xs[pos] + xs[pos + 1]))
        return best

    def predict(self, X):
        check_is_fitted(self, "value_")
        X = check_array(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature_[node]
            internal = feat >= 0
            if not internal.any():
                break
            r, nd = rows[internal], node[internal]
            go_left = X[r, feat[internal]] <= self.threshold_[nd]
            node[internal] = np.where(go_left, self.left_[nd], self.right_[nd])
        return self.value_[node]


class ForestRegressor(RegressorMixin, BaseEstimator):
    """Bagged CART trees; the prediction is the mean over trees.

    Each tree's bag comes from its own child of ``SeedSequence(random_state)``,
    so fitting is reproducible for any ``n_jobs``.
    """

    def __init__(self, n_trees=50, bag_fraction=1.0, bootstrap=True, random_state=0,
                 max_depth=6, min_samples_leaf=1, n_jobs=1):
        self.n_trees = n_trees
        self.bag_fraction = bag_fraction
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.n_jobs = n_jobs

    def fit(self, X, y):
        if self.n_trees < 1 or not 0 < self.bag_fraction <= 1:
            raise ValueError("n_trees must be >= 1 and bag_fraction in (0, 1]")
        X, y = check_X_y(X, y, dtype=float)
        n = len(y)
        size = max(1, int(round(self.bag_fraction * n)))
        children = np.random.SeedSequence(self.random_state).spawn(self.n_trees)

        def fit_one(ss):
            rng = np.random.default_rng(ss)
            bag = np.sort(rng.choice(n, size=size, replace=self.bootstrap))
            tree = CARTRegressor(self.max_depth, self.min_samples_leaf, random_state=rng.integers(2**63))
            return tree.fit(X[bag], y[bag])

        if self.n_jobs == 1:
            self.estimators_ = [fit_one(ss) for ss in children]
        else:
            with ThreadPoolExecutor(max_workers=self.n_jobs) as pool:
                self.estimators_ = list(pool.map(fit_one, children))
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "estimators_")
        X = check_array(X, dtype=float)
        preds = np.stack([t.predict(X) for t in self.estimators_])
        return preds.mean(axis=0)


class KNNRegressor(RegressorMixin, BaseEstimator):
    """Mean target of the ``k`` nearest training rows.

    Distances are Euclidean on z-scored features (training means and sample
    standard deviations; constant columns keep unit scale).
    """

    _chunk = 512

    def __init__(self, k=5):
        self.k = k

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.k > len(y):
            raise KTooLarge(f"k={self.k} exceeds the {len(y)} training rows")
        self.mean_ = X.mean(axis=0)
        sd = X.std(axis=0, ddof=1)
        self.scale_ = np.where(sd > 0, sd, 1.0)
        self.train_ = (X - self.mean_) / self.scale_
        self.y_ = y
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "train_")
        Z = (check_array(X, dtype=float) - self.mean_) / self.scale_
        k, n = self.k, len(self.y_)
        out = np.empty(Z.shape[0])
        for start in range(0, Z.shape[0], self._chunk):
            z = Z[start:start + self._chunk]
            d = ((z[:, None, :] - self.train_[None, :, :]) ** 2).sum(axis=2)
            if k < n:
                idx = np.argpartition(d, k - 1, axis=1)[:, :k]
            else:
                idx = np.broadcast_to(np.arange(n), d.shape)
            out[start:start + len(z)] = np.sort(self.y_[idx], axis=1).mean(axis=1)
        return out


# ---------------------------------------------------------------- model specs

FAMILIES = {
    "linear": (LinearRegressor, {"ridge_eps": float}),
    "logistic": (LogisticClassifier, {"lr": float, "epochs": int}),
    "tree": (CARTRegressor, {"max_depth": int, "min_samples_leaf": int, "seed": int, "random_state": int}),
    "forest": (ForestRegressor, {
        "n_trees": int, "bag_fraction": float, "bootstrap": lambda s: str(s).lower() in ("1", "true", "yes"),
        "seed": int, "random_state": int, "max_depth": int, "min_samples_leaf": int, "n_jobs": int,
    }),
    "knn": (KNNRegressor, {"k": int}),
}


@dataclass(frozen=True)
class ModelSpec:
    family: str
    params: tuple = ()

    def __post_init__(self):
        family = self.family.lower()
        if family not in FAMILIES:
            raise DataError(f"unknown model family {self.family!r}; choose from {', '.join(FAMILIES)}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", tuple(sorted(dict(self.params).items())))

    @classmethod
    def parse(cls, family: str, options=()) -> "ModelSpec":
        """Build from CLI-style ``key=value`` strings, e.g. ``family=forest n_trees=100``."""
        family_opts = {}
        converters = None
        for opt in options:
            if "=" not in opt:
                raise DataError(f"model option {opt!r} is not of the form KEY=VALUE")
            key, value = (s.strip() for s in opt.split("=", 1))
            if key == "family":
                family = value
                continue
            family_opts[key] = value
        spec = cls(family)
        converters = FAMILIES[spec.family][1]
        params = {}
        for key, value in family_opts.items():
            if key not in converters:
                raise DataError(
                    f"unknown option {key!r} for {spec.family}; valid: {', '.join(converters)}"
                )
            try:
                params[key] = converters[key](value)
            except ValueError:
                raise DataError(f"bad value {value!r} for {key}") from None
        return cls(spec.family, tuple(params.items()))

    def build(self):
        est_cls, _ = FAMILIES[self.family]
        params = dict(self.params)
        if "seed" in params:
            params["random_state"] = params.pop("seed")
        try:
            return est_cls(**params)
        except TypeError as exc:
            raise DataError(str(exc)) from None

    def with_seed(self, seed: int) -> "ModelSpec":
        """Same spec with the fitting seed replaced (no-op for deterministic families)."""
        if self.family not in ("forest", "tree"):
            return self
        params = {k: v for k, v in self.params if k not in ("seed", "random_state")}
        params["random_state"] = int(seed)
        return ModelSpec(self.family, tuple(params.items()))

    def describe(self) -> str:
        opts = " ".join(f"{k}={v}" for k, v in self.params)
        return f"{self.family} {opts}".strip()


def fit_model(spec: ModelSpec, data: DataMatrix, target) -> PredictorHandle:
    """Fit ``spec`` on ``data`` predicting column ``target`` from all others."""
    X, y = data.split_target(target)
    est = spec.build()
    try:
        est.fit(X.values, y)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    handle = as_predictor(est)
    return PredictorHandle(handle.predict_batch, handle.output_kind, spec.describe(), X.m)


def fit_linear(data: DataMatrix, target, ridge_eps=0.0) -> PredictorHandle:
    return fit_model(ModelSpec("linear", (("ridge_eps", ridge_eps),)), data, target)


def fit_logistic(data: DataMatrix, target, lr=0.1, epochs=500) -> PredictorHandle:
    return fit_model(ModelSpec("logistic", (("lr", lr), ("epochs", epochs))), data, target)


def fit_tree(data: DataMatrix, target, max_depth=6, min_samples_leaf=1) -> PredictorHandle:
    spec = ModelSpec("tree", (("max_depth", max_depth), ("min_samples_leaf", min_samples_leaf)))
    return fit_model(spec, data, target)


def fit_forest(data: DataMatrix, target, n_trees=50, bag_fraction=1.0, seed=0,
               max_depth=6, min_samples_leaf=1) -> PredictorHandle:
    spec = ModelSpec("forest", (
        ("n_trees", n_trees), ("bag_fraction", bag_fraction), ("random_state", seed),
        ("max_depth", max_depth), ("min_samples_leaf", min_samples_leaf),
    ))
    return fit_model(spec, data, target)


def fit_knn(data: DataMatrix, target, k=5) -> PredictorHandle:
    return fit_model(ModelSpec("knn", (("k", k),)), data, target)
