"""Monte-Carlo Shapley estimation with and without multicollinearity correction.

Each iteration draws a donor row from the background data and a random
ordering of the players (single features, or a coalition treated as one
block). Players ordered before the target take the instance's values, the
rest take the donor's. The marginal contribution is the model output with
the target set to the instance's values minus the output with the target
set to the donor's values.

In the corrected mode (``"mcc"``) every numeric non-target feature ``k`` is
carried as its decorrelated value ``X_k + AF_k`` (computed on the row that
supplied it) and then mapped back to input space using the target values
held by each of the two vectors. Concretely, with
``delta_k = AF_k(instance target values) - AF_k(donor target values)``:

* instance-sourced ``k`` keeps its instance value in ``x_plus`` and gets
  ``+ delta_k`` in ``x_minus``;
* donor-sourced ``k`` keeps its donor value in ``x_minus`` and gets
  ``- delta_k`` in ``x_plus``.

The part of ``k`` that is linearly explained by the target therefore moves
together with the target, and only the decorrelated remainder is held
fixed. When all adjustment coefficients are zero both modes coincide
exactly.
"""

from __future__ import annotations

import csv
import enum
import functools
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import streams
from .adjust import AdjustmentPlan, CoalitionSpec, as_coalition, build_plan
from .dataset import CovarianceCache, DataMatrix, FeatureKind, compute_covariance
from .exceptions import DataError, MCCShapError, NonNumericFeature, TooManyFeatures, WidthMismatch
from .models import as_predictor


class Mode(str, enum.Enum):
    MCC = "mcc"
    NMCC = "nmcc"


@dataclass(frozen=True, eq=False)
class EstimatorConfig:
    """Iterations, seed, mode and background data for one estimation run."""

    background: DataMatrix
    iterations: int = 10_000
    seed: int = 42
    mode: Mode = Mode.MCC
    workers: int = 1

    def __post_init__(self):
        if int(self.iterations) < 1:
            raise ValueError("iterations must be >= 1")
        object.__setattr__(self, "mode", Mode(self.mode))

    @functools.cached_property
    def covariance(self) -> CovarianceCache:
        return compute_covariance(self.background)

    @functools.cached_property
    def _plans(self) -> dict:
        return {}

    def plan(self, coalition: CoalitionSpec) -> AdjustmentPlan:
        """Adjustment plan for ``coalition`` on the background data (memoized)."""
        if coalition not in self._plans:
            self._plans[coalition] = build_plan(self.covariance, self.background, coalition)
        return self._plans[coalition]

    def replace(self, **changes) -> "EstimatorConfig":
        fields = dict(background=self.background, iterations=self.iterations,
                      seed=self.seed, mode=self.mode, workers=self.workers)
        fields.update(changes)
        return EstimatorConfig(**fields)


@dataclass(frozen=True)
class ShapleyEstimate:
    """Mean marginal contribution and its Monte-Carlo standard error.

    ``std_error`` is the within-run sample standard deviation of the
    per-iteration marginals divided by ``sqrt(M)``. ``error`` is set (and
    ``value`` is NaN) only for entries of :func:`estimate_all` that failed.
    """

    value: float
    std_error: float
    iterations: int
    target: tuple
    mode: Mode
    seed: int = 0
    error: str | None = field(default=None, compare=False)

    @property
    def is_coalition(self) -> bool:
        return len(self.target) > 1

    def target_label(self, names=None) -> str:
        if names is None:
            return "+".join(str(t) for t in self.target)
        return "+".join(names[t] for t in self.target)


def _check_instance(instance, m):
    x = np.asarray(instance, dtype=float).reshape(-1)
    if x.shape[0] != m:
        raise WidthMismatch(f"instance has {x.shape[0]} values, background has {m} features")
    if not np.all(np.isfinite(x)):
        raise DataError("instance values must be finite")
    return x


def _marginals_block(f, background, x, members, plan, rng, size):
    n, m = background.shape
    donors = background[rng.integers(0, n, size=size)]
    keys = rng.random((size, m))
    before = keys < keys[:, members[0]][:, None]

    if plan is None:
        x_plus = np.where(before, x, donors)
        x_minus = x_plus.copy()
    else:
        # AF is linear, so one shift of the coalition difference gives delta
        delta = plan.shift(x[members] - donors[:, members])
        shifted = delta + x
        x_minus = np.where(before, shifted, donors)
        np.subtract(donors, delta, out=shifted)
        x_plus = np.where(before, x, shifted)
    x_plus[:, members] = x[members]
    x_minus[:, members] = donors[:, members]

    out = f(np.vstack([x_plus, x_minus]))
    return out[:size] - out[size:]


def _run(f, config: EstimatorConfig, instance, coalition: CoalitionSpec) -> ShapleyEstimate:
    f = as_predictor(f)
    bg = config.background
    x = _check_instance(instance, bg.m)
    coalition.validate(bg.m)
    members = np.array(coalition.indices)

    plan = None
    if config.mode is Mode.MCC:
        for t in coalition:
            if bg.feature_kinds[t] is not FeatureKind.NUMERIC:
                raise NonNumericFeature(
                    f"feature {bg.feature_names[t]!r} is categorical; "
                    "use mode 'nmcc' for categorical features"
                )
        plan = config.plan(coalition)
        if plan.is_zero():
            plan = None

    tag = streams.target_tag(coalition.indices)
    values = bg.values
    M = int(config.iterations)
    marginals = np.empty(M)

    def work(block):
        b, start, size = block
        rng = streams.block_generator(config.seed, tag, b)
        marginals[start:start + size] = _marginals_block(f, values, x, members, plan, rng, size)

    todo = list(streams.blocks(M))
    if config.workers > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(work, todo))
    else:
        for block in todo:
            work(block)

    value = float(np.mean(marginals))
    se = float(np.std(marginals, ddof=1) / math.sqrt(M)) if M > 1 else 0.0
    return ShapleyEstimate(value, se, M, coalition.indices, config.mode, int(config.seed))


def estimate_single(f, config: EstimatorConfig, instance, j) -> ShapleyEstimate:
    """Shapley value of feature ``j`` (index or name) at ``instance``."""
    return _run(f, config, instance, CoalitionSpec((config.background.index(j),)))


def estimate_coalition(f, config: EstimatorConfig, instance, coalition) -> ShapleyEstimate:
    """Joint Shapley value of a feature coalition treated as a single player.

    The non-coalition features plus one slot for the block are randomly
    ordered; with one member this is identical to :func:`estimate_single`.
    """
    bg = config.background
    if isinstance(coalition, CoalitionSpec):
        spec = coalition
    else:
        spec = as_coalition([bg.index(c) for c in coalition])
    return _run(f, config, instance, spec)


def estimate_all(f, config: EstimatorConfig, instance) -> list[ShapleyEstimate]:
    """One estimate per feature; failures are reported in ``error`` rather than raised."""
    out = []
    for j in range(config.background.m):
        try:
            out.append(estimate_single(f, config, instance, j))
        except MCCShapError as exc:
            out.append(ShapleyEstimate(
                math.nan, math.nan, int(config.iterations), (j,), config.mode,
                int(config.seed), error=f"{type(exc).__name__}: {exc}",
            ))
    return out


def exact_shapley(f, background: DataMatrix, instance, j, max_features=12, max_rows=64) -> float:
    """Shapley value by full subset enumeration (interventional value function).

    ``v(S)`` is the mean model output over background rows with the
    instance's values substituted on ``S``.
    """
    f = as_predictor(f)
    m = background.m
    if m > max_features:
        raise TooManyFeatures(f"exact enumeration supports at most {max_features} features, got {m}")
    if background.n > max_rows:
        raise DataError(f"exact enumeration uses at most {max_rows} background rows, got {background.n}")
    j = background.index(j)
    x = _check_instance(instance, m)
    bg = background.values

    masks = ((np.arange(2**m)[:, None] >> np.arange(m)) & 1).astype(bool)
    rows = np.where(masks[:, None, :], x, bg[None, :, :]).reshape(-1, m)
    v = f(rows).reshape(2**m, background.n).mean(axis=1)

    bit = 1 << j
    terms = []
    for s in range(2**m):
        if s & bit:
            continue
        size = bin(s).count("1")
        weight = math.factorial(size) * math.factorial(m - size - 1) / math.factorial(m)
        terms.append(weight * (v[s | bit] - v[s]))
    return math.fsum(terms)


# ---------------------------------------------------------------- output

CSV_COLUMNS = ("instance", "target", "mode", "value", "std_error", "M", "seed")


def estimates_to_csv(estimates, names, instance_id=0) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for est in estimates:
        writer.writerow([
            instance_id, est.target_label(names), est.mode.value,
            repr(est.value), repr(est.std_error), est.iterations, est.seed,
        ])
    return buf.getvalue()


# ---------------------------------------------------------------- estimator API

class MCCShapleyExplainer(BaseEstimator):
    """Scikit-learn style wrapper around the Monte-Carlo estimators.

    ``fit`` stores the background data (and, in corrected mode, its
    covariance); ``transform`` returns one row of per-feature attributions
    for each input row.

    Parameters
    ----------
    model : fitted estimator or PredictorHandle
        Anything :func:`mccshap.models.as_predictor` accepts.
    n_iterations : int
        Monte-Carlo iterations per estimate.
    mode : {"mcc", "nmcc"}
    random_state : int
    n_workers : int
        Threads used per estimate; results do not depend on it.

    Examples
    --------
    >>> explainer = MCCShapleyExplainer(model, n_iterations=2000).fit(X_background)
    >>> phi = explainer.transform(X[:5])
    >>> joint = explainer.explain_group(X[0], [0, 1])
    """

    def __init__(self, model=None, n_iterations=10_000, mode="mcc", random_state=42, n_workers=1):
        self.model = model
        self.n_iterations = n_iterations
        self.mode = mode
        self.random_state = random_state
        self.n_workers = n_workers

    def fit(self, X, y=None, feature_names=None, categorical=()):
        if isinstance(X, DataMatrix):
            data = X
        else:
            X = check_array(X, dtype=float)
            names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(X.shape[1])]
            cat = set(categorical)
            kinds = [
                FeatureKind.ENCODED_CATEGORICAL if (j in cat or names[j] in cat) else FeatureKind.NUMERIC
                for j in range(X.shape[1])
            ]
            data = DataMatrix(X, names, kinds)
        self.config_ = EstimatorConfig(
            data, self.n_iterations, self.random_state, Mode(self.mode), self.n_workers
        )
        self.predictor_ = as_predictor(self.model)
        self.n_features_in_ = data.m
        self.feature_names_in_ = np.array(data.feature_names, dtype=object)
        return self

    def explain(self, x, feature) -> ShapleyEstimate:
        check_is_fitted(self, "config_")
        return estimate_single(self.predictor_, self.config_, x, feature)

    def explain_group(self, x, features) -> ShapleyEstimate:
        check_is_fitted(self, "config_")
        return estimate_coalition(self.predictor_, self.config_, x, features)

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = check_array(X, dtype=float)
        return np.array([
            [e.value for e in estimate_all(self.predictor_, self.config_, row)] for row in X
        ])
