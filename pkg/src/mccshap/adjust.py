"""Multicollinearity adjustment factors.

For a coalition ``J = (t_1, ..., t_q)`` of numeric features and any other
numeric feature ``k``, the adjustment factor is the linear form

    AF_k(x) = a_1 * x[t_1] + ... + a_q * x[t_q]

whose coefficients make ``X_k + AF_k`` empirically uncorrelated with every
coalition member. Writing ``cov(X_t, X_k + AF_k) = 0`` for each ``t`` gives
the linear system ``G a = -c`` with ``G`` the coalition covariance (Gram)
matrix and ``c_t = cov(X_t, X_k)``. For ``q = 1`` this reduces to
``a = -cov(X_j, X_k) / var(X_j)``; for ``q = 2`` to

    a = -(cov(i,k) var(j) - cov(j,k) cov(i,j)) / D
    b = -(cov(j,k) var(i) - cov(i,k) cov(i,j)) / D,   D = var(i) var(j) - cov(i,j)^2

Note the leading minus signs: they are required for the orthogonality
conditions to hold.
"""

from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dataset import CovarianceCache, DataMatrix, FeatureKind, compute_covariance
from .exceptions import (
    DegenerateVariance,
    EmptyCoalition,
    InvalidCoalition,
    NonNumericFeature,
    NumericalError,
    SingularCoalition,
    WidthMismatch,
)
from .linalg import SingularSystem, gauss_solve

ORTHOGONALITY_TOL = 1e-8
PIVOT_REL_TOL = 1e-10


@dataclass(frozen=True)
class CoalitionSpec:
    """Ordered, duplicate-free tuple of feature indices treated as one player."""

    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise EmptyCoalition("a coalition needs at least one feature")
        if len(set(idx)) != len(idx):
            raise InvalidCoalition(f"coalition members must be distinct: {idx}")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def validate(self, m: int, kinds: Sequence | None = None, numeric: bool = False):
        for i in self.indices:
            if not 0 <= i < m:
                raise InvalidCoalition(f"feature index {i} outside [0, {m})")
            if numeric and kinds is not None and FeatureKind(kinds[i]) is not FeatureKind.NUMERIC:
                raise NonNumericFeature(
                    f"feature {i} is categorical; correction applies to numeric features only"
                )
        return self


def as_coalition(coalition) -> CoalitionSpec:
    if isinstance(coalition, CoalitionSpec):
        return coalition
    if isinstance(coalition, (int, np.integer)):
        return CoalitionSpec((coalition,))
    return CoalitionSpec(tuple(coalition))


def _check_member_variances(cache: CovarianceCache, members):
    floor = cache.degenerate_threshold()
    for t in members:
        if not cache.numeric_mask[t]:
            raise NonNumericFeature(f"feature {t} is not numeric")
        var = cache.variance(t)
        if not var > floor:
            name = cache.feature_names[t] if cache.feature_names else t
            raise DegenerateVariance(name, var)


def _solve(cache: CovarianceCache, coalition: CoalitionSpec, targets) -> np.ndarray:
    """Coefficient matrix of shape ``(len(targets), q)``."""
    members = list(coalition.indices)
    _check_member_variances(cache, members)
    targets = list(targets)
    for k in targets:
        if k in members:
            raise InvalidCoalition(f"feature {k} is a coalition member")
        if not cache.numeric_mask[k]:
            raise NonNumericFeature(f"feature {k} is not numeric")
    gram = cache.cov[np.ix_(members, members)]
    rhs = -cache.cov[np.ix_(members, targets)]
    try:
        coef, _ = gauss_solve(gram, rhs, rel_tol=PIVOT_REL_TOL)
    except SingularSystem as exc:
        raise SingularCoalition(members, exc.min_pivot, exc.threshold) from None
    return coef.T


def af_single(cache: CovarianceCache, j: int, k: int) -> float:
    """Coefficient ``a`` such that ``X_k + a X_j`` is uncorrelated with ``X_j``."""
    if j == k:
        raise InvalidCoalition("j and k must differ")
    return float(_solve(cache, CoalitionSpec((j,)), [k])[0, 0])


def af_pair(cache: CovarianceCache, i: int, j: int, k: int) -> tuple[float, float]:
    """Coefficients ``(a, b)`` making ``X_k + a X_i + b X_j`` uncorrelated with both."""
    a, b = _solve(cache, CoalitionSpec((i, j)), [k])[0]
    return float(a), float(b)


def af_coalition(cache: CovarianceCache, coalition, k: int) -> np.ndarray:
    """Length-``q`` coefficient vector for target feature ``k``."""
    return _solve(cache, as_coalition(coalition), [k])[0]


@dataclass(frozen=True)
class AdjustmentPlan:
    """Adjustment coefficients for every numeric feature outside a coalition.

    ``matrix[r]`` holds the coefficients of feature ``adjustable[r]``; columns
    follow ``coalition.indices``.
    """

    coalition: CoalitionSpec
    adjustable: np.ndarray
    matrix: np.ndarray
    skipped: tuple
    m: int
    feature_names: tuple = ()

    @property
    def coefficients(self) -> dict:
        return {int(k): self.matrix[r].copy() for r, k in enumerate(self.adjustable)}

    def is_zero(self) -> bool:
        return not np.any(self.matrix)

    @functools.cached_property
    def dense(self) -> np.ndarray:
        """``(q, m)`` coefficients with zero columns for coalition and skipped features."""
        out = np.zeros((len(self.coalition.indices), self.m))
        out[:, self.adjustable] = self.matrix.T
        return out

    def shift(self, coalition_values) -> np.ndarray:
        """Dense length-``m`` vector of ``AF_k`` evaluated at ``coalition_values``.

        Accepts a batch of shape ``(b, q)`` and returns ``(b, m)``.
        """
        return np.asarray(coalition_values, dtype=float) @ self.dense

    def to_csv(self) -> str:
        names = self.feature_names or tuple(str(i) for i in range(self.m))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["feature"] + [names[t] for t in self.coalition])
        for r, k in enumerate(self.adjustable):
            writer.writerow([names[k]] + [repr(float(a)) for a in self.matrix[r]])
        return buf.getvalue()


def orthogonality_residuals(plan: AdjustmentPlan, data: DataMatrix) -> np.ndarray:
    """Normalized ``|cov(X_t, X_k + AF_k)| / (sd_t sd_k)``, shape ``(K, q)``.

    ``AF_k`` is applied row-wise using each row's own coalition values.
    """
    x = data.values
    members = list(plan.coalition)
    ks = plan.adjustable
    if ks.size == 0:
        return np.zeros((0, len(members)))
    adjusted = x[:, ks] + x[:, members] @ plan.matrix.T
    xc = x[:, members] - x[:, members].mean(axis=0)
    ac = adjusted - adjusted.mean(axis=0)
    cov = ac.T @ xc / (data.n - 1)
    sd_t = x[:, members].std(axis=0, ddof=1)
    sd_k = x[:, ks].std(axis=0, ddof=1)
    scale = np.outer(sd_k, sd_t)
    with np.errstate(invalid="ignore", divide="ignore"):
        res = np.where(scale > 0, np.abs(cov) / scale, np.abs(cov))
    return res


def build_plan(cache: CovarianceCache, data: DataMatrix, coalition) -> AdjustmentPlan:
    """Compute the plan for ``coalition`` and verify it on ``data``."""
    coalition = as_coalition(coalition).validate(data.m, data.feature_kinds, numeric=True)
    if cache.m != data.m:
        raise WidthMismatch(f"cache has {cache.m} features, data has {data.m}")
    members = set(coalition)
    numeric = data.numeric_mask
    adjustable = np.array(
        [k for k in range(data.m) if k not in members and numeric[k]], dtype=int
    )
    skipped = tuple(k for k in range(data.m) if not numeric[k])
    if adjustable.size:
        matrix = _solve(cache, coalition, adjustable)
    else:
        _check_member_variances(cache, coalition)
        matrix = np.zeros((0, len(coalition)))
    if not np.all(np.isfinite(matrix)):
        raise NumericalError(f"non-finite adjustment coefficients for {list(coalition)}")
    adjustable.setflags(write=False)
    matrix.setflags(write=False)
    plan = AdjustmentPlan(coalition, adjustable, matrix, skipped, data.m, data.feature_names)

    worst = float(np.max(orthogonality_residuals(plan, data), initial=0.0))
    if worst > ORTHOGONALITY_TOL:
        raise NumericalError(
            f"adjusted features remain correlated with coalition {list(coalition)} "
            f"(normalized covariance {worst:.3g}); the coalition is ill-conditioned"
        )
    return plan


def apply_plan(plan: AdjustmentPlan, coalition_values, row) -> np.ndarray:
    """Copy of ``row`` with ``AF_k(coalition_values)`` added to each adjustable ``k``."""
    row = np.asarray(row, dtype=float)
    v = np.asarray(coalition_values, dtype=float)
    if row.shape[-1] != plan.m:
        raise WidthMismatch(f"row has width {row.shape[-1]}, plan expects {plan.m}")
    if v.shape[-1] != len(plan.coalition):
        raise WidthMismatch(
            f"got {v.shape[-1]} coalition values for a coalition of {len(plan.coalition)}"
        )
    out = row.copy()
    out[..., plan.adjustable] += v @ plan.matrix.T
    return out


class CoalitionDecorrelator(TransformerMixin, BaseEstimator):
    """Replace every numeric non-coalition column ``k`` by ``X_k + AF_k``.

    After ``fit(X)``, ``transform(X)`` yields columns that are uncorrelated
    with each coalition member on the fitted data. Coalition members and
    columns listed in ``categorical`` pass through unchanged.

    Parameters
    ----------
    coalition : sequence of int
        Column indices of the coalition.
    categorical : sequence of int, optional
        Columns excluded from adjustment.
    """

    def __init__(self, coalition=(0,), categorical=()):
        self.coalition = coalition
        self.categorical = categorical

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        kinds = [
            FeatureKind.ENCODED_CATEGORICAL if j in set(self.categorical) else FeatureKind.NUMERIC
            for j in range(X.shape[1])
        ]
        data = DataMatrix(X, [f"x{j}" for j in range(X.shape[1])], kinds)
        self.plan_ = build_plan(compute_covariance(data), data, self.coalition)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "plan_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise WidthMismatch(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return apply_plan(self.plan_, X[:, list(self.plan_.coalition)], X)
