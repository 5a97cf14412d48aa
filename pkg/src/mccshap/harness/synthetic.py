"""Synthetic Gaussian datasets with prescribed block correlations."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..dataset import DataMatrix
from ..exceptions import InfeasibleCorrelation


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for :func:`generate_synthetic`.

    ``blocks`` is a list of ``(features, corr)``. ``corr`` is either one
    value shared by every pair in the block or the block's pairwise values in
    ``itertools.combinations`` order. Features outside every block are
    independent. ``target`` is ``"linear"`` (``y = X @ weights``) or
    ``"step"`` (``y = sum_t weights[t] * sign(x_t)``), plus Gaussian noise
    with sd ``noise_sd``.

    With ``exact=True`` the sample is whitened before mixing, so the
    empirical correlation matrix equals the requested one to rounding.
    """

    n: int = 500
    n_features: int = 5
    blocks: Sequence = ()
    weights: Sequence | None = None
    target: str = "linear"
    noise_sd: float = 0.1
    seed: int = 0
    exact: bool = False
    means: Sequence | None = None
    target_name: str = "y"
    prefix: str = "x"
    names: Sequence | None = field(default=None)

    def __post_init__(self):
        if self.n < 50:
            raise ValueError("synthetic datasets need n >= 50")
        if self.target not in ("linear", "step"):
            raise ValueError(f"unknown target descriptor {self.target!r}")

    def feature_names(self) -> list[str]:
        if self.names is not None:
            return list(self.names)
        return [f"{self.prefix}{i}" for i in range(self.n_features)]

    def correlation_matrix(self) -> np.ndarray:
        p = self.n_features
        R = np.eye(p)
        for features, corr in self.blocks:
            features = list(features)
            pairs = list(itertools.combinations(features, 2))
            values = np.broadcast_to(np.asarray(corr, dtype=float), (len(pairs),))
            for (a, b), r in zip(pairs, values):
                if not -1 < r < 1:
                    raise InfeasibleCorrelation(f"correlation {r} outside (-1, 1)")
                R[a, b] = R[b, a] = r
        eig = np.linalg.eigvalsh(R)
        if eig[0] <= 1e-10:
            raise InfeasibleCorrelation(
                f"requested correlations are not positive definite (min eigenvalue {eig[0]:.3g})"
            )
        return R


def generate_synthetic(spec: SyntheticSpec) -> DataMatrix:
    """Draw features, then append the target as the last column."""
    R = spec.correlation_matrix()
    rng = np.random.default_rng(spec.seed)
    Z = rng.standard_normal((spec.n, spec.n_features))
    if spec.exact:
        Z = Z - Z.mean(axis=0)
        L = np.linalg.cholesky(Z.T @ Z / (spec.n - 1))
        Z = np.linalg.solve(L, Z.T).T
    X = Z @ np.linalg.cholesky(R).T
    if spec.means is not None:
        X = X + np.asarray(spec.means, dtype=float)

    w = np.ones(spec.n_features) if spec.weights is None else np.asarray(spec.weights, dtype=float)
    signal = X @ w if spec.target == "linear" else np.sign(X - (0 if spec.means is None else spec.means)) @ w
    y = signal + rng.normal(0.0, spec.noise_sd, size=spec.n) if spec.noise_sd > 0 else signal
    return DataMatrix(np.column_stack([X, y]), spec.feature_names() + [spec.target_name])
