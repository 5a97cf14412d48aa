"""Tabular data container, CSV ingestion and covariance statistics."""

from __future__ import annotations

import csv
import enum
import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .exceptions import (
    DuplicateColumnName,
    FileUnreadable,
    NoUsableRows,
    NonNumericFeature,
    TooFewRows,
    UnknownFeature,
    WidthMismatch,
)

logger = logging.getLogger(__name__)

_MISSING = {"", "na", "nan", "null", "none", "?"}


class FeatureKind(str, enum.Enum):
    NUMERIC = "numeric"
    ENCODED_CATEGORICAL = "categorical"


@dataclass(frozen=True)
class DataMatrix:
    """An ``n x m`` finite real matrix with named, typed columns.

    Rows are observations. ``feature_kinds`` marks which columns take part in
    covariance-based correction (only ``NUMERIC`` ones do). ``dropped_rows``
    records how many input rows were discarded during ingestion.
    """

    values: np.ndarray
    feature_names: tuple
    feature_kinds: tuple = None
    dropped_rows: int = field(default=0, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise WidthMismatch(f"values must be 2-D, got shape {values.shape}")
        names = tuple(str(n) for n in self.feature_names)
        kinds = self.feature_kinds
        if kinds is None:
            kinds = (FeatureKind.NUMERIC,) * len(names)
        kinds = tuple(FeatureKind(k) for k in kinds)
        n, m = values.shape
        if len(names) != m or len(kinds) != m:
            raise WidthMismatch(
                f"{m} columns but {len(names)} names and {len(kinds)} kinds"
            )
        _check_unique(names)
        if m < 1:
            raise WidthMismatch("at least one feature is required")
        if n < 2:
            raise TooFewRows(f"need at least 2 rows, got {n}")
        if not np.all(np.isfinite(values)):
            raise ValueError("DataMatrix values must be finite")
        for j, kind in enumerate(kinds):
            if kind is FeatureKind.ENCODED_CATEGORICAL:
                col = values[:, j]
                if not np.all(col == np.round(col)):
                    raise ValueError(
                        f"categorical column {names[j]!r} must hold integer level codes"
                    )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "feature_kinds", kinds)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def numeric_mask(self) -> np.ndarray:
        return np.array([k is FeatureKind.NUMERIC for k in self.feature_kinds])

    def index(self, name) -> int:
        """Column index of ``name``; integers pass through after a range check."""
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < self.m:
                raise UnknownFeature(str(name), self.feature_names)
            return int(name)
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise UnknownFeature(name, self.feature_names) from None

    def column(self, name) -> np.ndarray:
        return self.values[:, self.index(name)]

    def select(self, names: Sequence) -> "DataMatrix":
        idx = [self.index(c) for c in names]
        return DataMatrix(
            self.values[:, idx],
            [self.feature_names[i] for i in idx],
            [self.feature_kinds[i] for i in idx],
        )

    def drop(self, names: Sequence) -> "DataMatrix":
        gone = {self.index(c) for c in names}
        return self.select([i for i in range(self.m) if i not in gone])

    def split_target(self, target) -> tuple["DataMatrix", np.ndarray]:
        """Return (predictor columns, target vector)."""
        return self.drop([target]), np.array(self.column(target))

    def with_column(self, name: str, values, kind=FeatureKind.NUMERIC) -> "DataMatrix":
        if name in self.feature_names:
            raise DuplicateColumnName(f"column {name!r} already exists")
        col = np.asarray(values, dtype=float).reshape(-1, 1)
        return DataMatrix(
            np.hstack([self.values, col]),
            self.feature_names + (name,),
            self.feature_kinds + (FeatureKind(kind),),
        )

    def fingerprint(self) -> str:
        """Content hash over names, kinds and values."""
        h = hashlib.sha256()
        h.update("\x1f".join(self.feature_names).encode())
        h.update("".join(k.value[0] for k in self.feature_kinds).encode())
        h.update(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.feature_names)
            for row in self.values:
                writer.writerow([repr(float(v)) for v in row])


def _check_unique(names):
    seen = set()
    for name in names:
        if name in seen:
            raise DuplicateColumnName(f"duplicate column name {name!r}")
        seen.add(name)


def _parse_float(cell: str):
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_csv(path, schema: Mapping[str, str] | None = None) -> DataMatrix:
    """Read a headered, comma-separated UTF-8 file into a :class:`DataMatrix`.

    Columns are numeric unless ``schema`` maps their name to ``"categorical"``.
    Categorical columns holding numbers are taken as already-encoded level
    codes; text labels are coded 0..L-1 in sorted label order. A column with
    no numeric cell at all that is not declared categorical is rejected. Rows
    with a missing or unparseable cell are dropped; the count is stored on
    ``DataMatrix.dropped_rows`` and logged.
    """
    schema = {k: FeatureKind(v) for k, v in (schema or {}).items()}
    try:
        with open(Path(path), newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise FileUnreadable(f"{path} is empty; a header row is required")

    header = [h.strip() for h in rows[0]]
    _check_unique(header)
    unknown = set(schema) - set(header)
    if unknown:
        raise UnknownFeature(sorted(unknown)[0], header)
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    m = len(header)
    kinds = [schema.get(h, FeatureKind.NUMERIC) for h in header]

    cells = [[c.strip() for c in r] for r in body]
    # Text-labelled categorical columns get a sorted level code table.
    codes = {}
    for j, name in enumerate(header):
        present = [r[j] for r in cells if len(r) == m and r[j].lower() not in _MISSING]
        parsed = [_parse_float(c) for c in present]
        if present and all(p is None for p in parsed):
            if kinds[j] is not FeatureKind.ENCODED_CATEGORICAL:
                raise NonNumericFeature(
                    f"column {name!r} is not numeric; pre-encode it or declare it categorical"
                )
            codes[j] = {label: float(i) for i, label in enumerate(sorted(set(present)))}

    out, dropped = [], 0
    for r in cells:
        if len(r) != m:
            dropped += 1
            continue
        row = []
        for j, c in enumerate(r):
            if c.lower() in _MISSING:
                row = None
                break
            v = codes[j].get(c) if j in codes else _parse_float(c)
            if v is None or (
                kinds[j] is FeatureKind.ENCODED_CATEGORICAL and v != round(v)
            ):
                row = None
                break
            row.append(v)
        if row is None:
            dropped += 1
        else:
            out.append(row)

    if not out:
        raise NoUsableRows(f"{path}: all {dropped} data rows were dropped")
    if dropped:
        logger.warning("%s: dropped %d row(s) with missing or unparseable cells", path, dropped)
    return DataMatrix(np.array(out, dtype=float), header, kinds, dropped_rows=dropped)


@dataclass(frozen=True)
class CovarianceCache:
    """Sample means and covariance (denominator ``n - 1``) of a DataMatrix.

    Rows and columns belonging to non-numeric features hold NaN so that any
    attempt to use them propagates loudly instead of reading as zero.
    """

    means: np.ndarray
    cov: np.ndarray
    numeric_mask: np.ndarray
    feature_names: tuple = ()

    @property
    def m(self) -> int:
        return len(self.means)

    def variance(self, j: int) -> float:
        return float(self.cov[j, j])

    def degenerate_threshold(self) -> float:
        """Variance below which a feature counts as constant."""
        diag = np.diag(self.cov)[self.numeric_mask]
        return 1e-12 * float(np.mean(diag)) if diag.size else 0.0


def compute_covariance(data: DataMatrix) -> CovarianceCache:
    """Two-pass sample covariance over the numeric columns of ``data``."""
    if data.n < 2:
        raise TooFewRows(f"need at least 2 rows, got {data.n}")
    mask = data.numeric_mask
    x = data.values
    means = x.mean(axis=0)
    xc = x[:, mask] - means[mask]
    c = xc.T @ xc / (data.n - 1)
    c = np.triu(c) + np.triu(c, 1).T

    cov = np.full((data.m, data.m), np.nan)
    idx = np.flatnonzero(mask)
    cov[np.ix_(idx, idx)] = c
    means = means.copy()
    for arr in (means, cov, mask):
        arr.setflags(write=False)
    return CovarianceCache(means, cov, mask, data.feature_names)


def inject_correlated_clone(data: DataMatrix, feature, noise_sd: float, seed) -> DataMatrix:
    """Append ``<name>_corr`` = column + N(0, noise_sd^2) noise.

    With ``noise_sd == 0`` the clone is an exact copy.
    """
    j = data.index(feature)
    if data.feature_kinds[j] is not FeatureKind.NUMERIC:
        raise NonNumericFeature(f"cannot clone categorical column {data.feature_names[j]!r}")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    source = data.values[:, j]
    if noise_sd == 0:
        clone = source.copy()
    else:
        rng = np.random.default_rng(seed)
        clone = source + rng.normal(0.0, noise_sd, size=data.n)
    return data.with_column(f"{data.feature_names[j]}_corr", clone)
