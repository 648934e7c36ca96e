"""Dataset container, CSV ingestion, centering and interaction expansion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "Dataset",
    "CenteringRecord",
    "load_csv",
    "expand_interactions",
    "center",
    "scale_columns",
]

_CENTER_TOL = 1e-10


def _frozen(a: np.ndarray, order: str = "C") -> np.ndarray:
    out = np.array(a, dtype=np.float64, order=order, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response vector plus design matrix.

    ``X`` is stored column-major because every solver in the package walks
    the design one column at a time.
    """

    y: np.ndarray
    X: np.ndarray
    column_names: tuple[str, ...]
    centered: bool = False

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        X = np.asarray(self.X, dtype=np.float64)
        if y.ndim != 1:
            raise DataError("response must be one-dimensional")
        if X.ndim != 2:
            raise DataError("design must be a two-dimensional matrix")
        n, p = X.shape
        if y.shape[0] != n:
            raise DataError(f"response has {y.shape[0]} rows but design has {n}")
        if n < 2 or p < 1:
            raise DataError(f"need at least 2 rows and 1 covariate, got n={n}, p={p}")
        names = tuple(str(c) for c in self.column_names)
        if len(names) != p:
            raise DataError(f"{len(names)} column names for {p} columns")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        zero = np.flatnonzero(~np.any(X != 0.0, axis=0))
        if zero.size:
            raise DataError(f"column {names[zero[0]]!r} is identically zero")
        if self.centered:
            scale = np.maximum(np.abs(X).max(axis=0), 1.0)
            if np.any(np.abs(X.mean(axis=0)) > _CENTER_TOL * scale):
                raise DataError("dataset flagged centered but a column mean is nonzero")
            if abs(y.mean()) > _CENTER_TOL * max(np.abs(y).max(), 1.0):
                raise DataError("dataset flagged centered but the response mean is nonzero")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "X", _frozen(X, order="F"))
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def column_index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise DataError(f"no column named {name!r}") from None


@dataclass(frozen=True, eq=False)
class CenteringRecord:
    """Means removed by :func:`center`; ``restore`` undoes the shift."""

    y_mean: float
    x_means: np.ndarray

    def restore(self, d: Dataset) -> Dataset:
        if not d.centered:
            raise ValueError("restore expects a centered dataset")
        return Dataset(
            y=d.y + self.y_mean,
            X=d.X + self.x_means[None, :],
            column_names=d.column_names,
            centered=False,
        )

    def intercept(self, beta: np.ndarray) -> float:
        """Intercept on the original scale implied by coefficients ``beta``."""
        return float(self.y_mean - self.x_means @ beta)


def load_csv(path: str | Path, response: str, covariates: Sequence[str]) -> Dataset:
    """Read ``response`` and ``covariates`` (in that order) from a header CSV.

    Raises
    ------
    DataError
        Missing column, unparseable or non-finite cell (with its location),
        or a constant covariate column.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    covariates = list(covariates)
    if not covariates:
        raise ValueError("at least one covariate is required")
    wanted = [response, *covariates]
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        missing = [c for c in wanted if c not in header]
        if missing:
            raise DataError(f"column(s) not found in {path.name}: {', '.join(missing)}")
        pos = [header.index(c) for c in wanted]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            vals = []
            for name, k in zip(wanted, pos):
                cell = row[k].strip() if k < len(row) else ""
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path.name}: line {lineno}, column {name!r}: cannot parse {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(
                        f"{path.name}: line {lineno}, column {name!r}: non-finite value {cell!r}"
                    )
                vals.append(v)
            rows.append(vals)
    if len(rows) < 2:
        raise DataError(f"{path.name} has fewer than 2 data rows")
    data = np.asarray(rows)
    X = data[:, 1:]
    constant = [c for c, col in zip(covariates, X.T) if np.all(col == col[0])]
    if constant:
        raise DataError(f"constant covariate column(s): {', '.join(constant)}")
    return Dataset(y=data[:, 0], X=X, column_names=tuple(covariates), centered=False)


def expand_interactions(d: Dataset) -> Dataset:
    """Append all pairwise products ``X_j * X_k`` (j < k) after the originals."""
    if d.centered:
        raise ValueError("expand interactions before centering")
    pairs = list(combinations(range(d.p), 2))
    X = np.empty((d.n, d.p + len(pairs)), order="F")
    X[:, : d.p] = d.X
    names = list(d.column_names)
    for m, (j, k) in enumerate(pairs, start=d.p):
        X[:, m] = d.X[:, j] * d.X[:, k]
        names.append(f"{d.column_names[j]}:{d.column_names[k]}")
    return Dataset(y=d.y, X=X, column_names=tuple(names), centered=False)


def center(d: Dataset) -> tuple[Dataset, CenteringRecord]:
    """Subtract column means and the response mean."""
    if d.centered:
        raise ValueError("dataset is already centered")
    x_means = d.X.mean(axis=0)
    y_mean = float(d.y.mean())
    out = Dataset(
        y=d.y - y_mean,
        X=d.X - x_means[None, :],
        column_names=d.column_names,
        centered=True,
    )
    x_means.setflags(write=False)
    return out, CenteringRecord(y_mean=y_mean, x_means=x_means)


def scale_columns(d: Dataset) -> tuple[Dataset, np.ndarray]:
    """Divide each column by its root mean square.

    Returns the scaled dataset and the divisors; a coefficient fitted on the
    scaled design maps back to the original units by dividing by its divisor.
    """
    scales = np.sqrt(np.mean(d.X**2, axis=0))
    return (
        Dataset(y=d.y, X=d.X / scales[None, :], column_names=d.column_names, centered=d.centered),
        scales,
    )
