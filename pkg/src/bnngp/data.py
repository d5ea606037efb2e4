"""Dataset generation, standardization, and CSV interchange.

The Rings dataset is two interlocked cylindrical bands in R^3, 60 regularly
spaced points each, labeled 0/1 -- a nonlinearly separable binary problem
whose data manifold has lower dimension than the span of the points.

CSV is the single interchange format: UTF-8, comma-delimited, '.' decimal,
one header row with feature columns named ``x_*`` and target columns named
``y_*``.  Values are written with 17 significant digits so float64 round
trips exactly; lines starting with '#' are ignored on read.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import CsvParseError, InvalidInputError

__all__ = ["Dataset", "generate_rings", "standardize", "load_csv", "save_csv",
           "write_table"]


@dataclass(frozen=True)
class Dataset:
    """Inputs X (N, M), targets Y (N, L), and standardization metadata.

    The mean/std records describe the transform that produced this dataset
    from the raw one (identity if unstandardized), so the inverse transform
    is always available.
    """

    X: np.ndarray
    Y: np.ndarray
    x_mean: np.ndarray = None
    x_std: np.ndarray = None
    y_mean: np.ndarray = None
    y_std: np.ndarray = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        if Y.shape[0] != X.shape[0] and Y.shape == (1, X.shape[0]):
            Y = Y.T
        if X.shape[0] < 1 or X.shape[1] < 1 or Y.shape[1] < 1:
            raise InvalidInputError("dataset needs N, M, L >= 1")
        if Y.shape[0] != X.shape[0]:
            raise InvalidInputError("X and Y must have the same number of rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise InvalidInputError("dataset contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        for name, dim in (("x_mean", X.shape[1]), ("x_std", X.shape[1]),
                          ("y_mean", Y.shape[1]), ("y_std", Y.shape[1])):
            v = getattr(self, name)
            if v is None:
                v = np.zeros(dim) if name.endswith("mean") else np.ones(dim)
            object.__setattr__(self, name, np.asarray(v, dtype=float))

    @property
    def n_points(self) -> int:
        return self.X.shape[0]

    def unstandardized(self) -> "Dataset":
        """Invert the recorded transform."""
        return Dataset(
            X=self.X * self.x_std + self.x_mean,
            Y=self.Y * self.y_std + self.y_mean,
        )


def generate_rings() -> Dataset:
    """120 points on two interlocked cylindrical bands, labels 0/1.

    Ring 1 maps a regular 12x5 lattice over [0, 2pi) x [-1/2, 1/2] through
    (theta, z) -> (cos theta, sin theta, z).  Ring 2 is a copy rotated 90
    degrees in the xz-plane ((x, y, z) -> (z, y, -x)) and translated by 1
    along y.
    """
    theta = 2.0 * np.pi * np.arange(12) / 12.0
    z = -0.5 + np.arange(5) / 4.0
    tt, zz = np.meshgrid(theta, z, indexing="ij")
    ring1 = np.column_stack([np.cos(tt.ravel()), np.sin(tt.ravel()), zz.ravel()])
    ring2 = np.column_stack([ring1[:, 2], ring1[:, 1] + 1.0, -ring1[:, 0]])
    X = np.vstack([ring1, ring2])
    Y = np.concatenate([np.zeros(60), np.ones(60)])[:, None]
    return Dataset(X=X, Y=Y)


def _standardize_block(A):
    mean = A.mean(axis=0)
    std = A.std(axis=0)
    out = np.where(std > 0, (A - mean) / np.where(std > 0, std, 1.0), 0.0)
    return out, mean, np.where(std > 0, std, 1.0)


def standardize(d: Dataset) -> Dataset:
    """Column-wise (v - mean) / std with population std.

    Zero-variance columns become zeros with std recorded as 1.  The returned
    metadata describes this call's transform.
    """
    if d.n_points < 2:
        raise InvalidInputError("standardization needs at least 2 points")
    X, xm, xs = _standardize_block(d.X)
    Y, ym, ys = _standardize_block(d.Y)
    return Dataset(X=X, Y=Y, x_mean=xm, x_std=xs, y_mean=ym, y_std=ys)


def _format(v: float) -> str:
    return format(float(v), ".17g")


def save_csv(path, d: Dataset) -> None:
    """Write a dataset with x_i / y_j header columns."""
    header = [f"x_{i}" for i in range(d.X.shape[1])]
    header += [f"y_{j}" for j in range(d.Y.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for xrow, yrow in zip(d.X, d.Y):
            writer.writerow([_format(v) for v in xrow] + [_format(v) for v in yrow])


def load_csv(path) -> Dataset:
    """Read a dataset written by :func:`save_csv`.

    Column roles come from the header prefixes (``x_`` features, ``y_``
    targets).  Raises CsvParseError with a 1-based line number on malformed
    rows, non-numeric cells, or a bad header.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [
            (i + 1, row)
            for i, row in enumerate(csv.reader(fh))
            if row and not row[0].lstrip().startswith("#")
        ]
    if not lines:
        raise CsvParseError("empty file", line_number=1)
    header_line, header = lines[0]
    x_cols = [i for i, name in enumerate(header) if name.strip().startswith("x_")]
    y_cols = [i for i, name in enumerate(header) if name.strip().startswith("y_")]
    if not x_cols or not y_cols:
        raise CsvParseError(
            "header must contain x_-prefixed feature and y_-prefixed target columns",
            line_number=header_line,
        )
    if len(x_cols) + len(y_cols) != len(header):
        bad = [n for i, n in enumerate(header) if i not in x_cols + y_cols]
        raise CsvParseError(
            f"unrecognized columns {bad}; use x_/y_ prefixes", line_number=header_line
        )
    X_rows, Y_rows = [], []
    for lineno, row in lines[1:]:
        if len(row) != len(header):
            raise CsvParseError(
                f"expected {len(header)} columns, got {len(row)}", line_number=lineno
            )
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise CsvParseError(f"non-numeric cell ({exc})", line_number=lineno)
        X_rows.append([vals[i] for i in x_cols])
        Y_rows.append([vals[i] for i in y_cols])
    if not X_rows:
        raise CsvParseError("no data rows", line_number=header_line)
    return Dataset(X=np.array(X_rows), Y=np.array(Y_rows))


def write_table(path, fieldnames, rows, config=None) -> None:
    """Write a long-format result table with a '#'-prefixed config header.

    ``rows`` is an iterable of dicts keyed by ``fieldnames``; floats are
    written with 17 significant digits.  ``config`` is an ordered mapping
    echoed as comment lines.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key, value in (config or {}).items():
            fh.write(f"# {key} = {value}\n")
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            out = []
            for name in fieldnames:
                v = row[name]
                if isinstance(v, float):
                    out.append(_format(v))
                else:
                    out.append("" if v is None else str(v))
            writer.writerow(out)
