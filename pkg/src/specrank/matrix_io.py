"""Loading, validation, and column preprocessing of dense data matrices.

Internally rows are always samples and columns are features. Supported input
formats are delimited text (CSV/TSV, optional auto-detected header row) and
dense Matrix Market ("array real general").
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import EmptyMatrix, NotCentered, ParseError

_FORMATS = ("csv", "tsv", "matrix-market-dense", "mm")
_ORIENTATIONS = ("samples-as-rows", "samples-as-columns")


@dataclass(frozen=True)
class DataMatrix:
    """Immutable real matrix with one sample per row and one feature per column.

    ``centered``/``standardized`` record which column preprocessing has been
    applied. The underlying array is marked read-only so instances can be
    shared freely across threads.
    """

    values: np.ndarray
    centered: bool = False
    standardized: bool = False

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise EmptyMatrix(f"expected a 2-d matrix, got ndim={arr.ndim}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise EmptyMatrix(f"matrix has degenerate shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix entries must all be finite")
        if self.centered:
            tol = 1e-10 * np.maximum(np.abs(arr).max(axis=0), 1e-300)
            if np.any(np.abs(arr.mean(axis=0)) > tol):
                raise ValueError("centered=True but some column mean is not 0")
        if self.standardized:
            var = arr.var(axis=0, ddof=1) if arr.shape[0] > 1 else np.ones(arr.shape[1])
            nonconst = var > 1e-300
            if np.any(np.abs(var[nonconst] - 1.0) > 1e-8):
                raise ValueError("standardized=True but some column variance is not 1")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        """Number of samples (rows)."""
        return self.values.shape[0]

    @property
    def p(self) -> int:
        """Number of features (columns)."""
        return self.values.shape[1]


def _parse_delimited(text: str, delimiter: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text), delimiter=delimiter))
    rows = [r for r in rows if any(cell.strip() != "" for cell in r)]
    if not rows:
        raise EmptyMatrix("file contains no data rows")

    def try_parse(cells):
        out = []
        for cell in cells:
            out.append(float(cell))
        return out

    start = 0
    try:
        try_parse(rows[0])
    except ValueError:
        start = 1  # non-numeric first row is a header
        if len(rows) == 1:
            raise EmptyMatrix("file contains a header but no data rows") from None

    data = []
    width = len(rows[start])
    for i in range(start, len(rows)):
        cells = rows[i]
        if len(cells) != width:
            raise ParseError(i + 1, min(len(cells), width) + 1,
                             f"row {i + 1} has {len(cells)} cells, expected {width}")
        parsed = []
        for j, cell in enumerate(cells):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(i + 1, j + 1) from None
        data.append(parsed)
    return np.asarray(data, dtype=np.float64)


def _parse_matrix_market(text: str) -> np.ndarray:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("%%MatrixMarket"):
        raise ParseError(1, 1, "missing %%MatrixMarket banner")
    header = lines[0].lower().split()
    if "array" not in header or "real" not in header:
        raise ParseError(1, 1, f"unsupported MatrixMarket header: {lines[0]!r}")
    body = [(i + 1, ln.strip()) for i, ln in enumerate(lines[1:], start=1)
            if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise EmptyMatrix("MatrixMarket file has no size line")
    size_lineno, size_line = body[0]
    parts = size_line.split()
    try:
        nrows, ncols = int(parts[0]), int(parts[1])
    except (ValueError, IndexError):
        raise ParseError(size_lineno, 1, f"bad size line: {size_line!r}") from None
    if nrows == 0 or ncols == 0:
        raise EmptyMatrix(f"MatrixMarket size {nrows}x{ncols}")
    vals = []
    for lineno, ln in body[1:]:
        for tok in ln.split():
            try:
                vals.append(float(tok))
            except ValueError:
                raise ParseError(lineno, 1, f"non-numeric value {tok!r}") from None
    if len(vals) != nrows * ncols:
        raise ParseError(body[-1][0], 1,
                         f"expected {nrows * ncols} values, found {len(vals)}")
    # Matrix Market array format is column-major.
    return np.asarray(vals, dtype=np.float64).reshape((ncols, nrows)).T


def load_matrix(path, format: str = "csv",
                orientation: str = "samples-as-rows") -> DataMatrix:
    """Load a dense numeric matrix from ``path``.

    ``orientation="samples-as-columns"`` transposes on load so that rows are
    always samples internally. A non-numeric first row of a CSV/TSV file is
    treated as a header and skipped.
    """
    if format not in _FORMATS:
        raise ValueError(f"format must be one of {_FORMATS}, got {format!r}")
    if orientation not in _ORIENTATIONS:
        raise ValueError(f"orientation must be one of {_ORIENTATIONS}, got {orientation!r}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    text = path.read_text()
    if format in ("matrix-market-dense", "mm"):
        arr = _parse_matrix_market(text)
    else:
        arr = _parse_delimited(text, "\t" if format == "tsv" else ",")
    if orientation == "samples-as-columns":
        arr = arr.T
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains non-finite entries")
    return DataMatrix(values=arr)


def write_matrix(m: DataMatrix, path, format: str = "csv") -> None:
    """Write a matrix as delimited text with 17 significant digits per value."""
    if format not in ("csv", "tsv"):
        raise ValueError(f"format must be csv or tsv, got {format!r}")
    delim = "\t" if format == "tsv" else ","
    with open(path, "w") as fh:
        for row in m.values:
            fh.write(delim.join(f"{v:.17g}" for v in row))
            fh.write("\n")


def center_columns(m: DataMatrix) -> DataMatrix:
    """Subtract the mean from every column. Idempotent."""
    centered = m.values - m.values.mean(axis=0, keepdims=True)
    return DataMatrix(values=centered, centered=True, standardized=m.standardized)


def standardize_columns(m: DataMatrix) -> DataMatrix:
    """Scale every non-constant column to unit sample variance (ddof=1).

    Requires centered input. Constant (all-zero) columns are left untouched
    and reported through a ``UserWarning``; they do not fail the operation.
    """
    if not m.centered:
        raise NotCentered("standardize_columns requires centered columns")
    vals = m.values
    if vals.shape[0] < 2:
        raise ValueError("standardization needs at least 2 samples")
    std = vals.std(axis=0, ddof=1)
    constant = np.flatnonzero(std <= 1e-300)
    if constant.size:
        warnings.warn(
            f"{constant.size} constant column(s) left as zero: "
            f"{constant[:20].tolist()}",
            UserWarning,
            stacklevel=2,
        )
    scale = np.where(std > 1e-300, std, 1.0)
    return DataMatrix(values=vals / scale, centered=True, standardized=True)


def as_centered(m: DataMatrix) -> DataMatrix:
    """Return ``m`` if already centered, otherwise center it."""
    return m if m.centered else center_columns(m)
