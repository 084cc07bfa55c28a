"""Dense CSV and LIBSVM readers/writers for design matrices.

CSV: the first line is ``m,n`` (or ``m,n,b`` when each row carries a trailing
response value), followed by m rows of comma-separated numbers. Without the
``b`` flag the response is all zeros.

LIBSVM: ``label idx:val idx:val ...`` with 1-based, distinct indices; rows are
materialized densely.
"""

from __future__ import annotations

import csv
import math
import os
from typing import Optional

import numpy as np

from .core import FCBiOError, InvalidData
from .problems import DesignMatrix

FORMATS = ("csv", "libsvm")


class DatasetParseError(FCBiOError, ValueError):
    """Malformed dataset file; ``line`` is the 1-based offending line."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def _number(tok: str, path, line: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise DatasetParseError(path, line, f"not a number: {tok.strip()!r}") from None
    if not math.isfinite(v):
        raise DatasetParseError(path, line, f"non-finite value {tok.strip()!r}")
    return v


def _positive_int(tok: str, path, line: int, what: str) -> int:
    try:
        v = int(tok.strip())
    except ValueError:
        raise DatasetParseError(path, line, f"{what} must be an integer, got {tok.strip()!r}") from None
    if v < 1:
        raise DatasetParseError(path, line, f"{what} must be positive, got {v}")
    return v


def read_csv(path) -> DesignMatrix:
    with open(path, newline="") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if any(c.strip() for c in r)]
    if not rows:
        raise DatasetParseError(path, 1, "empty file; expected header 'm,n'")
    lineno, head = rows[0]
    if len(head) not in (2, 3) or (len(head) == 3 and head[2].strip() != "b"):
        raise DatasetParseError(path, lineno, "header must be 'm,n' or 'm,n,b'")
    m = _positive_int(head[0], path, lineno, "m")
    n = _positive_int(head[1], path, lineno, "n")
    has_b = len(head) == 3
    width = n + 1 if has_b else n
    body = rows[1:]
    if len(body) != m:
        where = body[-1][0] + 1 if body else lineno + 1
        raise DatasetParseError(path, where, f"expected {m} data rows, found {len(body)}")
    data = np.empty((m, width))
    for i, (ln, r) in enumerate(body):
        if len(r) != width:
            raise DatasetParseError(path, ln, f"expected {width} fields, found {len(r)}")
        data[i] = [_number(tok, path, ln) for tok in r]
    if has_b:
        return DesignMatrix(data[:, :n], data[:, n])
    return DesignMatrix(data, np.zeros(m))


def read_libsvm(path, n_features: Optional[int] = None, labels: bool = True) -> DesignMatrix:
    """Parse LIBSVM text; with ``labels`` every label must be -1 or +1."""
    ys, entries = [], []
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            toks = text.split()
            y = _number(toks[0], path, ln)
            if labels and y not in (-1.0, 1.0):
                raise InvalidData(f"{path}:{ln}: label {toks[0]!r} is not in {{-1, +1}}")
            row = {}
            for tok in toks[1:]:
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise DatasetParseError(path, ln, f"expected 'index:value', got {tok!r}")
                j = _positive_int(idx, path, ln, "feature index")
                if j in row:
                    raise DatasetParseError(path, ln, f"duplicate feature index {j}")
                if n_features is not None and j > n_features:
                    raise DatasetParseError(path, ln, f"feature index {j} exceeds n={n_features}")
                row[j] = _number(val, path, ln)
            ys.append(y)
            entries.append(row)
    if not ys:
        raise DatasetParseError(path, 1, "no data lines")
    n = n_features if n_features is not None else max((max(r) for r in entries if r), default=1)
    A = np.zeros((len(ys), n))
    for i, row in enumerate(entries):
        for j, v in row.items():
            A[i, j - 1] = v
    return DesignMatrix(A, np.array(ys))


def load_dataset(path, fmt: Optional[str] = None, n_features: Optional[int] = None,
                 labels: bool = True) -> DesignMatrix:
    """Load a dataset; the format defaults to the file extension."""
    if fmt is None:
        fmt = "libsvm" if os.fspath(path).endswith((".svm", ".libsvm", ".txt")) else "csv"
    if fmt == "csv":
        return read_csv(path)
    if fmt == "libsvm":
        return read_libsvm(path, n_features, labels)
    raise ValueError(f"unknown dataset format {fmt!r}; choose from {FORMATS}")


def write_csv(data: DesignMatrix, path, with_b: bool = True) -> None:
    m, n = data.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([m, n, "b"] if with_b else [m, n])
        for i in range(m):
            vals = list(data.A[i]) + ([data.b[i]] if with_b else [])
            w.writerow([repr(float(v)) for v in vals])


def write_libsvm(data: DesignMatrix, path) -> None:
    with open(path, "w") as fh:
        for i in range(data.shape[0]):
            y = "+1" if data.b[i] > 0 else "-1"
            feats = " ".join(f"{j + 1}:{float(data.A[i, j])!r}" for j in np.flatnonzero(data.A[i]))
            fh.write(f"{y} {feats}".rstrip() + "\n")
