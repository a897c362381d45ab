"""Dataset loading: CSV with header, LIBSVM sparse rows, and whitespace
``x y label`` shape files (the Clustering Basic Benchmark layout)."""

from __future__ import annotations

import csv
import gzip
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMATS = ("csv", "libsvm", "xyl")


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray | None = None
    labels: np.ndarray | None = None
    feature_names: list[str] | None = None
    name: str = ""
    format: str = ""

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])


def _open_text(path: Path):
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


def guess_format(path) -> str:
    name = Path(path).name.lower()
    if name.endswith(".gz"):
        name = name[:-3]
    if name.endswith(".csv"):
        return "csv"
    if name.endswith((".libsvm", ".svm")):
        return "libsvm"
    return "xyl"


def _float(token: str, lineno: int, path) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DatasetError(f"{path}:{lineno}: cannot parse {token!r} as a number") from None
    if not math.isfinite(value):
        raise DatasetError(f"{path}:{lineno}: non-finite value {token!r}")
    return value


def _load_csv(path: Path, target: str | None):
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DatasetError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append([_float(cell, lineno, path) for cell in row])
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    data = np.array(rows)
    if target is None:
        col = len(header) - 1
    elif target in header:
        col = header.index(target)
    else:
        raise DatasetError(f"{path}: no column named {target!r}")
    keep = [i for i in range(len(header)) if i != col]
    return data[:, keep], data[:, col], None, [header[i] for i in keep]


def _load_libsvm(path: Path):
    ys, entries, width = [], [], 0
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            ys.append(_float(parts[0], lineno, path))
            row = {}
            for tok in parts[1:]:
                idx, sep, val = tok.partition(":")
                if not sep or not idx.isdigit() or int(idx) < 1:
                    raise DatasetError(f"{path}:{lineno}: bad feature token {tok!r}")
                row[int(idx) - 1] = _float(val, lineno, path)
                width = max(width, int(idx))
            entries.append(row)
    if not ys:
        raise DatasetError(f"{path}: no data rows")
    X = np.zeros((len(ys), width))
    for i, row in enumerate(entries):
        for j, v in row.items():
            X[i, j] = v
    return X, np.array(ys), None, [f"f{j + 1}" for j in range(width)]


def _load_xyl(path: Path):
    rows = []
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.replace(",", " ").split()
            if not parts:
                continue
            if len(parts) < 2:
                raise DatasetError(f"{path}:{lineno}: expected coordinates followed by a label")
            if rows and len(parts) != len(rows[0]):
                raise DatasetError(f"{path}:{lineno}: expected {len(rows[0])} fields, got {len(parts)}")
            rows.append([_float(tok, lineno, path) for tok in parts])
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    data = np.array(rows)
    labels = data[:, -1]
    if np.all(labels == np.round(labels)):
        labels = labels.astype(np.int64)
    d = data.shape[1] - 1
    return data[:, :-1], None, labels, [f"x{j + 1}" for j in range(d)]


def load_dataset(path, format: str = "auto", target: str | None = None) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path}: no such file")
    fmt = guess_format(path) if format == "auto" else format
    if fmt == "csv":
        X, y, labels, names = _load_csv(path, target)
    elif fmt == "libsvm":
        X, y, labels, names = _load_libsvm(path)
    elif fmt == "xyl":
        X, y, labels, names = _load_xyl(path)
    else:
        raise DatasetError(f"unknown format {format!r}; expected one of {FORMATS} or 'auto'")
    stem = path.name.split(".")[0]
    return Dataset(X=X, y=y, labels=labels, feature_names=names, name=stem, format=fmt)


def standardize(X, mean=None, scale=None):
    """Zero-mean, unit-variance columns. Constant columns keep scale 1."""
    X = np.asarray(X, dtype=np.float64)
    if mean is None:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
    return (X - mean) / scale, mean, scale
