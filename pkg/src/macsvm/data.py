"""Datasets: synthetic K-spirals, delimited-text ingestion, deterministic splits."""

import os
from dataclasses import dataclass

import numpy as np

from . import rng


class ParseError(ValueError):
    """Raised when a delimited file cannot be parsed into a dataset."""


@dataclass
class Dataset:
    """Labeled point set: X is N x D, y holds integer labels in 0..class_count-1."""

    X: np.ndarray
    y: np.ndarray
    class_count: int

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] < 1:
            raise ValueError("X must be a non-empty N x D matrix")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("y length must match the number of rows of X")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("X contains non-finite values")
        if self.class_count < 2:
            raise ValueError("class_count must be at least 2")
        if self.y.min() < 0 or self.y.max() >= self.class_count:
            raise ValueError("labels must lie in [0, class_count)")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


@dataclass
class SplitSpec:
    """Fractions of a partition (must sum to 1) plus the seed that fixes it."""

    fractions: list
    seed: int

    def __post_init__(self):
        fr = [float(f) for f in self.fractions]
        if not fr or any(f <= 0 for f in fr):
            raise ValueError("fractions must be positive")
        if abs(sum(fr) - 1.0) > 1e-12:
            raise ValueError("fractions must sum to 1")
        self.fractions = fr


def gen_spirals(class_count: int, n_per_class: int, noise_sd: float = 0.025,
                turns: float = 1.5, seed: int = 0) -> Dataset:
    """Interleaved Archimedean spirals, one per class.

    Point i of class k sits at angle t*turns*2*pi + 2*pi*k/K with
    t = i/(n_per_class-1), at radius growing linearly from 0.5*turns to
    1.0*turns, plus isotropic Gaussian jitter of std ``noise_sd``.  Rows
    are ordered class-major; jitter is drawn in one (N, 2) block from the
    spiral stream so output is bitwise reproducible for a given seed.
    """
    if class_count < 2:
        raise ValueError("class_count must be at least 2")
    if n_per_class < 1:
        raise ValueError("n_per_class must be at least 1")
    if noise_sd < 0:
        raise ValueError("noise_sd must be nonnegative")
    if turns <= 0:
        raise ValueError("turns must be positive")

    if n_per_class == 1:
        t = np.zeros(1)
    else:
        t = np.arange(n_per_class, dtype=np.float64) / (n_per_class - 1)
    radius = turns * (0.5 + 0.5 * t)

    X = np.empty((class_count * n_per_class, 2), dtype=np.float64)
    y = np.empty(class_count * n_per_class, dtype=np.int64)
    for k in range(class_count):
        theta = t * turns * 2.0 * np.pi + 2.0 * np.pi * k / class_count
        lo = k * n_per_class
        X[lo:lo + n_per_class, 0] = radius * np.cos(theta)
        X[lo:lo + n_per_class, 1] = radius * np.sin(theta)
        y[lo:lo + n_per_class] = k
    g = rng.stream(seed, rng.SPIRAL_STREAM)
    X += noise_sd * g.standard_normal(X.shape)
    return Dataset(X, y, class_count)


def _parse_cell(text, row, col):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"row {row}, column {col}: not a number: {text!r}") from None
    if not np.isfinite(v):
        raise ParseError(f"row {row}, column {col}: non-finite value {text!r}")
    return v


def load_delimited(path, label_column_index: int = -1):
    """Load a comma- or tab-separated text file into a Dataset.

    A header row is auto-detected (first row with any non-numeric cell
    outside the label column).  Labels may be integers or strings; either
    way they are re-coded densely 0..K-1 in first-appearance order.

    Returns (Dataset, label_names) where label_names[i] is the original
    token for code i.
    """
    if not os.path.exists(path):
        raise ParseError(f"no such file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        raw = [line.rstrip("\n").rstrip("\r") for line in fh]
    lines = [(i + 1, ln) for i, ln in enumerate(raw) if ln.strip() != ""]
    if not lines:
        raise ParseError(f"{path}: empty file")

    delim = "\t" if "\t" in lines[0][1] else ","
    rows = [(no, ln.split(delim)) for no, ln in lines]
    arity = len(rows[0][1])
    if arity < 2:
        raise ParseError(f"{path}: rows must have at least 2 columns")
    for no, cells in rows:
        if len(cells) != arity:
            raise ParseError(f"row {no}: expected {arity} columns, got {len(cells)}")

    label_col = label_column_index if label_column_index >= 0 else arity + label_column_index
    if not 0 <= label_col < arity:
        raise ParseError(f"label column {label_column_index} out of range for {arity} columns")

    def numeric(s):
        try:
            float(s)
            return True
        except ValueError:
            return False

    # Header = first row with a non-numeric feature cell.
    first = rows[0][1]
    has_header = any(not numeric(first[c]) for c in range(arity) if c != label_col)
    body = rows[1:] if has_header else rows
    if not body:
        raise ParseError(f"{path}: no data rows")

    codes = {}
    names = []
    X = np.empty((len(body), arity - 1), dtype=np.float64)
    y = np.empty(len(body), dtype=np.int64)
    for r, (no, cells) in enumerate(body):
        j = 0
        for c in range(arity):
            if c == label_col:
                continue
            X[r, j] = _parse_cell(cells[c].strip(), no, c)
            j += 1
        tok = cells[label_col].strip()
        if tok not in codes:
            codes[tok] = len(names)
            names.append(tok)
        y[r] = codes[tok]
    if len(names) < 2:
        raise ParseError(f"{path}: need at least 2 distinct labels, found {len(names)}")
    return Dataset(X, y, len(names)), names


def split(ds: Dataset, spec: SplitSpec):
    """Stratified random partition of ``ds`` into len(fractions) parts.

    Per class, indices are shuffled with the split stream and allocated by
    largest-remainder rounding, so each part's per-class count differs from
    fraction * class_size by less than 1.
    """
    parts = len(spec.fractions)
    counts = np.bincount(ds.y, minlength=ds.class_count)
    if counts.min() < parts:
        raise ValueError("some class has fewer points than the number of parts")
    if parts == 1:
        return [Dataset(ds.X.copy(), ds.y.copy(), ds.class_count)]

    g = rng.stream(spec.seed, rng.SPLIT_STREAM)
    buckets = [[] for _ in range(parts)]
    for k in range(ds.class_count):
        idx = np.flatnonzero(ds.y == k)
        idx = idx[g.permutation(len(idx))]
        base = [int(np.floor(f * len(idx))) for f in spec.fractions]
        rem = [f * len(idx) - b for f, b in zip(spec.fractions, base)]
        short = len(idx) - sum(base)
        # Largest fractional remainders get the leftover points, ties to the lower part.
        for j in sorted(range(parts), key=lambda j: (-rem[j], j))[:short]:
            base[j] += 1
        pos = 0
        for j in range(parts):
            buckets[j].append(idx[pos:pos + base[j]])
            pos += base[j]
    out = []
    for j in range(parts):
        sel = np.concatenate(buckets[j])
        out.append(Dataset(ds.X[sel], ds.y[sel], ds.class_count))
    return out


def standardize_fit(X: np.ndarray):
    """Per-feature (mean, scale) from a training matrix; scale 1 where variance is 0."""
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def standardize_apply(X: np.ndarray, mean, scale):
    return (X - mean) / scale
