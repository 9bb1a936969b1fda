"""LIBSVM ingestion, agent partitioning and subsampling.

Rows are kept in CSR form (``indptr``/``indices``/``values``); model
vectors elsewhere are dense.
"""

from __future__ import annotations

import gzip
import hashlib
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse


class DataFormatError(ValueError):
    pass


COVTYPE_LABELS = {1.0: -1.0, 2.0: 1.0}


@dataclass(frozen=True, eq=False)
class Dataset:
    indptr: np.ndarray
    indices: np.ndarray  # 1-based feature ids, strictly increasing per row
    values: np.ndarray
    labels: np.ndarray
    dim: int

    def __len__(self):
        return self.labels.size

    @property
    def n_rows(self) -> int:
        return self.labels.size

    def row(self, i):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return dict(zip(self.indices[lo:hi].tolist(), self.values[lo:hi].tolist())), float(self.labels[i])

    def to_csr(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self.values, self.indices - 1, self.indptr), shape=(self.n_rows, self.dim)
        )

    def features(self, dense: bool | None = None):
        """Feature matrix; dense unless it would exceed ~50M entries."""
        mat = self.to_csr()
        if dense is None:
            dense = self.n_rows * self.dim <= 50_000_000
        return mat.toarray() if dense else mat

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        starts, stops = self.indptr[rows], self.indptr[rows + 1]
        lengths = stops - starts
        indptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        sel = np.concatenate([np.arange(a, b) for a, b in zip(starts, stops)]) if rows.size else np.zeros(0, np.int64)
        sel = sel.astype(np.int64)
        return Dataset(indptr, self.indices[sel], self.values[sel], self.labels[rows], self.dim)

    def map_labels(self, mapping) -> "Dataset":
        try:
            labels = np.array([mapping[float(b)] for b in self.labels], dtype=float)
        except KeyError as exc:
            raise DataFormatError(f"label {exc.args[0]} has no mapping") from None
        return Dataset(self.indptr, self.indices, self.values, labels, self.dim)

    def sign_labels(self) -> "Dataset":
        """Normalize a two-class label set to {-1, +1} (smaller label -> -1)."""
        uniq = np.unique(self.labels)
        if uniq.size > 2:
            raise DataFormatError(f"expected binary labels, found {uniq.size} classes")
        if set(uniq.tolist()) <= {-1.0, 1.0}:
            return self
        if uniq.size == 1:
            return self.map_labels({float(uniq[0]): 1.0})
        return self.map_labels({float(uniq[0]): -1.0, float(uniq[1]): 1.0})

    def maxabs_scaled(self) -> "Dataset":
        scale = np.zeros(self.dim + 1)
        np.maximum.at(scale, self.indices, np.abs(self.values))
        scale[scale == 0] = 1.0
        return Dataset(self.indptr, self.indices, self.values / scale[self.indices], self.labels, self.dim)

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.indptr, self.indices, self.values, self.labels):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(str(self.dim).encode())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
        )


def _open(source):
    if isinstance(source, (str, Path)):
        path = Path(source)
        with open(path, "rb") as fh:
            magic = fh.read(2)
        if magic == b"\x1f\x8b":
            return gzip.open(path, "rt")
        return open(path, "r")
    return source


def parse_libsvm(source, dim: int | None = None, label_map=None) -> Dataset:
    """Parse LIBSVM text (``label idx:val idx:val ...``, 1-based indices).

    ``source`` is a path (optionally gzip-compressed) or a text stream.
    Indices must be strictly increasing within a line.
    """
    indptr, indices, values, labels = [0], [], [], []
    fh = _open(source)
    try:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            try:
                label = float(toks[0])
            except ValueError:
                raise DataFormatError(f"line {lineno}: bad label {toks[0]!r}") from None
            last = 0
            for tok in toks[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    if not sep:
                        raise ValueError
                    i, v = int(idx), float(val)
                except ValueError:
                    raise DataFormatError(f"line {lineno}: malformed token {tok!r}") from None
                if i < 1:
                    raise DataFormatError(f"line {lineno}: feature index {i} is not 1-based")
                if i <= last:
                    raise DataFormatError(f"line {lineno}: feature indices not increasing at {tok!r}")
                last = i
                indices.append(i)
                values.append(v)
            labels.append(label)
            indptr.append(len(indices))
    finally:
        if fh is not source:
            fh.close()
    ind = np.asarray(indices, dtype=np.int64)
    seen = int(ind.max()) if ind.size else 0
    if dim is not None and seen > dim:
        raise DataFormatError(f"feature index {seen} exceeds declared dimension {dim}")
    ds = Dataset(
        np.asarray(indptr, dtype=np.int64), ind, np.asarray(values, dtype=float),
        np.asarray(labels, dtype=float), dim if dim is not None else seen,
    )
    return ds.map_labels(label_map) if label_map else ds


def write_libsvm(ds: Dataset, dest) -> None:
    """Inverse of :func:`parse_libsvm`; floats are written with ``repr`` so the round trip is exact."""
    buf = io.StringIO()
    for i in range(ds.n_rows):
        lo, hi = ds.indptr[i], ds.indptr[i + 1]
        feats = " ".join(f"{j}:{v!r}" for j, v in zip(ds.indices[lo:hi].tolist(), ds.values[lo:hi].tolist()))
        label = ds.labels[i]
        lab = repr(int(label)) if float(label).is_integer() else repr(float(label))
        buf.write(f"{lab} {feats}".rstrip() + "\n")
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(buf.getvalue())
    else:
        dest.write(buf.getvalue())


def partition_even(n_rows: int | Dataset, n: int, seed=None, shuffle: bool = False) -> list[np.ndarray]:
    """Split row ids into ``n`` contiguous chunks whose sizes differ by at most one.

    Remainder rows go to the lowest-indexed agents.
    """
    m = len(n_rows) if isinstance(n_rows, Dataset) else int(n_rows)
    if n < 1:
        raise ValueError("need at least one agent")
    if n > m:
        raise ValueError(f"{n} agents but only {m} rows")
    order = np.random.default_rng(seed).permutation(m) if shuffle else np.arange(m)
    base, extra = divmod(m, n)
    sizes = [base + (1 if i < extra else 0) for i in range(n)]
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return [order[bounds[i]:bounds[i + 1]] for i in range(n)]


def subsample(ds: Dataset, count, seed=None) -> Dataset:
    """Uniform sample without replacement; ``count`` may be an int or a fraction in (0, 1]."""
    if isinstance(count, float) and 0 < count <= 1:
        count = max(1, int(round(count * ds.n_rows)))
    count = int(count)
    if not 0 < count <= ds.n_rows:
        raise ValueError(f"subsample size must be in [1, {ds.n_rows}], got {count}")
    if count == ds.n_rows:
        return ds
    rows = np.sort(np.random.default_rng(seed).choice(ds.n_rows, size=count, replace=False))
    return ds.take(rows)


def synthetic_a9a(m: int = 2000, seed=0) -> Dataset:
    """Stand-in for the a9a census set when the real file is unavailable.

    Same shape as a9a: 123 binary features built from 14 one-hot groups
    (one active feature per group per row), labels in {-1, +1} drawn from a
    logistic model with roughly a quarter positives.
    """
    rng = np.random.default_rng(seed)
    group_sizes = np.array([9, 16, 7, 15, 6, 5, 2, 10, 10, 10, 12, 5, 11, 5])
    assert group_sizes.sum() == 123
    offsets = np.concatenate([[0], np.cumsum(group_sizes)[:-1]])
    # skewed category frequencies, like census categoricals
    probs = [rng.dirichlet(np.full(s, 0.7)) for s in group_sizes]
    cols = np.stack([offsets[g] + rng.choice(s, size=m, p=probs[g]) for g, s in enumerate(group_sizes)], axis=1)
    cols.sort(axis=1)
    w = rng.normal(0.0, 1.0, 123)
    score = w[cols].sum(axis=1)
    score = 1.5 * (score - np.quantile(score, 0.76)) / score.std()
    labels = np.where(rng.random(m) < 1.0 / (1.0 + np.exp(-score)), 1.0, -1.0)
    indptr = np.arange(0, 14 * m + 1, 14, dtype=np.int64)
    return Dataset(indptr, (cols + 1).ravel().astype(np.int64), np.ones(14 * m), labels, 123)
