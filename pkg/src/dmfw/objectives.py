"""Per-agent finite-sum objectives with sampled and exact gradients.

Three losses, all averaged over the local samples ``(a, b)``:

* ``logistic``:  ``ln(1 + exp(-b <a, x>))``
* ``sigmoid``:   ``1 / (1 + exp(b <a, x>)) + lam * ||x||^2``  (nonconvex)
* ``ridge``:     ``(<a, x> - b)^2 + lam * ||x||^2``
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.special import expit, log_expit

KINDS = ("logistic", "sigmoid", "ridge")
CONVEX = {"logistic": True, "sigmoid": False, "ridge": True}

_ALIASES = {"sigmoid-nc": "sigmoid", "nonconvex-sigmoid": "sigmoid", "ridge-synthetic": "ridge"}


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise ValueError("x contains NaN or Inf")
    return x


@dataclass(frozen=True, eq=False)
class StochasticObjective:
    kind: str
    features: object  # (m, p) ndarray or scipy CSR matrix
    labels: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.features.shape[0] != self.labels.size:
            raise ValueError("features and labels disagree on sample count")
        if self.labels.size == 0:
            raise ValueError("objective needs at least one sample")

    @property
    def m(self) -> int:
        return self.labels.size

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def convex(self) -> bool:
        return CONVEX[self.kind]

    def _margins(self, A, b, x):
        z = A @ x
        return np.asarray(z).ravel() * b if self.kind != "ridge" else np.asarray(z).ravel() - b

    def value(self, x) -> float:
        x = _check_x(x)
        A, b = self.features, self.labels
        z = self._margins(A, b, x)
        if self.kind == "logistic":
            return float(-np.mean(log_expit(z)))
        if self.kind == "sigmoid":
            return float(np.mean(expit(-z)) + self.lam * (x @ x))
        return float(np.mean(z * z) + self.lam * (x @ x))

    def _grad(self, A, b, x) -> np.ndarray:
        z = self._margins(A, b, x)
        if self.kind == "logistic":
            coef = -b * expit(-z)
            reg = 0.0
        elif self.kind == "sigmoid":
            coef = -b * expit(z) * expit(-z)
            reg = 2.0 * self.lam * x
        else:
            coef = 2.0 * z
            reg = 2.0 * self.lam * x
        g = A.T @ coef
        return np.asarray(g).ravel() / b.size + reg

    def full_gradient(self, x) -> np.ndarray:
        return self._grad(self.features, self.labels, _check_x(x))

    def value_and_gradient(self, x):
        """``(F(x), grad F(x))`` sharing one pass over the data."""
        x = _check_x(x)
        A, b = self.features, self.labels
        z = self._margins(A, b, x)
        if self.kind == "logistic":
            val = -np.mean(log_expit(z))
            coef, reg = -b * expit(-z), 0.0
        elif self.kind == "sigmoid":
            s = expit(-z)
            val = np.mean(s) + self.lam * (x @ x)
            coef, reg = -b * (1.0 - s) * s, 2.0 * self.lam * x
        else:
            val = np.mean(z * z) + self.lam * (x @ x)
            coef, reg = 2.0 * z, 2.0 * self.lam * x
        return float(val), np.asarray(A.T @ coef).ravel() / b.size + reg

    def sample_gradient(self, x, batch) -> np.ndarray:
        """Mean per-sample gradient over the row ids in ``batch`` (0-based)."""
        batch = np.asarray(batch, dtype=np.int64)
        if batch.size == 0:
            raise ValueError("empty batch")
        if batch.min() < 0 or batch.max() >= self.m:
            raise IndexError(f"batch index outside [0, {self.m})")
        return self._grad(self.features[batch], self.labels[batch], _check_x(x))

    def draw_batch(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Indices for one minibatch, without replacement inside the batch."""
        if size >= self.m:
            return np.arange(self.m)
        if size == 1:
            return rng.integers(self.m, size=1)
        return rng.choice(self.m, size=size, replace=False)


def batch_size(m: int, frac: float | None = None, size: int | None = None) -> int:
    if size is not None:
        if size < 1:
            raise ValueError("batch size must be >= 1")
        return min(int(size), m)
    frac = 0.01 if frac is None else frac
    if not 0 < frac <= 1:
        raise ValueError("batch fraction must be in (0, 1]")
    return max(1, min(m, int(round(frac * m))))


class Aggregate:
    """``F(x) = (1/n) sum_i F_i(x)`` over a list of agent objectives."""

    def __init__(self, parts):
        self.parts = list(parts)
        if not self.parts:
            raise ValueError("aggregate needs at least one objective")
        dims = {p.dim for p in self.parts}
        if len(dims) != 1:
            raise ValueError(f"agent objectives disagree on dimension: {sorted(dims)}")
        # equal shard sizes make the mean of means the pooled mean
        same = len({(p.m, p.kind, p.lam) for p in self.parts}) == 1
        self._fast = self.pooled() if same and len(self.parts) > 1 else None

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    @property
    def convex(self) -> bool:
        return all(p.convex for p in self.parts)

    def __len__(self):
        return len(self.parts)

    def value(self, x) -> float:
        if self._fast is not None:
            return self._fast.value(x)
        return float(np.mean([p.value(x) for p in self.parts]))

    def full_gradient(self, x) -> np.ndarray:
        if self._fast is not None:
            return self._fast.full_gradient(x)
        g = np.zeros(self.dim)
        for p in self.parts:
            g += p.full_gradient(x)
        return g / len(self.parts)

    def value_and_gradient(self, x):
        if self._fast is not None:
            return self._fast.value_and_gradient(x)
        return self.value(x), self.full_gradient(x)

    def pooled(self) -> StochasticObjective:
        """Single objective over all agents' samples (the centralized view)."""
        first = self.parts[0]
        if sparse.issparse(first.features):
            A = sparse.vstack([p.features for p in self.parts]).tocsr()
        else:
            A = np.vstack([p.features for p in self.parts])
        b = np.concatenate([p.labels for p in self.parts])
        return StochasticObjective(first.kind, A, b, first.lam)


def from_dataset(ds, kind: str, rows=None, lam: float = 0.0, dense=None) -> StochasticObjective:
    if rows is not None:
        ds = ds.take(rows)
    kind = _ALIASES.get(kind, kind)
    if kind in ("logistic", "sigmoid"):
        ds = ds.sign_labels()
    return StochasticObjective(kind, ds.features(dense), ds.labels.astype(float), lam)


def make_ridge_synthetic(p: int, m: int, lam: float = 5e-6, seed=None, noise: float = 1.0):
    """Synthetic ridge regression data for one agent.

    ``a ~ U[0.3, 0.4]^p``, a target ``z ~ U[0, 10]^p`` drawn once, and
    ``b = <a, z> + noise * N(0, 1)``. Returns the objective and ``z``.
    """
    if p < 1 or m < 1:
        raise ValueError("p and m must be positive")
    rng = np.random.default_rng(seed)
    z = rng.uniform(0.0, 10.0, p)
    A = rng.uniform(0.3, 0.4, (m, p))
    b = A @ z + noise * rng.standard_normal(m)
    return StochasticObjective("ridge", A, b, lam), z


def estimate_constants(agg: Aggregate, cs, n_pairs: int = 200, batch: int = 1, seed=0) -> dict:
    """Empirical smoothness ``L``, variance ``delta`` and second-moment ``G``.

    ``L`` is the largest observed ``||grad F_i(u) - grad F_i(v)|| / ||u - v||``
    over random feasible pairs; ``delta`` and ``G`` are the worst
    per-point root mean square of sampled-gradient deviations and norms.
    """
    rng = np.random.default_rng(seed)
    dim = agg.dim
    L = delta = G = 0.0

    def feasible_point():
        v = rng.standard_normal(dim)
        return v * (cs.radius * rng.random() / max(cs.norm(v), 1e-300))

    for _ in range(n_pairs):
        u, v = feasible_point(), feasible_point()
        duv = np.linalg.norm(u - v)
        for part in agg.parts:
            gu, gv = part.full_gradient(u), part.full_gradient(v)
            if duv > 0:
                L = max(L, np.linalg.norm(gu - gv) / duv)
    for _ in range(max(1, n_pairs // 10)):
        x = feasible_point()
        for part in agg.parts:
            g = part.full_gradient(x)
            draws = [part.sample_gradient(x, part.draw_batch(rng, batch)) for _ in range(32)]
            delta = max(delta, float(np.sqrt(np.mean([np.sum((d - g) ** 2) for d in draws]))))
            G = max(G, float(np.sqrt(np.mean([np.sum(d * d) for d in draws]))))
    return {"L": float(L), "delta": delta, "G": G}
