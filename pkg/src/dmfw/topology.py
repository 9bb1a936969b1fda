"""Communication graphs and doubly stochastic mixing matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class TopologyError(ValueError):
    pass


class EigenvalueError(RuntimeError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected agent graph.

    Agents are indexed ``0..n-1``; edges are stored as ``(i, j)`` with
    ``i < j``. Self-loops are implicit and never listed.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise TopologyError("graph needs at least one agent")
        for i, j in self.edges:
            if not (0 <= i < j < self.n):
                raise TopologyError(f"bad edge ({i}, {j}) for n={self.n}")

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj

    @property
    def connected(self) -> bool:
        if self.n == 1:
            return True
        if not self.edges:
            return False
        rows, cols = zip(*self.edges)
        mat = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n, self.n))
        ncomp, _ = connected_components(mat, directed=False)
        return ncomp == 1


def _normalize_edges(pairs, n):
    edges = set()
    for i, j in pairs:
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            raise TopologyError(f"edge ({i + 1}, {j + 1}) references an agent outside [1, {n}]")
        if i == j:
            continue
        edges.add((min(i, j), max(i, j)))
    return frozenset(edges)


def ring(n: int) -> Graph:
    if n < 1:
        raise TopologyError("n must be positive")
    if n == 1:
        return Graph(1)
    return Graph(n, _normalize_edges(((i, (i + 1) % n) for i in range(n)), n))


def complete(n: int) -> Graph:
    if n < 1:
        raise TopologyError("n must be positive")
    return Graph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def random_connected(n: int, p: float = 0.5, seed=None, max_tries: int = 10000) -> Graph:
    """Erdos-Renyi graph, resampled until connected."""
    if n < 1:
        raise TopologyError("n must be positive")
    if not 0.0 < p <= 1.0:
        raise TopologyError("edge probability must be in (0, 1]")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(max_tries):
        keep = rng.random(iu.size) < p
        g = Graph(n, frozenset(zip(iu[keep].tolist(), ju[keep].tolist())))
        if g.connected:
            return g
    raise TopologyError(f"no connected sample after {max_tries} tries (n={n}, p={p})")


def from_edge_list(pairs, n: int) -> Graph:
    """Graph from 1-based ``(i, j)`` pairs."""
    if n < 1:
        raise TopologyError("n must be positive")
    return Graph(n, _normalize_edges(((i - 1, j - 1) for i, j in pairs), n))


def read_edge_list(path, n: int | None = None) -> Graph:
    """Parse the edge-list text format: one ``i j`` pair per line, 1-based, ``#`` comments."""
    pairs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if len(toks) != 2:
            raise TopologyError(f"{path}:{lineno}: expected 'i j', got {line!r}")
        try:
            pairs.append((int(toks[0]), int(toks[1])))
        except ValueError:
            raise TopologyError(f"{path}:{lineno}: non-integer agent id in {line!r}") from None
    if n is None:
        n = max((max(p) for p in pairs), default=0)
    if any(min(p) < 1 for p in pairs):
        raise TopologyError(f"{path}: agent ids are 1-based")
    return from_edge_list(pairs, n)


def build_graph(kind: str, n: int, p: float = 0.5, seed=None, edges=None) -> Graph:
    """Dispatch on topology kind: ``ring``, ``complete``, ``random`` or ``edges``."""
    if n < 1:
        raise TopologyError("n must be positive")
    if kind == "ring":
        return ring(n)
    if kind == "complete":
        return complete(n)
    if kind in ("random", "random-connected"):
        return random_connected(n, p, seed)
    if kind in ("edges", "edge-list"):
        return from_edge_list(edges or (), n)
    raise TopologyError(f"unknown topology kind {kind!r}")


def second_eigenvalue_magnitude(C, tol: float = 1e-13, max_iter: int = 200000, seed: int = 0) -> float:
    """Magnitude of the second largest eigenvalue of a doubly stochastic matrix.

    Power iteration on ``M^T M`` with ``M = C - 11^T/n``, i.e. with the
    all-ones eigenvector deflated. For symmetric ``C`` the result is
    ``|lambda_2|``; otherwise it is ``||C - J||_2``, the contraction
    factor that actually governs averaging.
    """
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    if n == 1:
        return 0.0
    M = C - 1.0 / n
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v -= v.mean()
    v /= np.linalg.norm(v)
    mu = 0.0
    for it in range(max_iter):
        w = M.T @ (M @ v)
        w -= w.mean()
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        mu_new = float(v @ w)
        v = w / norm
        resid = np.linalg.norm(M.T @ (M @ v) - mu_new * v)
        if abs(mu_new - mu) <= tol * max(mu_new, 1e-300) and resid <= 1e-6:
            mu = mu_new
            break
        mu = mu_new
    else:
        raise EigenvalueError(f"power iteration did not converge in {max_iter} steps (residual {resid:.3e})")
    return float(min(1.0, math.sqrt(max(mu, 0.0))))


def k0_from_lambda(lam: float) -> int:
    """Smallest positive integer ``k0`` with ``lam <= (k0 / (k0 + 1))**2``."""
    if lam <= 0.0:
        return 1
    if lam >= 1.0:
        raise TopologyError("|lambda| >= 1: graph is not connected")
    k0 = max(1, math.ceil(1.0 / (lam ** -0.5 - 1.0)))
    # guard the ceiling against rounding in either direction
    while lam > (k0 / (k0 + 1)) ** 2:
        k0 += 1
    while k0 > 1 and lam <= ((k0 - 1) / k0) ** 2:
        k0 -= 1
    return k0


@dataclass(frozen=True)
class MixingMatrix:
    weights: np.ndarray
    lam: float
    k0: int

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_weights(cls, weights) -> "MixingMatrix":
        W = np.array(weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise TopologyError("mixing matrix must be square")
        if (W < 0).any():
            raise TopologyError("mixing matrix has negative entries")
        if not is_doubly_stochastic(W):
            raise TopologyError("mixing matrix is not doubly stochastic")
        W.setflags(write=False)
        lam = second_eigenvalue_magnitude(W)
        return cls(W, lam, k0_from_lambda(lam))

    def mix(self, values: np.ndarray) -> np.ndarray:
        return consensus_round(self, values)


def is_doubly_stochastic(W, tol: float = 1e-12) -> bool:
    W = np.asarray(W)
    return bool(np.abs(W.sum(axis=1) - 1).max() < tol and np.abs(W.sum(axis=0) - 1).max() < tol)


def metropolis_weights(g: Graph) -> MixingMatrix:
    """Metropolis-Hastings weights ``1 / (1 + max(deg_i, deg_j))`` on edges."""
    if not g.connected:
        raise TopologyError("graph is disconnected; consensus cannot reach the average")
    deg = g.degrees()
    W = np.zeros((g.n, g.n))
    for i, j in sorted(g.edges):
        W[i, j] = W[j, i] = 1.0 / (1 + max(deg[i], deg[j]))
    # diagonal summed in ascending order so rows hit 1 as closely as fp allows
    for i in range(g.n):
        W[i, i] = 1.0 - math.fsum(W[i, j] for j in range(g.n) if j != i)
    return MixingMatrix.from_weights(W)


def consensus_round(C, values) -> np.ndarray:
    """One synchronous averaging round: row ``i`` of the output is ``sum_j c_ij values_j``.

    The sum runs over ``j`` in ascending order so the result does not depend
    on BLAS threading.
    """
    W = C.weights if isinstance(C, MixingMatrix) else np.asarray(C, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] != W.shape[0]:
        raise TopologyError(f"expected {W.shape[0]} agent rows, got shape {values.shape}")
    out = np.zeros_like(values)
    for j in range(W.shape[0]):
        out += W[:, j, None] * values[j]
    return out
