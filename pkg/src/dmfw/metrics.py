"""Convergence diagnostics, bound constants and rate fitting."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

CSV_COLUMNS = ("k", "fw_gap", "subopt", "consensus_err", "tracking_err", "tracking_err_sq",
               "per_agent_dev", "elapsed_s")


@dataclass(frozen=True)
class TraceRecord:
    k: int
    fw_gap: float
    subopt: float  # NaN when no reference optimum exists (nonconvex runs)
    consensus_err: float
    tracking_err: float
    tracking_err_sq: float
    per_agent_dev: float
    elapsed_s: float

    def row(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))


def fw_gap(objective, cs, x_bar, grad=None) -> float:
    """``max_{v in X} <grad F(x_bar), x_bar - v>`` with the exact gradient."""
    g = objective.full_gradient(x_bar) if grad is None else grad
    if not np.isfinite(g).all():
        raise FloatingPointError("non-finite gradient in FW-gap")
    return float(g @ x_bar - g @ cs.lmo(g))


def consensus_error(x_hat, x_bar=None, x=None) -> float:
    """``max_i ||x_hat_i - x_bar||`` where ``x_bar`` is the mean of the pre-consensus iterates."""
    if x_bar is None:
        x_bar = np.asarray(x if x is not None else x_hat).mean(axis=0)
    return float(np.linalg.norm(np.asarray(x_hat) - x_bar, axis=1).max())


def tracking_error(x_hat, y, p, objectives):
    """Returns ``(||P_bar - y_bar||, (sum_i ||p_i - y_bar||^2)^(1/2))``.

    ``P_bar`` averages the exact local gradients at the consensus iterates.
    """
    y_bar = np.asarray(y).mean(axis=0)
    P_bar = np.mean([obj.full_gradient(xh) for obj, xh in zip(objectives, x_hat)], axis=0)
    err = float(np.linalg.norm(P_bar - y_bar))
    dev = float(np.sqrt(np.sum((np.asarray(p) - y_bar) ** 2)))
    return err, dev


@dataclass(frozen=True)
class ReferenceOptimum:
    value: float
    gap: float  # FW-gap at the returned point; value - gap lower-bounds F*
    iterations: int
    x: np.ndarray


def reference_optimum(objective, cs, budget: int = 50000, x0=None, tol: float = 0.0) -> ReferenceOptimum:
    """Best value of deterministic FW with ``gamma_k = 2/(k+2)``.

    Only defined for convex objectives. Stops early once the FW-gap drops
    to ``tol`` (by convexity the gap bounds the suboptimality).
    """
    if not getattr(objective, "convex", False):
        raise ValueError("reference optimum is only defined for convex objectives; use the FW-gap")
    x = np.zeros(objective.dim) if x0 is None else np.array(x0, dtype=float)
    best_val, best_x, best_gap = math.inf, x.copy(), math.inf
    it = 0
    both = getattr(objective, "value_and_gradient", None)
    for it in range(budget):
        if both is not None:
            val, g = both(x)
        else:
            val, g = objective.value(x), objective.full_gradient(x)
        v = cs.lmo(g)
        gap = float(g @ (x - v))
        if val < best_val:
            best_val, best_x, best_gap = val, x.copy(), gap
        if gap <= tol:
            break
        x = x + 2.0 / (it + 2) * (v - x)
    val = objective.value(x)
    if val < best_val:
        best_val, best_x, best_gap = val, x.copy(), fw_gap(objective, cs, x)
    return ReferenceOptimum(best_val, max(best_gap, 0.0), it + 1, best_x)


class Recorder:
    """Turns algorithm snapshots into :class:`TraceRecord` rows.

    ``aggregate`` is the global objective used for FW-gap and suboptimality;
    the tracking error uses the algorithm's own local objectives.
    """

    def __init__(self, aggregate, cs, f_star=None):
        self.aggregate = aggregate
        self.cs = cs
        self.f_star = f_star

    def __call__(self, k, algo, elapsed) -> TraceRecord:
        snap = algo.snapshot()
        x_bar = snap["x"].mean(axis=0)
        if self.f_star is None:
            grad, subopt = self.aggregate.full_gradient(x_bar), math.nan
        else:
            val, grad = self.aggregate.value_and_gradient(x_bar)
            subopt = val - self.f_star
        gap = fw_gap(self.aggregate, self.cs, x_bar, grad)
        cons = consensus_error(snap["x_hat"], x_bar)
        err, dev = tracking_error(snap["x_hat"], snap["y"], snap["p"], algo.objectives)
        return TraceRecord(k, gap, subopt, cons, err, err * err, dev, elapsed)


@dataclass(frozen=True)
class BoundConstants:
    C1: float
    C2: float
    C3: float
    C4: float
    D: float
    n: int
    k0: int
    L: float
    delta: float
    G: float
    psi: float
    psi_hat: float
    beta: float

    def as_dict(self):
        return asdict(self)


def beta_partial_sum(K: int) -> float:
    return math.fsum(2.0 / (k + 2) ** 1.5 for k in range(1, K + 1))


def bound_constants(n, k0, D, L, delta, G, y1_norm_max=0.0, initial_gap=0.0, K=1) -> BoundConstants:
    """Plug estimated ``L``, ``delta``, ``G`` into the closed-form constants.

    ``initial_gap`` is ``F(x_bar_1) - F*``; ``K`` sets the horizon of the
    ``beta`` partial sum.
    """
    C1 = k0 * math.sqrt(n) * D
    LD = L * (D + 2 * C1)
    psi = max(y1_norm_max, 2 * G + 2 * LD)
    psi_hat = max(y1_norm_max ** 2, 4 * LD * psi + 4 * G * psi + 8 * G ** 2 + 8 * LD ** 2)
    try:
        C2 = k0 ** 3 * (4.0 * n) ** k0 * n * (12 * LD ** 2 + 12 * (G ** 2 + psi_hat))
    except OverflowError:
        C2 = math.inf
    C3 = 24 * LD ** 2 + 12 * delta ** 2
    C4 = max(math.sqrt(3) * initial_gap, 2 * L * D ** 2 + 2 * D * math.sqrt(12 * L ** 2 * C1 ** 2 + 3 * C3 + 12 * C2))
    return BoundConstants(C1, C2, C3, C4, D, n, k0, L, delta, G, psi, psi_hat, beta_partial_sum(K))


def consensus_bound(k, k0, n, D) -> float:
    """Pathwise bound on ``max_i ||x_hat_k^i - x_bar_k||`` under the ``2/(k+2)`` step."""
    return 2.0 * k0 * math.sqrt(n) * D / (k + 2)


def _select(ks, values, k_range):
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    if k_range is not None:
        lo, hi = k_range
        keep = (ks >= lo) & (ks <= hi)
        ks, values = ks[keep], values[keep]
    if ks.size < 10:
        raise ValueError(f"need at least 10 points to fit a rate, got {ks.size}")
    return ks, values


def fit_rate(ks, values, k_range=None) -> float:
    """Least-squares slope of ``log(value)`` against ``log(k)``."""
    ks, values = _select(ks, values, k_range)
    if not (values > 0).all():
        raise ValueError("rate fit needs strictly positive values")
    slope, _ = np.polyfit(np.log(ks), np.log(values), 1)
    return float(slope)


def fit_inverse_log(ks, values, k_range=None) -> tuple[float, float]:
    """Linear fit of ``value`` against ``1/log2(k)``; returns ``(slope, R^2)``."""
    ks, values = _select(ks, values, k_range)
    if not (values > 0).all():
        raise ValueError("rate fit needs strictly positive values")
    if (ks <= 1).any():
        raise ValueError("1/log2(k) is undefined for k <= 1")
    t = 1.0 / np.log2(ks)
    slope, icept = np.polyfit(t, values, 1)
    resid = values - (slope * t + icept)
    ss_tot = np.sum((values - values.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)
