"""Norm-ball feasible sets and their closed-form linear minimization oracles."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MEMBERSHIP_TOL = 1e-9


def _as_fraction(q) -> Fraction:
    if isinstance(q, str):
        return Fraction(q.strip())
    if isinstance(q, float):
        return Fraction(q).limit_denominator(1000)
    return Fraction(q)


@dataclass(frozen=True)
class ConstraintSet:
    """``{x : ||x||_q <= radius}`` for ``q >= 1``.

    ``q`` is held as a ``Fraction`` so the conjugate exponent comes out
    exact (``q = 5/4`` gives ``q' = 5``).
    """

    q: Fraction = Fraction(2)
    radius: float = 5.0
    dim: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "q", _as_fraction(self.q))
        if self.q < 1:
            raise ValueError(f"norm exponent must be >= 1, got {self.q}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @classmethod
    def parse(cls, spec: str, dim=None) -> "ConstraintSet":
        """Parse ``"<q>:<r>"``, e.g. ``"2:5"``, ``"l1:5"``, ``"5/4:5"``."""
        q, _, r = spec.partition(":")
        q = q.strip().lower().lstrip("l")
        return cls(q=_as_fraction(q), radius=float(r) if r else 5.0, dim=dim)

    @property
    def conjugate(self):
        """Dual exponent ``q'``; ``inf`` for the l1 ball."""
        if self.q == 1:
            return float("inf")
        return self.q / (self.q - 1)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def norm(self, x) -> float:
        return _norm(np.asarray(x, dtype=float), self.q)

    def dual_norm(self, p) -> float:
        return _norm(np.asarray(p, dtype=float), self.conjugate)

    def contains(self, x) -> bool:
        return membership(self, x)

    def lmo(self, p) -> np.ndarray:
        return lmo(self, p)

    def __str__(self):
        return f"l{self.q}:{self.radius:g}"


def _norm(x, q) -> float:
    if q == float("inf"):
        return float(np.abs(x).max()) if x.size else 0.0
    if q == 1:
        return float(np.abs(x).sum())
    if q == 2:
        return float(np.linalg.norm(x))
    qf = float(q)
    ax = np.abs(x)
    scale = ax.max() if ax.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(scale * np.sum((ax / scale) ** qf) ** (1.0 / qf))


def _check(cs: ConstraintSet, v: np.ndarray, what: str):
    if v.ndim != 1:
        raise ValueError(f"{what} must be a vector")
    if cs.dim is not None and v.size != cs.dim:
        raise ValueError(f"{what} has dimension {v.size}, set has {cs.dim}")
    if not np.isfinite(v).all():
        raise ValueError(f"{what} contains NaN or Inf")


def membership(cs: ConstraintSet, x) -> bool:
    x = np.asarray(x, dtype=float)
    _check(cs, x, "x")
    return cs.norm(x) <= cs.radius + MEMBERSHIP_TOL


def lmo(cs: ConstraintSet, p) -> np.ndarray:
    """Return ``argmin_{||v||_q <= r} <p, v>``.

    Ties in the l1 case go to the lowest index. ``p = 0`` returns the
    center of the ball.
    """
    p = np.asarray(p, dtype=float)
    _check(cs, p, "p")
    r = cs.radius
    theta = np.zeros_like(p)
    if not p.any():
        return theta
    if cs.q == 1:
        i = int(np.argmax(np.abs(p)))
        theta[i] = -r * np.sign(p[i])
        return theta
    if cs.q == 2:
        return -r * p / np.linalg.norm(p)
    qc = float(cs.conjugate)
    ap = np.abs(p)
    # rescale before powering so |p|^(q'-1) cannot overflow
    ap = ap / ap.max()
    w = ap ** (qc - 1.0)
    dual = np.sum(ap ** qc) ** (1.0 / qc)
    return -r * np.sign(p) * w / dual ** (qc - 1.0)
