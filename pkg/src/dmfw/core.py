"""Distributed momentum-based Frank-Wolfe over a synchronous agent network.

Each iteration ``k`` runs, for every agent ``i``:

1. average consensus        ``xh_i = sum_j c_ij x_j``
2. recursive momentum       ``y_i = (1-g) y_i' + grad f_i(xh_i, xi) - (1-g) grad f_i(xh_i', xi)``
3. gradient tracking        ``s_i = sum_j c_ij s_j' + y_i - y_i'``, ``p_i = sum_j c_ij s_j``
4. Frank-Wolfe step         ``theta_i = lmo(p_i)``, ``x_i <- xh_i + eta (theta_i - xh_i)``

Primes denote the previous iteration. The same sample ``xi`` is evaluated
at both the current and the previous consensus iterate in step 2.
Iteration ``k = 1`` is the initialization: ``y_1 = s_1 = grad f_i(xh_1, xi_1)``
and steps 2-3 start at ``k = 2``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .lmo import ConstraintSet
from .objectives import batch_size
from .schedules import StepSchedule
from .topology import MixingMatrix, consensus_round


class DivergenceError(FloatingPointError):
    def __init__(self, k, what):
        super().__init__(f"non-finite {what} at iteration {k}")
        self.k = k


@dataclass
class AgentState:
    """Views into one agent's row of the network state."""

    x: np.ndarray
    x_hat: np.ndarray
    x_hat_prev: np.ndarray
    y: np.ndarray
    y_prev: np.ndarray
    s: np.ndarray
    p: np.ndarray
    theta: np.ndarray


class DMFW:
    """Network state plus the update rule.

    Parameters
    ----------
    objectives : list of StochasticObjective, one per agent
    cs : ConstraintSet
    mixing : MixingMatrix (``n x n``, doubly stochastic)
    schedule : StepSchedule, defaults to ``gamma_k = 2/(k+1)``, ``eta_k = 2/(k+2)``
    batch_frac, batch : minibatch as a fraction of local data or an absolute size
    x1 : initial point (shared) or ``(n, p)`` per-agent points; defaults to 0
    seed : seeds one independent sample stream per agent
    exact : use exact local gradients instead of sampling
    """

    def __init__(self, objectives, cs: ConstraintSet, mixing: MixingMatrix, schedule=None,
                 batch_frac=0.01, batch=None, x1=None, seed=0, exact=False):
        self.objectives = list(objectives)
        self.n = len(self.objectives)
        if mixing.n != self.n:
            raise ValueError(f"mixing matrix is {mixing.n}x{mixing.n} but there are {self.n} agents")
        dims = {o.dim for o in self.objectives}
        if len(dims) != 1:
            raise ValueError(f"agent objectives disagree on dimension: {sorted(dims)}")
        self.dim = dims.pop()
        if cs.dim is not None and cs.dim != self.dim:
            raise ValueError("constraint set dimension does not match objectives")
        self.cs = cs
        self.mixing = mixing
        self.schedule = schedule or StepSchedule()
        self.exact = exact
        self.batches = [batch_size(o.m, batch_frac, batch) for o in self.objectives]
        self.rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(self.n)]

        if x1 is None:
            X = np.zeros((self.n, self.dim))
        else:
            x1 = np.asarray(x1, dtype=float)
            X = np.tile(x1, (self.n, 1)) if x1.ndim == 1 else x1.copy()
        if X.shape != (self.n, self.dim):
            raise ValueError(f"initial point has shape {X.shape}, expected {(self.n, self.dim)}")
        for row in X:
            if not cs.contains(row):
                raise ValueError("initial point is not feasible")
        self.X = X
        self.k = 0
        self._init()

    def _gradient(self, i, x, idx):
        obj = self.objectives[i]
        return obj.full_gradient(x) if idx is None else obj.sample_gradient(x, idx)

    def _draw(self, i):
        if self.exact:
            return None
        return self.objectives[i].draw_batch(self.rngs[i], self.batches[i])

    def _mix(self, values):
        return consensus_round(self.mixing, values)

    def _init(self):
        self.X_hat = self._mix(self.X)
        self.X_hat_prev = self.X_hat.copy()
        self.Y = np.stack([self._gradient(i, self.X_hat[i], self._draw(i)) for i in range(self.n)])
        self.Y_prev = self.Y.copy()
        self.S = self.Y.copy()
        self.P = self._mix(self.S)
        self.Theta = np.zeros_like(self.X)
        self.k = 1
        self._check("initial gradient", self.Y)

    def _check(self, what, arr):
        if not np.isfinite(arr).all():
            raise DivergenceError(self.k, what)

    def prepare(self, k: int):
        """Consensus, momentum and tracking for iteration ``k`` (no-op at ``k = 1``)."""
        if k != self.k + (k > 1):
            raise ValueError(f"iteration {k} out of order (state at {self.k})")
        if k == 1:
            return
        self.k = k
        gamma, _ = self.schedule.at(k)
        self.X_hat_prev = self.X_hat
        self.X_hat = self._mix(self.X)
        Y = np.empty_like(self.Y)
        for i in range(self.n):
            idx = self._draw(i)
            g_new = self._gradient(i, self.X_hat[i], idx)
            if gamma == 1.0:
                Y[i] = g_new
            else:
                g_old = self._gradient(i, self.X_hat_prev[i], idx)
                Y[i] = (1.0 - gamma) * self.Y[i] + g_new - (1.0 - gamma) * g_old
        self.Y_prev, self.Y = self.Y, Y
        self.S = self._mix(self.S) + self.Y - self.Y_prev
        self.P = self._mix(self.S)
        self._check("gradient estimate", self.P)

    def fw_step(self, k: int):
        """Linear minimization and convex-combination move; produces ``x_{k+1}``."""
        _, eta = self.schedule.at(k)
        for i in range(self.n):
            self.Theta[i] = self.cs.lmo(self.P[i])
        self.X = self.X_hat + eta * (self.Theta - self.X_hat)
        self._check("iterate", self.X)

    def step(self, k: int):
        self.prepare(k)
        self.fw_step(k)

    def agent(self, i: int) -> AgentState:
        return AgentState(self.X[i], self.X_hat[i], self.X_hat_prev[i], self.Y[i], self.Y_prev[i],
                          self.S[i], self.P[i], self.Theta[i])

    def snapshot(self) -> dict:
        return {"x": self.X, "x_hat": self.X_hat, "y": self.Y, "p": self.P}


def iterate(algo, K: int, recorder=None, cadence=None):
    """Drive any algorithm exposing ``prepare``/``fw_step``/``snapshot`` for ``K`` iterations.

    ``recorder(k, snapshot, elapsed)`` is called before the Frank-Wolfe
    move of every recorded iteration and its return values are collected.
    """
    trace = []
    t0 = time.perf_counter()
    for k in range(1, K + 1):
        algo.prepare(k)
        if recorder is not None and should_record(k, cadence):
            trace.append(recorder(k, algo, time.perf_counter() - t0))
        algo.fw_step(k)
    return trace


def should_record(k: int, cadence=None) -> bool:
    """``cadence=None`` records every iteration up to 100, then every 10th."""
    if cadence is None or cadence == "auto":
        return k <= 100 or k % 10 == 0
    cadence = int(cadence)
    return cadence <= 1 or k % cadence == 0 or k == 1
