"""Comparison methods sharing the DMFW driver and trace schema.

* SFW: centralized stochastic FW with an averaged gradient
  ``d_k = (1 - rho_k) d_{k-1} + rho_k grad f(x_k, xi_k)``, then
  ``x_{k+1} = (1 - gamma_k) x_k + gamma_k lmo(d_k)`` (Mokhtari, Hassani and
  Karbasi, JMLR 2020).
* MSHFW: centralized momentum FW, i.e. DMFW on one agent holding the
  pooled data with ``C = [1]`` (Akhtar and Rajawat, ACC 2021).
* DeFW: decentralized deterministic FW, i.e. the DMFW network loop with
  exact local gradients and no momentum (Wai et al., IEEE TAC 2017).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DMFW, DivergenceError, iterate
from .objectives import batch_size
from .schedules import ONE, Rate, StepSchedule
from .topology import MixingMatrix

SFW_GAMMA = Rate(2.0, 8.0, 1.0)
SFW_RHO = Rate(4.0, 8.0, 2.0 / 3.0)
DEFW_ETA_CONVEX = Rate(2.0, 1.0, 1.0)
DEFW_ETA_NONCONVEX = Rate(1.0, 0.0, 0.5)

ALGORITHMS = ("dmfw", "mshfw", "sfw", "defw")


@dataclass(frozen=True)
class BaselineConfig:
    algorithm: str
    gamma: Rate | None = None
    rho: Rate | None = None
    eta: Rate | None = None
    batch_frac: float = 0.01
    batch: int | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")


class SFW:
    """Centralized stochastic Frank-Wolfe with gradient averaging."""

    def __init__(self, objective, cs, gamma=SFW_GAMMA, rho=SFW_RHO, batch_frac=0.01, batch=None,
                 x1=None, seed=0):
        self.objectives = [objective]
        self.n = 1
        self.cs = cs
        self.gamma, self.rho = gamma, rho
        self.batch = batch_size(objective.m, batch_frac, batch)
        (ss,) = np.random.SeedSequence(seed).spawn(1)
        self.rng = np.random.default_rng(ss)
        x = np.zeros(objective.dim) if x1 is None else np.array(x1, dtype=float)
        if not cs.contains(x):
            raise ValueError("initial point is not feasible")
        self.x = x
        self.d = np.zeros(objective.dim)
        self.k = 0

    def prepare(self, k):
        rho = self.rho(k)
        if not 0 < rho <= 1:
            raise ValueError(f"rho_{k} = {rho} outside (0, 1]")
        obj = self.objectives[0]
        g = obj.sample_gradient(self.x, obj.draw_batch(self.rng, self.batch))
        self.d = (1.0 - rho) * self.d + rho * g
        self.k = k
        if not np.isfinite(self.d).all():
            raise DivergenceError(k, "gradient estimate")

    def fw_step(self, k):
        gamma = self.gamma(k)
        if not 0 < gamma <= 1:
            raise ValueError(f"gamma_{k} = {gamma} outside (0, 1]")
        v = self.cs.lmo(self.d)
        self.x = (1.0 - gamma) * self.x + gamma * v

    def step(self, k):
        self.prepare(k)
        self.fw_step(k)

    def snapshot(self):
        X = self.x[None, :]
        D = self.d[None, :]
        return {"x": X, "x_hat": X, "y": D, "p": D}


def make_sfw(agg, cs, gamma=SFW_GAMMA, rho=SFW_RHO, batch_frac=0.01, batch=None, x1=None, seed=0):
    return SFW(agg.pooled(), cs, gamma, rho, batch_frac, batch, x1, seed)


def make_mshfw(agg, cs, schedule=None, batch_frac=0.01, batch=None, x1=None, seed=0):
    """Single-agent DMFW on the pooled data."""
    return DMFW([agg.pooled()], cs, MixingMatrix.from_weights([[1.0]]), schedule,
                batch_frac=batch_frac, batch=batch, x1=x1, seed=seed)


def make_defw(objectives, cs, mixing, eta=DEFW_ETA_CONVEX, x1=None):
    """Deterministic decentralized FW: exact gradients, tracking, no momentum."""
    return DMFW(objectives, cs, mixing, StepSchedule(gamma=ONE, eta=eta), x1=x1, exact=True)


def run_sfw(agg, cs, K, seed=0, recorder=None, cadence=None, **kw):
    return iterate(make_sfw(agg, cs, seed=seed, **kw), K, recorder, cadence)


def run_mshfw(agg, cs, K, seed=0, recorder=None, cadence=None, **kw):
    return iterate(make_mshfw(agg, cs, seed=seed, **kw), K, recorder, cadence)


def run_defw(objectives, cs, mixing, K, eta=DEFW_ETA_CONVEX, recorder=None, cadence=None, x1=None):
    return iterate(make_defw(objectives, cs, mixing, eta, x1), K, recorder, cadence)
