from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Rate:
    """Step size ``scale / (k + shift) ** power``.

    Plain data so schedules pickle across worker processes.
    """

    scale: float
    shift: float = 0.0
    power: float = 1.0

    def __call__(self, k: int) -> float:
        if self.power == 0:
            return float(self.scale)
        return self.scale / (k + self.shift) ** self.power

    def __str__(self):
        if self.power == 0:
            return f"{self.scale:g}"
        den = f"k+{self.shift:g}" if self.shift else "k"
        exp = "" if self.power == 1 else f"^{self.power:g}"
        return f"{self.scale:g}/({den}){exp}"


ONE = Rate(1.0, 0.0, 0.0)


@dataclass(frozen=True)
class StepSchedule:
    """Momentum weight ``gamma_k`` and Frank-Wolfe step ``eta_k``."""

    gamma: Rate = Rate(2.0, 1.0)
    eta: Rate = Rate(2.0, 2.0)

    def at(self, k: int) -> tuple[float, float]:
        g, e = self.gamma(k), self.eta(k)
        if not (0.0 < g <= 1.0 and 0.0 < e <= 1.0):
            raise ValueError(f"step sizes out of (0, 1] at k={k}: gamma={g}, eta={e}")
        return g, e
