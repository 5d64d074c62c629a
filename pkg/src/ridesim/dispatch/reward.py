"""Per-vehicle dispatch reward."""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import NumericError

DEFAULT_BETAS = (10.0, 1.0, 5.0, 12.0, 8.0)


@dataclass
class RewardBreakdown:
    served: float = 0.0  # riders served during the transition
    dispatch_minutes: float = 0.0  # time spent relocating
    extra_delay: float = 0.0  # minutes of added delay imposed on riders already committed
    earnings: float = 0.0
    distance: float = 0.0  # km driven
    mileage: float = 1.0  # km per litre
    gas_price: float = 1.0
    activations: float = 0.0  # empty -> occupied switches

    @property
    def profit(self) -> float:
        return self.earnings - (self.distance / self.mileage) * self.gas_price

    def add(self, other: "RewardBreakdown"):
        self.served += other.served
        self.dispatch_minutes += other.dispatch_minutes
        self.extra_delay += other.extra_delay
        self.earnings += other.earnings
        self.distance += other.distance
        self.activations += other.activations


def compute_reward(b: RewardBreakdown, betas=DEFAULT_BETAS, profit: float | None = None) -> float:
    """Service and profit rewarded; relocation time, added delay and activation penalised."""
    b1, b2, b3, b4, b5 = betas
    p = b.profit if profit is None else profit
    r = (b1 * b.served - b2 * b.dispatch_minutes - b3 * b.extra_delay + b4 * p
         - b5 * max(b.activations, 0.0))
    if not math.isfinite(r):
        raise NumericError(f"non-finite reward from {b}")
    return r
