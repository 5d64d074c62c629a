"""Relocation of idle and newly entered vehicles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geo import ZoneGrid
from .agent import QFunction
from .state import FleetPlanes, action_to_zone

DEFAULT_IDLE_THRESHOLD = 10.0  # minutes


@dataclass
class DispatchDecision:
    vehicle_id: int
    action: int
    target: int
    window: np.ndarray  # the state the action was chosen in


def needs_dispatch(vehicle, idle_threshold: float = DEFAULT_IDLE_THRESHOLD) -> bool:
    if vehicle.fresh:
        return True
    return vehicle.is_idle and vehicle.idle_duration > idle_threshold


def dispatch_idle(fleet, planes: FleetPlanes, agent: QFunction, grid: ZoneGrid, rng,
                  idle_threshold: float = DEFAULT_IDLE_THRESHOLD, greedy: bool = False) -> list:
    """Choose a destination for every vehicle that is new or has idled past the threshold.

    ``fleet`` is walked in id order so the rng stream, and hence every
    decision, is reproducible.
    """
    out = []
    for v in sorted(fleet, key=lambda v: v.id):
        if not needs_dispatch(v, idle_threshold):
            continue
        row, col = grid.coords(v.zone)
        w = planes.window(row, col, agent.crop)
        a = agent.act(w, rng, greedy=greedy)
        out.append(DispatchDecision(v.id, a, action_to_zone(grid, v.zone, a), w))
    return out
