"""Dispatch state planes and the 15x15 relocation action grid."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..geo import ZoneGrid

MAX_MOVE = 7
ACTION_SIDE = 2 * MAX_MOVE + 1
N_ACTIONS = ACTION_SIDE * ACTION_SIDE
STAY = MAX_MOVE * ACTION_SIDE + MAX_MOVE

DEMAND_WINDOW = 30  # minutes of forecast demand summed into plane 0
SUPPLY_OFFSETS = (0, 15, 30)  # minutes ahead for planes 1-3
N_PLANES = 1 + len(SUPPLY_OFFSETS)


def action_index(dx: int, dy: int) -> int:
    if abs(dx) > MAX_MOVE or abs(dy) > MAX_MOVE:
        raise DomainError(f"move ({dx}, {dy}) exceeds +-{MAX_MOVE} cells")
    return (dy + MAX_MOVE) * ACTION_SIDE + (dx + MAX_MOVE)


def action_offset(index: int) -> tuple[int, int]:
    """(dx, dy) for an action index."""
    if not (0 <= index < N_ACTIONS):
        raise DomainError(f"action index {index} outside 0..{N_ACTIONS - 1}")
    dy, dx = divmod(int(index), ACTION_SIDE)
    return dx - MAX_MOVE, dy - MAX_MOVE


def action_to_zone(grid: ZoneGrid, zone: int, action: int) -> int:
    """Target zone of ``action`` for a vehicle in ``zone``; moves off the map are clamped."""
    dx, dy = action_offset(action)
    row, col = grid.coords(zone)
    return grid.clamp(row + dy, col + dx)


@dataclass
class FleetPlanes:
    """The four full-grid planes of one tick, shared by every vehicle deciding in it."""
    planes: np.ndarray  # (4, rows, cols)

    def window(self, row: int, col: int, size: int) -> np.ndarray:
        """``size x size`` crop centred on (row, col), zero outside the map."""
        _, R, C = self.planes.shape
        half = size // 2
        out = np.zeros((self.planes.shape[0], size, size), dtype=self.planes.dtype)
        r0, c0 = row - half, col - half
        rs, re = max(r0, 0), min(r0 + size, R)
        cs, ce = max(c0, 0), min(c0 + size, C)
        if rs < re and cs < ce:
            out[:, rs - r0:re - r0, cs - c0:ce - c0] = self.planes[:, rs:re, cs:ce]
        return out


@dataclass
class DispatchState:
    planes: np.ndarray  # (4, rows, cols), or a crop of them
    zone: int
    row: int
    col: int

    def window(self, size: int) -> np.ndarray:
        return FleetPlanes(self.planes).window(self.row, self.col, size)


def fleet_planes(demand, supply, grid: ZoneGrid) -> FleetPlanes:
    """Stack summed 30-minute demand and supply at +0/+15/+30 into grid planes."""
    need = max(DEMAND_WINDOW, max(SUPPLY_OFFSETS))
    for name, f in (("demand", demand), ("supply", supply)):
        if f.values.shape[0] - 1 < need:
            raise DomainError(f"{name} forecast horizon {f.values.shape[0] - 1} shorter than {need} steps")
        if f.values.shape[1] != grid.n_zones:
            raise DomainError(f"{name} forecast covers {f.values.shape[1]} zones, grid has {grid.n_zones}")
    planes = np.empty((N_PLANES, grid.rows, grid.cols))
    planes[0] = demand.values[:DEMAND_WINDOW].sum(axis=0).reshape(grid.rows, grid.cols)
    for k, off in enumerate(SUPPLY_OFFSETS, start=1):
        planes[k] = supply.values[off].reshape(grid.rows, grid.cols)
    if not np.isfinite(planes).all() or (planes < 0).any():
        raise DomainError("state planes must be finite and non-negative")
    return FleetPlanes(planes)


def encode_state(demand, supply, zone: int, grid: ZoneGrid) -> DispatchState:
    fp = fleet_planes(demand, supply, grid)
    row, col = grid.coords(zone)
    return DispatchState(fp.planes, zone, row, col)
