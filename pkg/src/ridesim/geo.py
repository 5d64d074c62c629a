"""Zone grid and the deterministic distance / travel-time services built on it.

Zones are numbered row-major, ``0 .. rows*cols-1``. Distances are Manhattan
distances between zone centroids. Internally they are integer cell counts so
route arithmetic stays exact; multiply by ``cell_size`` for kilometres.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError

DEFAULT_SPEED_KMH = 20.0


@dataclass(frozen=True)
class ZoneGrid:
    rows: int
    cols: int
    cell_size: float
    # per-zone row / col lookup tables for vectorised distance queries
    zone_rows: np.ndarray = field(init=False, repr=False, compare=False)
    zone_cols: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.rows) != self.rows or int(self.cols) != self.cols:
            raise ConfigError(f"grid dimensions must be integers, got {self.rows}x{self.cols}")
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"grid dimensions must be >= 1, got {self.rows}x{self.cols}")
        if not (self.cell_size > 0) or not math.isfinite(self.cell_size):
            raise ConfigError(f"cell_size must be > 0, got {self.cell_size}")
        ids = np.arange(self.rows * self.cols)
        rr, cc = np.divmod(ids, self.cols)
        rr.setflags(write=False)
        cc.setflags(write=False)
        object.__setattr__(self, "zone_rows", rr)
        object.__setattr__(self, "zone_cols", cc)

    @property
    def n_zones(self) -> int:
        return self.rows * self.cols

    def check(self, zone: int) -> int:
        if not (0 <= zone < self.n_zones) or int(zone) != zone:
            raise DomainError(f"zone id {zone} outside grid of {self.n_zones} zones")
        return int(zone)

    def zone_id(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise DomainError(f"cell ({row}, {col}) outside {self.rows}x{self.cols} grid")
        return int(row) * self.cols + int(col)

    def coords(self, zone: int) -> tuple[int, int]:
        self.check(zone)
        return divmod(int(zone), self.cols)

    def clamp(self, row: int, col: int) -> int:
        """Zone of the cell nearest to ``(row, col)`` inside the grid."""
        r = min(max(int(row), 0), self.rows - 1)
        c = min(max(int(col), 0), self.cols - 1)
        return r * self.cols + c

    def snap(self, row: float, col: float) -> tuple[int, bool]:
        """Snap a (possibly fractional, possibly out-of-grid) cell position.

        Returns the zone and whether the position had to be clamped into the grid.
        """
        r = int(math.floor(row + 0.5))
        c = int(math.floor(col + 0.5))
        outside = not (0 <= r < self.rows and 0 <= c < self.cols)
        return self.clamp(r, c), outside

    def cells_between(self, a: int, b: int) -> int:
        ra, ca = divmod(a, self.cols)
        rb, cb = divmod(b, self.cols)
        return abs(ra - rb) + abs(ca - cb)

    def cells_from(self, zone: int, zones: np.ndarray) -> np.ndarray:
        """Vectorised Manhattan cell counts from ``zone`` to each of ``zones``."""
        r, c = divmod(zone, self.cols)
        return np.abs(self.zone_rows[zones] - r) + np.abs(self.zone_cols[zones] - c)

    def distance_table(self) -> np.ndarray:
        """Full ``M x M`` path-weight table in km. Only sensible for small grids."""
        dr = np.abs(self.zone_rows[:, None] - self.zone_rows[None, :])
        dc = np.abs(self.zone_cols[:, None] - self.zone_cols[None, :])
        return (dr + dc) * self.cell_size


def build_grid(rows: int, cols: int, cell_size: float) -> ZoneGrid:
    return ZoneGrid(rows, cols, float(cell_size))


def zone_distance(grid: ZoneGrid, a: int, b: int) -> float:
    grid.check(a)
    grid.check(b)
    return grid.cells_between(a, b) * grid.cell_size


def travel_time(grid: ZoneGrid, a: int, b: int, speed: float = DEFAULT_SPEED_KMH) -> float:
    """Minutes to drive from ``a`` to ``b`` at a constant ``speed`` (km/h)."""
    if not (speed > 0):
        raise ConfigError(f"speed must be > 0 km/h, got {speed}")
    return zone_distance(grid, a, b) / speed * 60.0


def path_cells(grid: ZoneGrid, stops: Sequence[int]) -> int:
    if len(stops) == 0:
        raise DomainError("path weight of an empty stop sequence is undefined")
    total = 0
    for a, b in zip(stops[:-1], stops[1:]):
        total += grid.cells_between(a, b)
    return total


def path_weight(grid: ZoneGrid, stops: Sequence[int]) -> float:
    """Sum of consecutive zone distances along ``stops`` (km); a single stop weighs 0."""
    for z in stops:
        grid.check(z)
    return path_cells(grid, stops) * grid.cell_size
