"""Greedy vehicle/request assignment and the running-load bookkeeping of a route."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InfeasibleRouteError
from .geo import ZoneGrid

DEFAULT_RADIUS_KM = 5.0

PICKUP = "pickup"
DROPOFF = "dropoff"


@dataclass(frozen=True, slots=True)
class Stop:
    zone: int
    kind: str  # PICKUP or DROPOFF
    request_id: str
    passengers: int = 1

    @property
    def is_pickup(self) -> bool:
        return self.kind == PICKUP


def capacity_prefix(stops: Sequence[Stop], onboard_at_start: int = 0) -> list[int]:
    """Onboard load right after each stop.

    A dropoff whose request has no pickup in ``stops`` belongs to a rider
    already on board and is covered by ``onboard_at_start``.
    """
    pending_pickup = {}
    for i, s in enumerate(stops):
        if s.kind == PICKUP:
            pending_pickup[s.request_id] = i
    seen_pickup = set()
    load = onboard_at_start
    loads = []
    for i, s in enumerate(stops):
        if s.kind == PICKUP:
            seen_pickup.add(s.request_id)
            load += s.passengers
        else:
            if s.request_id in pending_pickup and s.request_id not in seen_pickup:
                raise InfeasibleRouteError(
                    f"dropoff of request {s.request_id} at stop {i} precedes its pickup")
            load -= s.passengers
            if load < 0:
                raise InfeasibleRouteError(f"negative load after stop {i}")
        loads.append(load)
    return loads


def capacity_feasible(stops: Sequence[Stop], c_max: int, onboard: int = 0) -> bool:
    loads = capacity_prefix(stops, onboard)
    return max(loads, default=onboard) <= c_max and onboard <= c_max


@dataclass
class Assignment:
    """Outcome of one greedy round: per-vehicle request lists plus the unmatched."""
    lists: dict = field(default_factory=dict)  # vehicle id -> [request, ...] by proximity
    rejected: list = field(default_factory=list)

    def assigned_ids(self) -> list[str]:
        return [r.id for reqs in self.lists.values() for r in reqs]


def greedy_assign(requests: Iterable, fleet: Iterable, grid: ZoneGrid,
                  radius_km: float = DEFAULT_RADIUS_KM, pooling: bool = True) -> Assignment:
    """Assign each request, in arrival order, to the nearest vehicle with room for it.

    ``fleet`` items need ``id``, ``zone``, ``load`` (riders on board plus already
    committed ones) and ``capacity``. After each assignment the winner's
    bookkeeping location moves to the request origin and its load grows by the
    party size. Without ``pooling`` a vehicle takes at most one request.
    Requests with no vehicle in range are returned in ``rejected``.
    """
    fleet = sorted(fleet, key=lambda v: v.id)
    out = Assignment()
    if not fleet:
        out.rejected = list(requests)
        return out
    ids = [v.id for v in fleet]
    home = np.array([v.zone for v in fleet], dtype=np.int64)
    loc = home.copy()
    load = np.array([v.load for v in fleet], dtype=np.int64)
    cap = np.array([v.capacity for v in fleet], dtype=np.int64)
    max_cells = radius_km / grid.cell_size + 1e-9
    order = {}
    for k, req in enumerate(requests):
        cells = grid.cells_from(req.origin, loc)
        ok = (cells <= max_cells) & (load + req.passenger_count <= cap)
        if not ok.any():
            out.rejected.append(req)
            continue
        masked = np.where(ok, cells, np.iinfo(np.int64).max)
        j = int(np.argmin(masked))  # first minimum -> lowest vehicle id
        vid = ids[j]
        out.lists.setdefault(vid, []).append(req)
        order[req.id] = k
        loc[j] = req.origin
        load[j] = cap[j] if not pooling else load[j] + req.passenger_count
    for j, vid in enumerate(ids):
        reqs = out.lists.get(vid)
        if reqs:
            reqs.sort(key=lambda r: (grid.cells_between(int(home[j]), r.origin), order[r.id]))
    return out
