"""Insertion-based route planning.

A :class:`Route` is the ordered list of stops a vehicle still has to visit,
costed from the vehicle's current zone. :func:`insert_request` places a new
request's pickup and dropoff into an existing route without reordering the
stops already there: first the cheapest feasible pickup slot is fixed, then
the cheapest dropoff slot after it. Candidate costs are local edge deltas
(remove one edge, add two), so every slot is priced in constant time.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

from .errors import DomainError, InfeasibleRouteError
from .geo import ZoneGrid
from .matching import DROPOFF, PICKUP, Stop, capacity_prefix

logger = logging.getLogger(__name__)


class Route:
    """Stops still to be served, with cached cost and running loads.

    ``start`` is the vehicle's zone, ``onboard`` the riders already in the car
    when the route starts. The cache is rebuilt on every mutation.
    """

    __slots__ = ("grid", "start", "stops", "onboard", "cost_cells", "loads")

    def __init__(self, grid: ZoneGrid, start: int, stops: Iterable[Stop] = (), onboard: int = 0):
        self.grid = grid
        self.start = int(start)
        self.stops = list(stops)
        self.onboard = int(onboard)
        self._refresh()

    def _refresh(self):
        self.loads = capacity_prefix(self.stops, self.onboard)
        total = 0
        prev = self.start
        for s in self.stops:
            total += self.grid.cells_between(prev, s.zone)
            prev = s.zone
        self.cost_cells = total

    @property
    def cost(self) -> float:
        return self.cost_cells * self.grid.cell_size

    @property
    def zones(self) -> list[int]:
        return [self.start] + [s.zone for s in self.stops]

    def __len__(self):
        return len(self.stops)

    def __bool__(self):
        return bool(self.stops)

    def __repr__(self):
        body = ", ".join(f"{s.kind[0]}{s.request_id}@{s.zone}" for s in self.stops)
        return f"Route(start={self.start}, [{body}], cost={self.cost:.3f})"

    def copy(self) -> "Route":
        new = Route.__new__(Route)
        new.grid = self.grid
        new.start = self.start
        new.stops = list(self.stops)
        new.onboard = self.onboard
        new.cost_cells = self.cost_cells
        new.loads = list(self.loads)
        return new

    def move_to(self, zone: int):
        self.start = int(zone)
        self._refresh()

    def pop_front(self) -> Stop:
        """Serve the first stop: it leaves the route and its riders board or alight."""
        stop = self.stops.pop(0)
        self.onboard += stop.passengers if stop.kind == PICKUP else -stop.passengers
        self.start = stop.zone
        self._refresh()
        return stop

    def remove_request(self, request_id: str):
        self.stops = [s for s in self.stops if s.request_id != request_id]
        self._refresh()

    def index_of(self, request_id: str, kind: str) -> int:
        for i, s in enumerate(self.stops):
            if s.request_id == request_id and s.kind == kind:
                return i
        raise DomainError(f"request {request_id} has no {kind} stop in route")

    def cells_until(self, index: int) -> int:
        """Driving distance (cells) from the start to stop ``index`` inclusive."""
        total = 0
        prev = self.start
        for s in self.stops[: index + 1]:
            total += self.grid.cells_between(prev, s.zone)
            prev = s.zone
        return total

    def arrival_cells(self) -> list[int]:
        out = []
        total = 0
        prev = self.start
        for s in self.stops:
            total += self.grid.cells_between(prev, s.zone)
            out.append(total)
            prev = s.zone
        return out

    def max_load(self) -> int:
        return max(self.loads, default=self.onboard)


class Insertion(NamedTuple):
    route: Route
    cost: float  # total cost of the new route (km), from local deltas
    pickup_index: int
    dropoff_index: int
    evaluations: int  # candidate slots priced


def _slot_delta(grid: ZoneGrid, zones: Sequence[int], p: int, z: int) -> int:
    """Extra cells when zone ``z`` goes between ``zones[p]`` and ``zones[p + 1]``."""
    a = zones[p]
    if p + 1 < len(zones):
        b = zones[p + 1]
        return grid.cells_between(a, z) + grid.cells_between(z, b) - grid.cells_between(a, b)
    return grid.cells_between(a, z)


def insert_request(route: Route, request, capacity: int) -> Optional[Insertion]:
    """Insert ``request`` into ``route`` at minimum increased cost.

    Returns ``None`` when no capacity-feasible pickup slot exists. Ties go to the
    earliest slot. The old route is left untouched.
    """
    grid = route.grid
    size = request.passenger_count
    o, d = request.origin, request.destination
    pick = Stop(o, PICKUP, request.id, size)
    drop = Stop(d, DROPOFF, request.id, size)
    if not route.stops:
        if route.onboard + size > capacity:
            return None
        new = Route.__new__(Route)
        new.grid, new.start, new.onboard = grid, route.start, route.onboard
        new.stops = [pick, drop]
        new.loads = [route.onboard + size, route.onboard]
        new.cost_cells = grid.cells_between(route.start, o) + grid.cells_between(o, d)
        return Insertion(new, new.cost_cells * grid.cell_size, 0, 1, 1)

    zones = route.zones  # start + stop zones
    n = len(route.stops)
    loads = route.loads
    evaluations = 0

    # stage 1: pickup slot p means "before stop p" (p == n appends)
    best_p, best_dp = -1, None
    for p in range(n + 1):
        evaluations += 1
        before = route.onboard if p == 0 else loads[p - 1]
        if before + size > capacity:
            continue
        dp = _slot_delta(grid, zones, p, o)
        if best_dp is None or dp < best_dp:
            best_p, best_dp = p, dp
    if best_dp is None:
        return None

    # stage 2: dropoff slot q in the stop list that already holds the pickup at best_p
    zones2 = zones[: best_p + 1] + [o] + zones[best_p + 1:]
    best_q, best_dq = -1, None
    for q in range(best_p + 1, n + 2):
        if q > best_p + 1:
            # original stop q-2 now rides between pickup and dropoff
            if loads[q - 2] + size > capacity:
                break
        evaluations += 1
        dq = _slot_delta(grid, zones2, q, d)
        if best_dq is None or dq < best_dq:
            best_q, best_dq = q, dq

    stops = list(route.stops)
    stops.insert(best_p, pick)
    stops.insert(best_q, drop)
    new = Route.__new__(Route)
    new.grid, new.start, new.onboard, new.stops = grid, route.start, route.onboard, stops
    before = route.onboard if best_p == 0 else loads[best_p - 1]
    drop_load = before if best_q == best_p + 1 else loads[best_q - 2]
    new.loads = (loads[:best_p] + [before + size]
                 + [l + size for l in loads[best_p:best_q - 1]]
                 + [drop_load] + loads[best_q - 1:])
    new.cost_cells = route.cost_cells + best_dp + best_dq
    return Insertion(new, (route.cost_cells + best_dp + best_dq) * grid.cell_size,
                     best_p, best_q, evaluations)


def append_request(route: Route, request, capacity: int, pickup_slot: int) -> Optional[Insertion]:
    """Greedy-matching placement without optimisation.

    The pickup goes to ``pickup_slot`` (the engine uses the slot just after the
    last pending pickup) and the dropoff to the end, which yields the
    pickup-everyone-then-drop-everyone order of the greedy batch.
    """
    size = request.passenger_count
    pick = Stop(request.origin, PICKUP, request.id, size)
    drop = Stop(request.destination, DROPOFF, request.id, size)
    stops = list(route.stops)
    stops.insert(pickup_slot, pick)
    stops.append(drop)
    try:
        new = Route(route.grid, route.start, stops, route.onboard)
    except InfeasibleRouteError:
        return None
    if new.max_load() > capacity:
        return None
    return Insertion(new, new.cost, pickup_slot, len(stops) - 1, 1)


def marginal_cost(old: Route, new: Route) -> float:
    """Cost increase (km) from ``old`` to ``new``; both must start at the same zone."""
    if old.start != new.start:
        raise DomainError("routes costed from different vehicle locations")
    return (new.cost_cells - old.cost_cells) * new.grid.cell_size


@dataclass
class AssignmentCost:
    total: float
    route: Route
    skipped: list


def assignment_cost(route: Route, requests: Sequence, capacity: int) -> AssignmentCost:
    """Insert ``requests`` one after another and add up the resulting route costs.

    Requests that cannot be inserted are skipped and listed.
    """
    total = 0.0
    skipped = []
    current = route
    for req in requests:
        ins = insert_request(current, req, capacity)
        if ins is None:
            skipped.append(req)
            continue
        current = ins.route
        total += ins.cost
    return AssignmentCost(total, current, skipped)
