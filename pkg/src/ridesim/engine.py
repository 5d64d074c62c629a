"""Discrete-time fleet simulation.

One tick (``delta_t`` minutes) runs these phases in order:

1. collect new and re-queued requests, expire stale ones;
2. admit newly entered vehicles and relocate them;
3. greedy assignment of waiting requests to nearby vehicles with room;
4. per vehicle (ascending id), per assigned request (nearest first): insert
   into the route, quote, let the customer decide, commit or re-queue;
5. move every vehicle along its route or relocation path;
6. relocate vehicles idle longer than the threshold;
7. retire vehicles past their duty window, learn, append a metrics row.
"""
from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import SimConfig
from .demand import DemandPredictor, RequestStatus, RideRequest, project_supply
from .dispatch import (AgentConfig, QFunction, RewardBreakdown, compute_reward, dispatch_idle,
                       fleet_planes, greedy_values)
from .errors import ConfigError, InvariantViolation
from .geo import ZoneGrid, build_grid
from .matching import PICKUP, greedy_assign
from .pricing import (HotspotList, Quote, VehicleType, build_hotspots, customer_decide, customer_utility,
                      quote, sharing_count)
from .routing import Insertion, Route, append_request, insert_request

logger = logging.getLogger(__name__)
trace = logging.getLogger("ridesim.trace")

REJECT_RADIUS = "radius"
REJECT_CUSTOMER = "customer"
EXPIRED = "expired"
DEGENERATE = "degenerate"


class VStatus(str, enum.Enum):
    WAITING = "waiting"  # not yet entered
    IDLE = "idle"
    DISPATCHING = "dispatching"
    SERVING = "serving"
    EXITED = "exited"


@dataclass
class Offer:
    insertion: Insertion
    quote: Quote
    utility: float  # nan when pricing is off
    accept: bool


@dataclass
class Transition:
    """An open relocation decision. Reward components collected ``k`` ticks
    after the decision enter with weight ``eta**k``."""
    window: np.ndarray
    action: int
    reward: RewardBreakdown
    weight: float = 1.0
    started: int = 0  # tick of the decision


class VehicleState:
    def __init__(self, vid: int, vtype: VehicleType, zone: int, grid: ZoneGrid,
                 entered_at: float, exits_at: float):
        self.id = vid
        self.vtype = vtype
        self.grid = grid
        self.zone = zone
        self.route = Route(grid, zone)
        self.status = VStatus.WAITING
        self.entered_at = entered_at
        self.exits_at = exits_at
        self.fresh = False
        self.target: Optional[int] = None  # relocation destination
        self.progress = 0.0  # km travelled towards next_cell
        self.next_cell: Optional[int] = None
        self.idle_duration = 0.0
        self.riders: dict[str, RideRequest] = {}
        self.earnings = 0.0
        self.distance = 0.0
        self.duty_minutes = 0.0
        self.occupied_minutes = 0.0
        self.idle_minutes = 0.0
        self.dispatch_minutes = 0.0
        self.completed = 0
        self.pending: Optional[Transition] = None

    # -- views used by matching, supply projection and dispatch ------------
    @property
    def capacity(self) -> int:
        return self.vtype.capacity

    @property
    def onboard(self) -> int:
        return self.route.onboard

    @property
    def load(self) -> int:
        """Riders on board plus riders committed but not yet picked up."""
        return self.route.onboard + sum(s.passengers for s in self.route.stops if s.kind == PICKUP)

    @property
    def active(self) -> bool:
        return self.status not in (VStatus.WAITING, VStatus.EXITED)

    @property
    def is_idle(self) -> bool:
        return self.status == VStatus.IDLE

    def availability(self, speed: float):
        if self.status == VStatus.SERVING:
            remaining = max(self.route.cost - self.progress, 0.0)
            return self.route.stops[-1].zone, remaining / speed * 60.0
        if self.status == VStatus.DISPATCHING:
            remaining = max(self.grid.cells_between(self.zone, self.target) * self.grid.cell_size - self.progress, 0.0)
            return self.target, remaining / speed * 60.0
        if self.status == VStatus.IDLE:
            return self.zone, 0.0
        return None

    def drop_estimates(self, now: float, speed: float) -> dict:
        """Estimated absolute drop-off minute of every rider in the route."""
        out = {}
        for s, cells in zip(self.route.stops, self.route.arrival_cells()):
            if s.kind != PICKUP:
                out[s.request_id] = now + cells * self.grid.cell_size / speed * 60.0
        return out

    def refresh_status(self):
        if not self.active:
            return
        if self.route.stops:
            self.status = VStatus.SERVING
        elif self.target is not None:
            self.status = VStatus.DISPATCHING
        else:
            self.status = VStatus.IDLE

    def summary(self, gas_price: float) -> dict:
        fuel = self.distance / self.vtype.mileage * gas_price
        return {
            "id": self.id, "type": self.vtype.type_id, "entered_at": self.entered_at,
            "exits_at": self.exits_at, "duty_minutes": self.duty_minutes,
            "occupied_minutes": self.occupied_minutes, "idle_minutes": self.idle_minutes,
            "dispatch_minutes": self.dispatch_minutes, "riders_served": self.completed,
            "earnings": self.earnings, "distance_km": self.distance, "fuel_cost": fuel,
            "profit": self.earnings - fuel,
        }


METRIC_COLUMNS = (
    "t", "new_requests", "total_requests", "accepted", "rejected_radius", "rejected_customer",
    "expired", "degenerate", "waiting", "accept_rate", "tick_requests", "tick_accepted",
    "pickups", "completed", "mean_wait_s", "active_vehicles", "occupied_vehicles",
    "serving_vehicles", "idle_vehicles", "dispatching_vehicles", "onboard_riders",
    "earnings", "distance_km", "fuel_cost", "profit", "supply_demand_diff", "dispatches",
    "customer_rejections", "td_loss",
)


@dataclass
class Counters:
    total: int = 0
    accepted: int = 0
    radius: int = 0
    customer: int = 0
    expired: int = 0
    degenerate: int = 0
    pickups: int = 0
    completed: int = 0
    wait_sum: float = 0.0  # minutes
    boarded: int = 0  # riders (passengers), for conservation checks
    alighted: int = 0
    dispatches: int = 0
    customer_rejections: int = 0  # individual quote refusals, including re-queued ones


@dataclass
class RunResult:
    config: SimConfig
    metrics: list  # rows of METRIC_COLUMNS
    vehicles: list  # per-vehicle summary dicts
    requests: list  # RideRequest objects
    agent: Optional[QFunction] = None
    qmax_curve: list = field(default_factory=list)


class World:
    def __init__(self, cfg: SimConfig, requests: Optional[list] = None, agent: Optional[QFunction] = None,
                 history: Optional[list] = None, grid: Optional[ZoneGrid] = None,
                 vehicles: Optional[list] = None):
        cfg.validate()
        self.cfg = cfg
        self.grid = grid or build_grid(cfg.rows, cfg.cols, cfg.cell_size)
        self.t = 0.0
        self.tick = 0
        self.requests = sorted(requests or [], key=lambda r: (r.request_time, r.id))
        self._next_request = 0
        self.queue: list[RideRequest] = []
        self.counters = Counters()
        self.metrics: list[list] = []
        root = np.random.SeedSequence(cfg.seed)
        fleet_ss, policy_ss, learn_ss = root.spawn(3)
        self.rng_fleet = np.random.default_rng(fleet_ss)
        self.rng_policy = np.random.default_rng(policy_ss)
        self.rng_learn = np.random.default_rng(learn_ss)
        self.vehicles = vehicles if vehicles is not None else self._make_fleet()
        self.predictor = DemandPredictor(self.grid.n_zones, cfg.bin_minutes)
        for day, counts in history or []:
            self.predictor.observe_counts(day, counts)
        self.agent = agent
        if self.agent is None and (cfg.dispatch or cfg.learn):
            self.agent = QFunction(agent_config(cfg))
        self.hotspots: Optional[HotspotList] = None
        self._planes = None
        self._forecasts = None
        self.losses: list = []

    # -- setup ---------------------------------------------------------------
    def _make_fleet(self) -> list:
        cfg = self.cfg
        n = cfg.fleet_size
        rng = self.rng_fleet
        entry = np.floor(rng.uniform(0.0, cfg.entry_minutes, size=n)) if cfg.entry_minutes > 0 else np.zeros(n)
        zones = rng.integers(self.grid.n_zones, size=n)
        types = rng.integers(len(cfg.vehicle_types), size=n)
        duty = cfg.duty_hours * 60.0
        return [VehicleState(i, cfg.vehicle_types[int(types[i])], int(zones[i]), self.grid,
                             float(entry[i]), float(entry[i]) + duty) for i in range(n)]

    # -- forecasts -------------------------------------------------------------
    def forecasts(self, t: Optional[float] = None):
        t = self.t if t is None else t
        if self._forecasts is None or self._forecasts[0].t != t:
            cfg = self.cfg
            active = [v for v in self.vehicles if v.active]
            d = self.predictor.forecast(t, cfg.horizon, cfg.delta_t)
            s = project_supply(active, t, cfg.horizon, self.grid.n_zones, cfg.speed, cfg.delta_t)
            self._forecasts = (d, s)
            self._planes = None
        return self._forecasts

    def planes(self, t: Optional[float] = None):
        d, s = self.forecasts(t)
        if self._planes is None:
            self._planes = fleet_planes(d, s, self.grid)
        return self._planes

    def refresh_hotspots(self):
        if self.agent is not None:
            planes = self.planes()
            windows = all_zone_windows(planes.planes, self.agent.crop)
            values = greedy_values(self.agent, windows)
        else:
            values = self.planes().planes[0].reshape(-1)
        self.hotspots = build_hotspots(values, self.cfg.lam)

    # -- tick phases -------------------------------------------------------------
    def step(self):
        cfg = self.cfg
        now, dt = self.t, cfg.delta_t
        self._planes = None
        self._forecasts = None
        tick_new = self._collect(now, dt)
        tick_accepted_before = self.counters.accepted
        tick_total_before = len(tick_new)

        # 2. admit and relocate new vehicles
        fresh = []
        for v in self.vehicles:
            if v.status == VStatus.WAITING and v.entered_at <= now:
                v.status = VStatus.IDLE
                v.fresh = True
                fresh.append(v)
        if fresh:
            if cfg.dispatch:
                self._dispatch(fresh, now)
            for v in fresh:
                v.fresh = False

        if cfg.pricing and (self.hotspots is None or self.tick % cfg.hotspot_refresh == 0):
            self.refresh_hotspots()

        # 3-4. match, price, decide
        self._match(now)

        # 5. move
        for v in self.vehicles:
            if v.active:
                self.advance_vehicle(v, dt, now)

        # 6. relocate long-idle vehicles
        if cfg.dispatch:
            idle = [v for v in self.vehicles if v.is_idle and v.idle_duration > cfg.idle_threshold
                    and now + dt < v.exits_at]
            if idle:
                self._forecasts = None
                self._dispatch(idle, now + dt)

        # 7. exits, learning, metrics
        for v in self.vehicles:
            if v.active and now + dt >= v.exits_at:
                if v.target is not None and not v.route.stops:
                    v.target = None
                    v.refresh_status()
                if not v.route.stops:
                    self._retire(v)
        loss = None
        if cfg.learn and self.agent is not None:
            for _ in range(cfg.updates_per_tick):
                l = self.agent.learn(self.rng_learn)
                if l is not None:
                    loss = l if loss is None else loss + l
            if loss is not None:
                loss /= cfg.updates_per_tick
                self.losses.append(loss)
        eta = cfg.discount
        for v in self.vehicles:
            if v.pending is not None and v.pending.started <= self.tick:
                v.pending.weight *= eta
        self._check_invariants()
        self._record(now, tick_new, tick_total_before, self.counters.accepted - tick_accepted_before, loss)
        self.tick += 1
        self.t = now + dt

    def _collect(self, now, dt) -> list:
        cfg = self.cfg
        new = []
        while self._next_request < len(self.requests) and self.requests[self._next_request].request_time < now + dt:
            r = self.requests[self._next_request]
            self._next_request += 1
            self.counters.total += 1
            self.predictor.observe(r)
            if r.degenerate:
                r.reject(DEGENERATE)
                self.counters.degenerate += 1
                continue
            new.append(r)
        kept = []
        for r in self.queue:
            if now - r.request_time > r.delay_tolerance:
                r.reject(EXPIRED)
                self.counters.expired += 1
            else:
                kept.append(r)
        self.queue = kept + new
        return new

    def _available(self, now) -> list:
        cfg = self.cfg
        out = []
        for v in self.vehicles:
            if not v.active or now >= v.exits_at:
                continue
            if cfg.ridesharing:
                if v.load < v.capacity:
                    out.append(v)
            elif not v.route.stops:
                out.append(v)
        return out

    def _match(self, now):
        cfg = self.cfg
        if not self.queue:
            return
        fleet = self._available(now)
        result = greedy_assign(self.queue, fleet, self.grid, cfg.radius_km, pooling=cfg.ridesharing)
        for r in result.rejected:
            r.reject(REJECT_RADIUS)
            self.counters.radius += 1
        requeue = []
        by_id = {v.id: v for v in fleet}
        for vid in sorted(result.lists):
            v = by_id[vid]
            slot = greedy_slot(v.route)
            for r in result.lists[vid]:
                if self._offer(v, r, now, slot):
                    slot += 1
                else:
                    requeue.append(r)
        for r in requeue:
            r.rejection_count += 1
            if r.rejection_count > cfg.max_requeues:
                r.reject(REJECT_CUSTOMER)
                self.counters.customer += 1
        self.queue = sorted((r for r in requeue if r.status == RequestStatus.WAITING),
                            key=lambda r: (r.request_time, r.id))

    def quote_for(self, v: VehicleState, r: RideRequest, now: float, slot: Optional[int] = None) -> Optional[Offer]:
        """Insert ``r`` into a copy of ``v``'s route, price it and ask the customer.

        Nothing is committed. ``slot`` is the greedy pickup position used when
        insertion optimisation is off. Returns None when the request does not fit.
        """
        cfg = self.cfg
        cap = v.capacity
        if cfg.darm:
            ins = insert_request(v.route, r, cap)
        else:
            ins = append_request(v.route, r, cap, greedy_slot(v.route) if slot is None else slot)
        if ins is None:
            return None
        new = ins.route
        marginal = (new.cost_cells - v.route.cost_cells) * self.grid.cell_size
        share = sharing_count(new, r.id)
        pickup_cells = new.cells_until(ins.pickup_index)
        eta = max(pickup_cells * self.grid.cell_size - (v.progress if pickup_cells else 0.0), 0.0) / cfg.speed * 60.0
        waiting = (now - r.request_time) + eta
        hot = self.hotspots if cfg.pricing else None
        q = quote(r, v.vtype, marginal, share, waiting, hot, cfg.gas_price)
        utility = float("nan")
        if cfg.pricing:
            occupancy = new.loads[ins.pickup_index]
            utility = customer_utility(occupancy, waiting, v.vtype.type_id,
                                       _pick(r.pooling_weight, cfg.omega4), _pick(r.delay_weight, cfg.omega5),
                                       _pick(r.vehicle_type_weight, cfg.omega6))
            accept = customer_decide(utility, q.price, _pick(r.delta, cfg.delta))
        else:
            accept = True
        return Offer(ins, q, utility, accept)

    def _offer(self, v: VehicleState, r: RideRequest, now: float, slot: int) -> bool:
        """Quote ``r`` on ``v`` and commit on acceptance."""
        offer = self.quote_for(v, r, now, slot)
        if offer is None:
            trace.debug("t=%s vehicle %s cannot fit request %s", now, v.id, r.id)
            return False
        q = offer.quote
        trace.debug("t=%s quote vehicle=%s request=%s p_init=%.4f p=%.4f accept=%s",
                    now, v.id, r.id, q.initial_price, q.price, offer.accept)
        if not offer.accept:
            self.counters.customer_rejections += 1
            return False
        self._commit(v, r, offer.insertion.route, q.price, now)
        return True

    def _commit(self, v: VehicleState, r: RideRequest, new: Route, price: float, now: float):
        cfg = self.cfg
        before = v.drop_estimates(now, cfg.speed)
        v.route = new
        after = v.drop_estimates(now, cfg.speed)
        extra = sum(max(after[k] - before[k], 0.0) for k in before)
        r.solo_minutes = self.grid.cells_between(r.origin, r.destination) * self.grid.cell_size / cfg.speed * 60.0
        for k, est in after.items():
            rider = v.riders.get(k, r if k == r.id else None)
            if rider is not None:
                rider.xi = est - rider.request_time - rider.solo_minutes
        r.advance(RequestStatus.MATCHED)
        r.vehicle_id = v.id
        r.fare = price
        v.riders[r.id] = r
        if v.target is not None:
            v.target = None
        v.idle_duration = 0.0
        v.refresh_status()
        if v.pending is not None:
            v.pending.reward.extra_delay += extra * v.pending.weight
        self.counters.accepted += 1

    def _dispatch(self, vehicles, now):
        agent = self.agent
        planes = self.planes(now)
        decisions = dispatch_idle(vehicles, planes, agent, self.grid, self.rng_policy,
                                  self.cfg.idle_threshold, greedy=not self.cfg.learn)
        by_id = {v.id: v for v in vehicles}
        for d in decisions:
            v = by_id[d.vehicle_id]
            self._close_transition(v, d.window, done=False)
            v.pending = Transition(d.window, d.action, RewardBreakdown(mileage=v.vtype.mileage,
                                                                        gas_price=self.cfg.gas_price),
                                   started=self.tick if now == self.t else self.tick + 1)
            v.idle_duration = 0.0
            if d.target != v.zone:
                v.target = d.target
            v.refresh_status()
            self.counters.dispatches += 1

    def _close_transition(self, v: VehicleState, next_window, done: bool):
        if v.pending is None:
            return
        if self.cfg.learn and self.agent is not None:
            r = compute_reward(v.pending.reward, self.cfg.betas)
            s2 = v.pending.window if next_window is None else next_window
            self.agent.remember(v.pending.window, v.pending.action, r, s2, done, v.pending.weight)
        v.pending = None

    def _retire(self, v: VehicleState):
        self._close_transition(v, None, done=True)
        v.status = VStatus.EXITED
        v.target = None

    # -- movement ----------------------------------------------------------------
    def advance_vehicle(self, v: VehicleState, dt: float, now: float):
        """Drive for ``dt`` minutes, serving stops reached on the way."""
        cfg = self.cfg
        grid = self.grid
        kmpm = cfg.speed / 60.0
        budget = kmpm * dt
        used = 0.0
        while True:
            if v.route.stops:
                dest = v.route.stops[0].zone
            elif v.target is not None:
                dest = v.target
            else:
                break
            if v.zone == dest:
                if v.route.stops:
                    self._serve_stop(v, now + used / kmpm)
                else:
                    v.target = None
                    v.idle_duration = 0.0
                v.refresh_status()
                continue
            if budget <= 1e-12:
                break
            nxt = _next_cell(grid, v.zone, dest)
            if nxt != v.next_cell:
                v.next_cell = nxt
                v.progress = 0.0
            need = grid.cell_size - v.progress
            if budget + 1e-9 >= need:
                budget -= need
                used += need
                v.distance += need
                self._add_km(v, need)
                v.zone = nxt
                v.progress = 0.0
                v.next_cell = None
                if v.route.stops:
                    v.route.move_to(nxt)
                else:
                    v.route = Route(grid, nxt, onboard=v.route.onboard)
            else:
                v.progress += budget
                v.distance += budget
                self._add_km(v, budget)
                used += budget
                budget = 0.0
        if not v.route.stops:
            v.route.start = v.zone
        v.refresh_status()
        # time accounting for the tick
        v.duty_minutes += dt
        if v.route.onboard > 0:
            v.occupied_minutes += dt
        if v.status == VStatus.IDLE:
            v.idle_minutes += dt
            v.idle_duration += dt
        elif v.status == VStatus.DISPATCHING:
            v.dispatch_minutes += dt
            if v.pending is not None:
                v.pending.reward.dispatch_minutes += dt * v.pending.weight

    def _add_km(self, v, km):
        if v.pending is not None:
            v.pending.reward.distance += km * v.pending.weight

    def _serve_stop(self, v: VehicleState, when: float):
        was_empty = v.route.onboard == 0
        stop = v.route.pop_front()
        r = v.riders[stop.request_id]
        if stop.kind == PICKUP:
            r.advance(RequestStatus.ONBOARD)
            r.pickup_time = when
            self.counters.pickups += 1
            self.counters.wait_sum += when - r.request_time
            self.counters.boarded += stop.passengers
            if was_empty and v.pending is not None:
                v.pending.reward.activations += v.pending.weight
        else:
            r.advance(RequestStatus.COMPLETED)
            r.dropoff_time = when
            v.riders.pop(r.id)
            v.earnings += r.fare
            v.completed += 1
            self.counters.completed += 1
            self.counters.alighted += stop.passengers
            if v.pending is not None:
                v.pending.reward.earnings += r.fare * v.pending.weight
                v.pending.reward.served += v.pending.weight
        trace.debug("t=%.3f vehicle %s %s request %s at zone %s", when, v.id, stop.kind, r.id, stop.zone)

    # -- bookkeeping -------------------------------------------------------------
    def _check_invariants(self):
        onboard = 0
        for v in self.vehicles:
            if v.route.onboard > v.capacity or max(v.route.loads, default=0) > v.capacity:
                raise InvariantViolation(f"vehicle {v.id} over capacity: {v.route!r}")
            if v.active and (v.status == VStatus.SERVING) != bool(v.route.stops):
                raise InvariantViolation(f"vehicle {v.id} status {v.status} with route {v.route!r}")
            onboard += v.route.onboard
        c = self.counters
        if c.boarded - c.alighted != onboard:
            raise InvariantViolation(f"rider conservation broken: boarded {c.boarded}, "
                                     f"alighted {c.alighted}, on board {onboard}")
        terminal = c.radius + c.customer + c.expired + c.degenerate
        if c.accepted + terminal + len(self.queue) != c.total:
            raise InvariantViolation("request accounting does not add up")

    def _record(self, now, tick_new, tick_requests, tick_accepted, loss):
        c = self.counters
        active = occupied = serving = idle = disp = riders = 0
        earnings = distance = fuel = 0.0
        for v in self.vehicles:
            earnings += v.earnings
            distance += v.distance
            fuel += v.distance / v.vtype.mileage * self.cfg.gas_price
            if not v.active:
                continue
            active += 1
            riders += v.route.onboard
            occupied += v.route.onboard > 0
            serving += v.status == VStatus.SERVING
            idle += v.status == VStatus.IDLE
            disp += v.status == VStatus.DISPATCHING
        diff = float("nan")
        if self._forecasts is not None:
            d, s = self._forecasts
            diff = float(d.values[0].sum() - s.values[0].sum())
        self.metrics.append([
            now, len(tick_new), c.total, c.accepted, c.radius, c.customer, c.expired, c.degenerate,
            len(self.queue), c.accepted / max(c.total, 1), tick_requests, tick_accepted,
            c.pickups, c.completed, (c.wait_sum / c.pickups * 60.0) if c.pickups else 0.0,
            active, occupied, serving, idle, disp, riders, earnings, distance, fuel, earnings - fuel,
            diff, c.dispatches, c.customer_rejections, float("nan") if loss is None else loss,
        ])

    def run(self, steps: Optional[int] = None, probe=None, probe_every: int = 0) -> RunResult:
        steps = self.cfg.steps if steps is None else steps
        curve = []
        for _ in range(steps):
            self.step()
            if probe is not None and probe_every and self.agent is not None and self.tick % probe_every == 0:
                curve.append((self.agent.updates, probe(self.agent)))
        return self.result(curve)

    def result(self, curve=None) -> RunResult:
        return RunResult(self.cfg, self.metrics, [v.summary(self.cfg.gas_price) for v in self.vehicles],
                         self.requests, self.agent, curve or [])


def greedy_slot(route: Route) -> int:
    """Pickup position without optimisation: after the last pending pickup, so
    the car collects riders in assignment order and then drops them in order."""
    last = -1
    for i, s in enumerate(route.stops):
        if s.kind == PICKUP:
            last = i
    return last + 1


def _pick(override, default):
    return default if override is None else override


def _next_cell(grid: ZoneGrid, a: int, b: int) -> int:
    """One Manhattan step from ``a`` towards ``b``: rows first, then columns."""
    ra, ca = divmod(a, grid.cols)
    rb, cb = divmod(b, grid.cols)
    if ra != rb:
        ra += 1 if rb > ra else -1
    else:
        ca += 1 if cb > ca else -1
    return ra * grid.cols + ca


def all_zone_windows(planes: np.ndarray, size: int) -> np.ndarray:
    """Crop windows centred on every zone, shape (M, planes, size, size)."""
    half = size // 2
    padded = np.pad(planes, ((0, 0), (half, size - half - 1), (half, size - half - 1)))
    win = np.lib.stride_tricks.sliding_window_view(padded, (size, size), axis=(1, 2))
    c, R, C = win.shape[:3]
    return win.transpose(1, 2, 0, 3, 4).reshape(R * C, c, size, size)


def agent_config(cfg: SimConfig) -> AgentConfig:
    return AgentConfig(profile=cfg.profile, crop=cfg.crop if cfg.profile == "compact" else None,
                       hidden=cfg.hidden, discount=cfg.discount, eps_start=cfg.eps_start,
                       eps_end=cfg.eps_end, eps_span=cfg.eps_span, lr_start=cfg.lr_start,
                       lr_end=cfg.lr_end, lr_span=cfg.lr_span, replay_capacity=cfg.replay_capacity,
                       batch_size=cfg.batch_size, target_sync=cfg.target_sync, grad_clip=cfg.grad_clip,
                       reward_scale=cfg.reward_scale, seed=cfg.seed)


def make_world(cfg: SimConfig, agent: Optional[QFunction] = None, seed: Optional[int] = None) -> World:
    """World with the configured scenario's demand and predictor history."""
    from .scenarios import build_requests, history_counts
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    grid = build_grid(cfg.rows, cfg.cols, cfg.cell_size)
    if agent is None and cfg.checkpoint and (cfg.dispatch or cfg.pricing):
        agent = QFunction.load(cfg.checkpoint, grid)
    return World(cfg, build_requests(cfg, grid), agent, history_counts(cfg, grid), grid)


def run(cfg: SimConfig, agent: Optional[QFunction] = None) -> RunResult:
    return make_world(cfg, agent).run()


# -- output ----------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isnan(x):
        return ""
    return f"{x:.6f}"


def write_metrics(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def read_metrics(path) -> list:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.DictReader(fh)
        for rec in r:
            rows.append({k: (float(v) if v != "" else float("nan")) for k, v in rec.items()})
    return rows


VEHICLE_COLUMNS = ("id", "type", "entered_at", "exits_at", "duty_minutes", "occupied_minutes",
                   "idle_minutes", "dispatch_minutes", "riders_served", "earnings", "distance_km",
                   "fuel_cost", "profit")

REQUEST_COLUMNS = ("id", "request_time", "origin", "destination", "passengers", "status", "reason",
                   "vehicle", "pickup_time", "dropoff_time", "wait_s", "fare", "rejections")


def write_vehicles(path, vehicles):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VEHICLE_COLUMNS)
        for v in vehicles:
            w.writerow([_fmt(v[k]) for k in VEHICLE_COLUMNS])


def write_requests(path, requests):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REQUEST_COLUMNS)
        for r in requests:
            wait = "" if r.pickup_time is None else _fmt((r.pickup_time - r.request_time) * 60.0)
            w.writerow([r.id, _fmt(float(r.request_time)), r.origin, r.destination, r.passenger_count,
                        r.status.value, r.rejection_reason or "",
                        "" if r.vehicle_id is None else r.vehicle_id,
                        "" if r.pickup_time is None else _fmt(r.pickup_time),
                        "" if r.dropoff_time is None else _fmt(r.dropoff_time),
                        wait, _fmt(float(r.fare)), r.rejection_count])


def read_table(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
