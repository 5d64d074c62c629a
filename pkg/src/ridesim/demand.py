"""Ride requests: CSV ingestion, synthetic generation, demand and supply forecasts."""
from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .geo import ZoneGrid

logger = logging.getLogger(__name__)

DAY_MINUTES = 1440
DEFAULT_HORIZON = 30
DEFAULT_BIN_MINUTES = 30
DEFAULT_DELAY_TOLERANCE = 10.0
MAX_REQUEUES = 3

# share of parties of size 1..4 in the synthetic generator
PARTY_SIZE_P = (0.75, 0.15, 0.07, 0.03)


class RequestStatus(str, enum.Enum):
    WAITING = "waiting"
    MATCHED = "matched"
    ONBOARD = "onboard"
    COMPLETED = "completed"
    REJECTED = "rejected"


_FORWARD = {
    RequestStatus.WAITING: {RequestStatus.MATCHED, RequestStatus.REJECTED},
    RequestStatus.MATCHED: {RequestStatus.ONBOARD, RequestStatus.REJECTED},
    RequestStatus.ONBOARD: {RequestStatus.COMPLETED},
    RequestStatus.COMPLETED: set(),
    RequestStatus.REJECTED: set(),
}


@dataclass(eq=False)
class RideRequest:
    id: str
    request_time: float  # minutes since simulation start
    origin: int
    destination: int
    passenger_count: int = 1
    delay_tolerance: float = DEFAULT_DELAY_TOLERANCE
    # customer preference weights; None means "use the configured default"
    pooling_weight: Optional[float] = None
    delay_weight: Optional[float] = None
    vehicle_type_weight: Optional[float] = None
    delta: Optional[float] = None
    degenerate: bool = False
    status: RequestStatus = RequestStatus.WAITING
    rejection_count: int = 0
    rejection_reason: Optional[str] = None
    # filled in by the engine
    vehicle_id: Optional[int] = None
    pickup_time: Optional[float] = None
    dropoff_time: Optional[float] = None
    fare: float = 0.0
    solo_minutes: float = 0.0  # direct origin-destination drive time
    xi: float = 0.0  # elapsed + remaining ride time minus the solo drive time

    def __post_init__(self):
        if self.passenger_count < 1:
            raise ValueError("passenger_count < 1")
        if self.origin == self.destination:
            self.degenerate = True

    def advance(self, new: RequestStatus):
        if new not in _FORWARD[self.status]:
            raise ValueError(f"request {self.id}: illegal transition {self.status.value} -> {new.value}")
        self.status = new

    def reject(self, reason: str):
        self.advance(RequestStatus.REJECTED)
        self.rejection_reason = reason

    @property
    def waiting_time(self) -> Optional[float]:
        if self.pickup_time is None:
            return None
        return self.pickup_time - self.request_time


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

TRIP_COLUMNS = ("id", "request_time", "passengers", "origin_row", "origin_col", "dest_row", "dest_col")
OPTIONAL_COLUMNS = ("delay_tolerance", "delta")


@dataclass
class IngestReport:
    requests: list = field(default_factory=list)
    rejects: list = field(default_factory=list)  # (line number, raw row, reason)
    snapped: list = field(default_factory=list)  # ids clamped into the grid


def _parse_time(raw: str) -> float | datetime:
    raw = raw.strip()
    try:
        return float(raw)
    except ValueError:
        return datetime.fromisoformat(raw)


def ingest_trips(source, grid: ZoneGrid, start: Optional[datetime] = None,
                 delay_tolerance: float = DEFAULT_DELAY_TOLERANCE) -> IngestReport:
    """Parse a trip CSV (path, text stream or iterable of lines) into requests.

    Bad rows go to ``report.rejects`` and parsing continues. ISO timestamps are
    converted to minutes after ``start`` (default: midnight of the earliest
    timestamp in the file). Output is sorted by request time, then id.
    """
    if isinstance(source, (str, bytes)) and not isinstance(source, io.IOBase):
        with open(source, newline="", encoding="utf-8") as fh:
            return ingest_trips(fh, grid, start, delay_tolerance)

    reader = csv.reader(source)
    report = IngestReport()
    header = None
    parsed = []
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if header is None and row[0].strip().lower() == "id":
            header = [c.strip().lower() for c in row]
            missing = [c for c in TRIP_COLUMNS if c not in header]
            if missing:
                raise ConfigError(f"trip file header lacks columns {missing}")
            continue
        cols = header or list(TRIP_COLUMNS + OPTIONAL_COLUMNS)[: len(row)]
        rec = dict(zip(cols, (c.strip() for c in row)))
        try:
            if len(row) < len(TRIP_COLUMNS):
                raise ValueError(f"expected at least {len(TRIP_COLUMNS)} fields, got {len(row)}")
            passengers = int(rec["passengers"])
            if passengers < 1:
                raise ValueError("passenger_count < 1")
            when = _parse_time(rec["request_time"])
            coords = [float(rec[k]) for k in ("origin_row", "origin_col", "dest_row", "dest_col")]
            if not all(math.isfinite(c) for c in coords):
                raise ValueError("non-finite coordinate")
            tol = float(rec["delay_tolerance"]) if rec.get("delay_tolerance") else delay_tolerance
            delta = float(rec["delta"]) if rec.get("delta") else None
            if tol < 0:
                raise ValueError("delay_tolerance < 0")
        except (ValueError, KeyError) as exc:
            report.rejects.append((lineno, row, str(exc)))
            continue
        parsed.append((rec["id"], when, passengers, coords, tol, delta))

    stamps = [p[1] for p in parsed if isinstance(p[1], datetime)]
    if stamps and start is None:
        first = min(stamps)
        start = first.replace(hour=0, minute=0, second=0, microsecond=0)

    for rid, when, passengers, coords, tol, delta in parsed:
        if isinstance(when, datetime):
            minutes = (when - start).total_seconds() / 60.0
        else:
            minutes = when
        o, o_out = grid.snap(coords[0], coords[1])
        d, d_out = grid.snap(coords[2], coords[3])
        if o_out or d_out:
            report.snapped.append(rid)
        report.requests.append(RideRequest(rid, minutes, o, d, passengers, tol, delta=delta))

    report.requests.sort(key=lambda r: (r.request_time, r.id))
    if report.rejects:
        logger.warning("ingest: %d malformed rows skipped", len(report.rejects))
    return report


def write_trips(path, requests: Iterable[RideRequest], grid: ZoneGrid):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRIP_COLUMNS + OPTIONAL_COLUMNS)
        for r in requests:
            orow, ocol = grid.coords(r.origin)
            drow, dcol = grid.coords(r.destination)
            w.writerow([r.id, repr(r.request_time), r.passenger_count, orow, ocol, drow, dcol,
                        repr(r.delay_tolerance), "" if r.delta is None else repr(r.delta)])


# ---------------------------------------------------------------------------
# synthetic demand
# ---------------------------------------------------------------------------

@dataclass
class RateProfile:
    """Poisson intensity: ``base[z] * time_of_day[bin]`` requests per minute.

    ``time_of_day`` splits the day into equal bins (e.g. 24 hourly factors).
    ``destination_weights`` (default uniform) steer where trips end.
    """
    base: np.ndarray
    time_of_day: np.ndarray = field(default_factory=lambda: np.ones(1))
    destination_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        self.time_of_day = np.asarray(self.time_of_day, dtype=float)
        if (self.base < 0).any() or (self.time_of_day < 0).any():
            raise ConfigError("demand rates must be non-negative")
        if not np.isfinite(self.base).all() or not np.isfinite(self.time_of_day).all():
            raise ConfigError("demand rates must be finite")
        if self.destination_weights is not None:
            self.destination_weights = np.asarray(self.destination_weights, dtype=float)
            if (self.destination_weights < 0).any():
                raise ConfigError("destination weights must be non-negative")

    def rates_at(self, minute: float) -> np.ndarray:
        nb = len(self.time_of_day)
        b = int((minute % DAY_MINUTES) // (DAY_MINUTES / nb))
        return self.base * self.time_of_day[b]


def generate_synthetic(grid: ZoneGrid, profile: RateProfile, duration: int, seed: int,
                       start: int = 0, id_prefix: str = "s",
                       delay_tolerance: float = DEFAULT_DELAY_TOLERANCE) -> list[RideRequest]:
    """Sample a Poisson request stream, one draw per zone per minute.

    Deterministic for a fixed ``seed``.
    """
    if len(profile.base) != grid.n_zones:
        raise ConfigError(f"rate profile has {len(profile.base)} zones, grid has {grid.n_zones}")
    rng = np.random.default_rng(seed)
    minutes = np.arange(start, start + duration)
    nb = len(profile.time_of_day)
    bins = ((minutes % DAY_MINUTES) // (DAY_MINUTES // nb if DAY_MINUTES % nb == 0 else DAY_MINUTES / nb)).astype(int)
    lam = profile.time_of_day[bins][:, None] * profile.base[None, :]
    counts = rng.poisson(lam)
    total = int(counts.sum())
    if total == 0:
        return []
    tt, zz = np.nonzero(counts)
    reps = counts[tt, zz]
    t_idx = np.repeat(tt, reps)
    origins = np.repeat(zz, reps)
    offsets = rng.random(total)
    times = minutes[t_idx] + offsets
    order = np.lexsort((origins, times))
    times, origins = times[order], origins[order]

    M = grid.n_zones
    w = profile.destination_weights if profile.destination_weights is not None else np.ones(M)
    if M == 1:
        dests = origins.copy()
    else:
        # sample from w with the origin excluded
        cw = np.cumsum(w)
        u = rng.random(total)
        dests = np.empty(total, dtype=int)
        for k in range(total):
            o = origins[k]
            mass = cw[-1] - w[o]
            if mass <= 0:
                dests[k] = (o + 1) % M
                continue
            x = u[k] * mass
            # position in the cumulative sum with w[o] removed
            j = int(np.searchsorted(cw, x, side="right"))
            if j >= o:
                j = int(np.searchsorted(cw, x + w[o], side="right"))
            dests[k] = min(j, M - 1)
    sizes = rng.choice(np.arange(1, len(PARTY_SIZE_P) + 1), size=total, p=PARTY_SIZE_P)
    width = max(6, len(str(total)))
    return [RideRequest(f"{id_prefix}{k:0{width}d}", float(times[k]), int(origins[k]), int(dests[k]),
                        int(sizes[k]), delay_tolerance)
            for k in range(total)]


# ---------------------------------------------------------------------------
# forecasts
# ---------------------------------------------------------------------------

@dataclass
class DemandForecast:
    """Expected new requests per zone for each step ``t, t+dt, ..., t+T*dt``."""
    values: np.ndarray  # (T+1, M)
    t: float
    dt: float = 1.0
    cold_start: bool = False

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1


@dataclass
class SupplyForecast:
    """Vehicles available per zone for each step ``t .. t+T*dt``."""
    values: np.ndarray  # (T+1, M)
    t: float
    dt: float = 1.0

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1


class DemandPredictor:
    """Historical-average forecaster over zone x time-of-day bins.

    The expected count for a future minute is the mean per-minute count seen in
    the same bin on earlier days. With no earlier day on record the global
    per-minute mean of everything observed so far is used; with no history at
    all the forecast is zero and flagged cold-start.
    """

    def __init__(self, n_zones: int, bin_minutes: int = DEFAULT_BIN_MINUTES, history_start: float = 0.0):
        if DAY_MINUTES % bin_minutes:
            raise ConfigError("bin_minutes must divide 1440")
        self.n_zones = n_zones
        self.bin_minutes = bin_minutes
        self.n_bins = DAY_MINUTES // bin_minutes
        self.history_start = history_start
        self._days: dict[int, np.ndarray] = {}
        self._total = np.zeros(n_zones)
        self._last_seen = history_start
        self._cache_day = None
        self._cache = None

    def observe(self, request: RideRequest):
        self.observe_at(request.request_time, request.origin)

    def observe_at(self, minute: float, zone: int, count: float = 1.0):
        day = int(minute // DAY_MINUTES)
        b = int((minute % DAY_MINUTES) // self.bin_minutes)
        arr = self._days.get(day)
        if arr is None:
            arr = self._days[day] = np.zeros((self.n_bins, self.n_zones))
        arr[b, zone] += count
        self._total[zone] += count
        self._last_seen = max(self._last_seen, minute)
        if self._cache_day is not None and day < self._cache_day:
            self._cache_day = None

    def observe_counts(self, day: int, counts: np.ndarray):
        """Bulk-load one day of per-minute origin counts, shape (1440, M)."""
        counts = np.asarray(counts, dtype=float)
        binned = counts.reshape(self.n_bins, self.bin_minutes, self.n_zones).sum(axis=1)
        arr = self._days.setdefault(day, np.zeros((self.n_bins, self.n_zones)))
        arr += binned
        self._total += binned.sum(axis=0)
        self.history_start = min(self.history_start, day * DAY_MINUTES)
        self._cache_day = None

    def _prior(self, day: int):
        if self._cache_day != day:
            first = int(self.history_start // DAY_MINUTES)
            n_days = max(day - first, 0)
            acc = np.zeros((self.n_bins, self.n_zones))
            for d, arr in self._days.items():
                if d < day:
                    acc += arr
            self._cache = (n_days, acc)
            self._cache_day = day
        return self._cache

    def forecast(self, t: float, horizon: int = DEFAULT_HORIZON, dt: float = 1.0) -> DemandForecast:
        minutes = t + dt * np.arange(horizon + 1)
        n_days, acc = self._prior(int(t // DAY_MINUTES))
        if n_days > 0:
            bins = ((minutes % DAY_MINUTES) // self.bin_minutes).astype(int)
            per_min = acc / (n_days * self.bin_minutes)
            values = per_min[bins] * dt
            return DemandForecast(values, t, dt)
        elapsed = t - self.history_start
        if self._total.sum() == 0 or elapsed <= 0:
            return DemandForecast(np.zeros((horizon + 1, self.n_zones)), t, dt, cold_start=True)
        rate = self._total / elapsed * dt
        return DemandForecast(np.tile(rate, (horizon + 1, 1)), t, dt)


def predict_demand(history: Iterable[RideRequest], t: float, horizon: int, n_zones: int,
                   bin_minutes: int = DEFAULT_BIN_MINUTES, history_start: float = 0.0,
                   dt: float = 1.0) -> DemandForecast:
    """Forecast from a request log (only requests strictly before ``t`` are used)."""
    pred = DemandPredictor(n_zones, bin_minutes, history_start)
    for r in history:
        if r.request_time < t:
            pred.observe(r)
    return pred.forecast(t, horizon, dt)


def project_supply(fleet: Iterable, t: float, horizon: int, n_zones: int, speed: float,
                   dt: float = 1.0) -> SupplyForecast:
    """Project where vehicles become available over the next ``horizon`` steps.

    Each fleet item supplies ``availability(speed) -> (zone, minutes)``: the zone
    where it frees up and how long until then (0 for an idle vehicle), or
    ``None`` when it cannot be projected. ``exits_at`` (minutes) removes it
    from the count at its exit step.
    """
    diff = np.zeros((horizon + 2, n_zones))
    for v in fleet:
        try:
            proj = v.availability(speed)
        except Exception:  # corrupt route: skip, keep projecting the rest
            logger.exception("supply projection skipped vehicle %s", getattr(v, "id", "?"))
            continue
        if proj is None:
            continue
        zone, minutes = proj
        k0 = max(int(math.ceil(minutes / dt - 1e-9)), 0)
        exits_at = getattr(v, "exits_at", None)
        k1 = horizon + 1
        if exits_at is not None:
            k1 = min(k1, max(int(math.ceil((exits_at - t) / dt - 1e-9)), 0))
        if k0 >= k1:
            continue
        diff[k0, zone] += 1
        diff[k1, zone] -= 1
    values = np.cumsum(diff, axis=0)[: horizon + 1]
    return SupplyForecast(values, t, dt)
