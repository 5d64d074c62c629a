"""Trip pricing: initial fare, driver counter-price from hotspot ranks, customer decision."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .matching import DROPOFF, PICKUP

OMEGA2 = 1.0  # weight of the fuel term, fixed
DEFAULT_GAS_PRICE = 1.0
DEFAULT_LAMBDA = 0.10
DEFAULT_OMEGA4 = 15.0
DEFAULT_OMEGA5 = 1.0
DEFAULT_OMEGA6 = 4.0


@dataclass(frozen=True)
class VehicleType:
    type_id: int  # V_T, higher is more luxurious
    capacity: int  # C_max
    mileage: float  # km per litre
    rate_km: float  # omega1, money per km
    rate_wait: float  # omega3, money per waiting minute
    base_price: float  # B_j

    def __post_init__(self):
        for name in ("type_id", "capacity", "mileage", "rate_km", "rate_wait", "base_price"):
            v = getattr(self, name)
            if not (v > 0) or not math.isfinite(v):
                raise ConfigError(f"vehicle type field {name} must be > 0, got {v}")


DEFAULT_VEHICLE_TYPES = (
    VehicleType(1, 4, 14.0, 1.0, 0.3, 3.0),
    VehicleType(2, 4, 12.0, 1.3, 0.4, 4.0),
    VehicleType(3, 6, 10.0, 1.7, 0.5, 5.0),
    VehicleType(4, 6, 8.0, 2.2, 0.6, 7.0),
)


@dataclass
class Quote:
    request_id: str
    initial_price: float
    price: float
    route_cost: float  # km used in the initial price
    sharing: int
    waiting: float  # minutes


@dataclass(frozen=True)
class HotspotList:
    zones: tuple  # top zones, best first
    rank: np.ndarray  # rank[z] in 1..M, 1 = best
    members: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.zones))

    def __contains__(self, zone) -> bool:
        return int(zone) in self.members


def sharing_count(route, request_id: str) -> int:
    """Change in onboard load between a request's pickup and dropoff, at least 1."""
    i = route.index_of(request_id, PICKUP)
    j = route.index_of(request_id, DROPOFF)
    loads = route.loads
    return max(abs(loads[j] - loads[i]), 1)


def initial_price(vtype: VehicleType, route_cost: float, sharing: int, waiting: float,
                  gas_price: float = DEFAULT_GAS_PRICE) -> float:
    if sharing < 1:
        raise DomainError(f"sharing count must be >= 1, got {sharing}")
    per_rider = route_cost / sharing
    raw = (vtype.base_price + vtype.rate_km * per_rider
           + OMEGA2 * per_rider * (gas_price / vtype.mileage) - vtype.rate_wait * waiting)
    return max(raw, vtype.base_price)


def build_hotspots(values: Sequence[float], lam: float = DEFAULT_LAMBDA) -> HotspotList:
    """Rank zones by value (descending, ties by zone id) and keep the top ``ceil(lam*M)``."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or len(v) == 0:
        raise DomainError("need one value per zone")
    if not np.isfinite(v).all():
        raise DomainError("hotspot values must be finite")
    if not (0 < lam <= 1):
        raise ConfigError(f"lambda must be in (0, 1], got {lam}")
    order = np.lexsort((np.arange(len(v)), -v))
    rank = np.empty(len(v), dtype=np.int64)
    rank[order] = np.arange(1, len(v) + 1)
    k = math.ceil(lam * len(v) - 1e-12)
    return HotspotList(tuple(int(z) for z in order[:k]), rank)


def propose_price(p_init: float, destination: int, hotspots: HotspotList, base_price: float) -> float:
    if destination in hotspots:
        return p_init
    alpha = float(hotspots.rank[destination])
    return p_init + p_init * (alpha / 2.0) * base_price


def customer_utility(occupancy: int, waiting: float, type_id: int,
                     w4: float = DEFAULT_OMEGA4, w5: float = DEFAULT_OMEGA5,
                     w6: float = DEFAULT_OMEGA6) -> float:
    """Rider utility from sharing level, waiting time (floored at 1 min) and vehicle class."""
    if occupancy < 1:
        raise DomainError(f"occupancy must count the rider, got {occupancy}")
    waiting = max(waiting, 1.0)
    return w4 / occupancy + w5 / waiting + w6 * type_id


def customer_decide(utility: float, price: float, delta: float) -> bool:
    return utility > price - delta


def quote(request, vtype: VehicleType, route_cost: float, sharing: int, waiting: float,
          hotspots: Optional[HotspotList], gas_price: float = DEFAULT_GAS_PRICE) -> Quote:
    """Initial price, then the driver's counter-price when a hotspot list is given."""
    p0 = initial_price(vtype, route_cost, sharing, waiting, gas_price)
    p = p0 if hotspots is None else propose_price(p0, request.destination, hotspots, vtype.base_price)
    return Quote(request.id, p0, p, route_cost, sharing, waiting)
