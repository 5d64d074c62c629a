"""Hand-built scenarios shared by the engine and acceptance tests."""
from ridesim.config import SimConfig
from ridesim.demand import RideRequest
from ridesim.engine import VehicleState, World
from ridesim.matching import DROPOFF, Stop
from ridesim.pricing import DEFAULT_VEHICLE_TYPES, build_hotspots
from ridesim.routing import Route

# type 1: B=3, omega1=1.0/km, mileage 14 km/l
VTYPE = DEFAULT_VEHICLE_TYPES[0]
DELTA = 6.0


def opposite_direction_world():
    """A 1x10 strip with 1 km cells. Both cars sit at zone 5 carrying one rider;
    car 0 drops at zone 9 (heading right), car 1 drops at zone 1 (heading left).
    Request B goes 5 -> 2, i.e. against car 0 and along car 1.

    Returns (world, request). The hotspot list holds zone 2 so the driver
    counter-price equals the initial price; the rider weights are zero so the
    utility is 0 and the rider accepts iff price < DELTA.
    """
    cfg = SimConfig().replace(rows=1, cols=10, cell_size=1.0, fleet_size=2, dispatch=False,
                              ridesharing=True, pricing=True, darm=True, gas_price=1.0)
    world = World(cfg, requests=[], vehicles=[])
    grid = world.grid
    cars = []
    for vid, drop in ((0, 9), (1, 1)):
        v = VehicleState(vid, VTYPE, 5, grid, 0.0, 600.0)
        v.route = Route(grid, 5, [Stop(drop, DROPOFF, f"rider{vid}", 1)], onboard=1)
        cars.append(v)
    world.vehicles = cars
    values = [0.0] * 10
    values[2] = 1.0
    world.hotspots = build_hotspots(values, 0.1)
    req = RideRequest("B", 0.0, 5, 2, pooling_weight=0.0, delay_weight=0.0,
                      vehicle_type_weight=0.0, delta=DELTA)
    return world, req


# hand-derived prices: car 0 detours 5->2->9 (+6 km), car 1 passes zone 2 on its way (+0 km)
EXPECTED_OPPOSED = VTYPE.base_price + VTYPE.rate_km * 6.0 + 6.0 * (1.0 / VTYPE.mileage)
EXPECTED_ALIGNED = VTYPE.base_price
