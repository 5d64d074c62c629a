"""Discrete-time ride-sharing fleet simulator with insertion routing, negotiated
pricing and learned idle-vehicle relocation."""
from .config import SimConfig, parse_config, parse_config_text
from .engine import RunResult, VehicleState, World, make_world, run
from .errors import (ConfigError, DomainError, InfeasibleRouteError, InvariantViolation,
                     NumericError, RideSimError)
from .geo import ZoneGrid, build_grid, path_weight, travel_time, zone_distance

__version__ = "0.1.0"
