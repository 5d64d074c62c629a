"""Built-in demand scenarios.

``standard``: a few Gaussian hotspots over a low uniform floor with morning and
evening peaks; destinations favour the same hotspots. ``hotspot``: all demand
starts in the bottom-right zone. ``uniform``: flat rates. ``csv``: a trip file.

Hotspot positions depend only on the grid, so every seed shares one city and
only the sampled requests differ.
"""
from __future__ import annotations

import logging

import numpy as np

from .config import SimConfig
from .demand import DAY_MINUTES, RateProfile, generate_synthetic, ingest_trips
from .geo import ZoneGrid

logger = logging.getLogger(__name__)

# hourly multipliers: quiet night, morning and evening peaks (mean 1.0)
_TOD = np.array([0.35, 0.25, 0.2, 0.2, 0.3, 0.5, 0.9, 1.4, 1.6, 1.3, 1.1, 1.1,
                 1.2, 1.15, 1.1, 1.2, 1.4, 1.7, 1.8, 1.5, 1.2, 1.0, 0.8, 0.55])
TIME_OF_DAY = _TOD / _TOD.mean()

# (row fraction, col fraction, relative weight, spread as fraction of the grid side)
_STANDARD_HOTSPOTS = ((0.3, 0.35, 1.0, 0.12), (0.65, 0.7, 0.8, 0.1), (0.7, 0.25, 0.5, 0.1))
_FLOOR = 0.15


def _gaussian_field(grid: ZoneGrid, spots) -> np.ndarray:
    r = grid.zone_rows.astype(float)
    c = grid.zone_cols.astype(float)
    side = max(grid.rows, grid.cols)
    w = np.zeros(grid.n_zones)
    for fr, fc, weight, spread in spots:
        s = max(spread * side, 0.5)
        w += weight * np.exp(-((r - fr * (grid.rows - 1)) ** 2 + (c - fc * (grid.cols - 1)) ** 2) / (2 * s * s))
    return w


def rate_profile(cfg: SimConfig, grid: ZoneGrid) -> RateProfile:
    M = grid.n_zones
    if cfg.scenario == "standard":
        shape = _gaussian_field(grid, _STANDARD_HOTSPOTS)
        shape = shape / shape.max() + _FLOOR
        base = cfg.demand_rate * shape / shape.sum()
        return RateProfile(base, TIME_OF_DAY, destination_weights=shape)
    if cfg.scenario == "hotspot":
        base = np.zeros(M)
        base[M - 1] = cfg.demand_rate
        return RateProfile(base, np.ones(1))
    if cfg.scenario == "uniform":
        return RateProfile(np.full(M, cfg.demand_rate / M), np.ones(1))
    raise ValueError(f"no rate profile for scenario {cfg.scenario!r}")


def hotspot_zone(grid: ZoneGrid) -> int:
    return grid.n_zones - 1


def build_requests(cfg: SimConfig, grid: ZoneGrid, seed: int | None = None):
    """Requests for the simulated horizon (minute 0 onward)."""
    seed = cfg.seed if seed is None else seed
    if cfg.scenario == "csv":
        report = ingest_trips(cfg.trips, grid, delay_tolerance=cfg.delay_tolerance)
        for lineno, _, reason in report.rejects:
            logger.warning("trips line %d skipped: %s", lineno, reason)
        return report.requests
    prof = rate_profile(cfg, grid)
    duration = int(np.ceil(cfg.steps * cfg.delta_t))
    return generate_synthetic(grid, prof, duration, seed=_demand_seed(seed, 0),
                              delay_tolerance=cfg.delay_tolerance)


def history_counts(cfg: SimConfig, grid: ZoneGrid, seed: int | None = None):
    """Per-minute origin counts for ``history_days`` days before minute 0.

    Returns a list of ``(day index, counts[1440, M])`` with negative day indices.
    """
    if cfg.scenario == "csv" or cfg.history_days == 0:
        return []
    seed = cfg.seed if seed is None else seed
    prof = rate_profile(cfg, grid)
    minutes = np.arange(DAY_MINUTES)
    nb = len(prof.time_of_day)
    lam = prof.time_of_day[(minutes * nb) // DAY_MINUTES][:, None] * prof.base[None, :]
    out = []
    for k in range(1, cfg.history_days + 1):
        rng = np.random.default_rng(_demand_seed(seed, k))
        out.append((-k, rng.poisson(lam)))
    return out


def _demand_seed(seed: int, day: int) -> int:
    # demand streams are keyed on (seed, day) only, so toggles never change demand
    return int(np.random.SeedSequence([int(seed), 7919, day]).generate_state(1)[0])
