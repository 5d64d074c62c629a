"""Policy training over repeated simulated days, Q-max tracking, and the
hotspot relocation check."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import SimConfig
from .dispatch import N_ACTIONS, QFunction, action_to_zone, greedy_values
from .engine import World, agent_config, all_zone_windows, make_world
from .engine import VStatus
from .geo import build_grid
from .routing import Route
from .scenarios import hotspot_zone

logger = logging.getLogger(__name__)

# the 5x5 single-hotspot scenario used for the relocation sanity check
# small cells keep relocations short next to the per-minute discount, and the
# tight match radius leaves far zones out of reach of the hotspot
TOY = dict(rows=5, cols=5, cell_size=0.3, radius_km=1.0, scenario="hotspot", fleet_size=6,
           demand_rate=1.0, entry_minutes=0.0, idle_threshold=10.0, dispatch=True,
           ridesharing=True, pricing=False, darm=True, history_days=3, reward_scale=0.005)


def toy_config(**kw) -> SimConfig:
    return SimConfig(**{**TOY, **kw})


@dataclass
class TrainLog:
    curve: list = field(default_factory=list)  # (updates, mean q-max) pairs
    days: int = 0
    seconds: float = 0.0
    losses: list = field(default_factory=list)


def probe_windows(cfg: SimConfig, seed: int = 12345, warm: int = 60) -> np.ndarray:
    """Fixed reference states: windows at every zone of a warmed-up world."""
    w = make_world(cfg.replace(learn=False, dispatch=False, pricing=False), seed=seed)
    w.run(min(warm, cfg.steps))
    return all_zone_windows(w.planes(w.t).planes, cfg.crop)


def mean_qmax(agent: QFunction, probes: np.ndarray) -> float:
    return float(greedy_values(agent, probes).mean())


def train(cfg: SimConfig, days: int, agent: Optional[QFunction] = None, probe_every: int = 60,
          time_budget: Optional[float] = None, checkpoint: Optional[str] = None,
          checkpoint_every: int = 0, seed0: Optional[int] = None) -> tuple[QFunction, TrainLog]:
    """Run ``days`` learning episodes (fresh fleet and demand each), sharing one Q-function."""
    cfg = cfg.replace(learn=True)
    agent = agent or QFunction(agent_config(cfg))
    probes = probe_windows(cfg)
    log = TrainLog()
    log.curve.append((agent.updates, mean_qmax(agent, probes)))
    start = time.perf_counter()
    seed0 = cfg.seed if seed0 is None else seed0
    for day in range(days):
        w = make_world(cfg, agent, seed=seed0 + day)
        for _ in range(cfg.steps):
            w.step()
            if probe_every and w.tick % probe_every == 0:
                log.curve.append((agent.updates, mean_qmax(agent, probes)))
        log.losses.extend(w.losses)
        log.days += 1
        if checkpoint and checkpoint_every and log.days % checkpoint_every == 0:
            agent.save(checkpoint, w.grid)
        logger.info("training day %d: updates=%d eps=%.3f lr=%.4f buffer=%d", day, agent.updates,
                    agent.epsilon, agent.learning_rate, 0 if agent.buffer is None else len(agent.buffer))
        if time_budget is not None and time.perf_counter() - start > time_budget:
            logger.warning("training stopped after %d days: time budget spent", log.days)
            break
    log.seconds = time.perf_counter() - start
    if checkpoint:
        agent.save(checkpoint, build_grid(cfg.rows, cfg.cols, cfg.cell_size))
    return agent, log


def window_trend(curve, warmup_frac: float = 0.25, n_windows: int = 10):
    """Means of consecutive equal windows of the curve after the warm-up share."""
    values = np.array([q for _, q in curve], dtype=float)
    start = int(np.ceil(len(values) * warmup_frac))
    tail = values[start:]
    if len(tail) < n_windows:
        return []
    return [float(c.mean()) for c in np.array_split(tail, n_windows)]


@dataclass
class HotspotCheck:
    greedy_mean: float
    random_mean: float
    greedy: list
    random: list

    @property
    def ratio(self) -> float:
        return self.greedy_mean / self.random_mean if self.random_mean > 0 else float("inf")


def hotspot_check(agent: QFunction, cfg: SimConfig, episodes: int = 100, seed: int = 1000,
                  warm: int = 45) -> HotspotCheck:
    """Post-relocation distance (cells) to the hotspot for an idle corner vehicle.

    Each episode warms a fresh world up for ``warm`` minutes, moves vehicle 0
    to a non-hotspot corner and lets the greedy policy pick its destination.
    The random baseline is the exact mean over all 225 actions in the same
    episode.
    """
    grid = build_grid(cfg.rows, cfg.cols, cfg.cell_size)
    hot = hotspot_zone(grid)
    corners = [z for z in (grid.zone_id(0, 0), grid.zone_id(0, grid.cols - 1),
                           grid.zone_id(grid.rows - 1, 0), grid.zone_id(grid.rows - 1, grid.cols - 1))
               if z != hot]
    greedy, rand = [], []
    base = cfg.replace(learn=False)
    for ep in range(episodes):
        w = make_world(base, agent, seed=seed + ep)
        w.run(warm)
        corner = corners[ep % len(corners)]
        v = w.vehicles[0]
        v.zone = corner
        v.route = Route(w.grid, corner)
        v.riders.clear()
        v.target = None
        v.progress = 0.0
        v.status = VStatus.IDLE
        w._forecasts = None
        window = w.planes(w.t).window(*w.grid.coords(corner), agent.crop)
        q = agent.model.forward(window[None])[0]
        a = int(np.argmax(q))
        greedy.append(grid.cells_between(action_to_zone(grid, corner, a), hot))
        rand.append(float(np.mean([grid.cells_between(action_to_zone(grid, corner, k), hot)
                                   for k in range(N_ACTIONS)])))
    return HotspotCheck(float(np.mean(greedy)), float(np.mean(rand)), greedy, rand)
