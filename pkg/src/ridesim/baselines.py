"""The baseline matrix: five ablations plus the full method, run on shared
seeds and demand."""
from __future__ import annotations

import hashlib
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import SimConfig
from .dispatch import QFunction
from .engine import make_world
from .errors import ConfigError
from .geo import build_grid
from .report import summarize

logger = logging.getLogger(__name__)

# fixed row order: (dispatch, ridesharing, pricing, darm)
COMPARE_ROWS = (
    (False, False, False, False),
    (False, True, False, False),
    (True, False, False, False),
    (True, True, False, False),
    (True, True, True, False),
    (True, True, True, True),
)

ROW_METRICS = ("accept_rate", "completed", "total_requests", "rejected_radius", "rejected_customer",
               "expired", "mean_wait_s", "mean_occupied_vehicles", "profit_per_hour", "km_per_hour",
               "idle_hours_per_vehicle", "mean_occupancy_pct", "seconds")


def row_configs(base: SimConfig) -> list:
    return [base.replace(dispatch=d, ridesharing=rs, pricing=ps, darm=m) for d, rs, ps, m in COMPARE_ROWS]


def needs_policy(cfg: SimConfig) -> bool:
    # relocation uses the greedy policy, the hotspot list uses its values
    return cfg.dispatch or cfg.pricing


def demand_fingerprint(requests) -> str:
    h = hashlib.sha256()
    for r in requests:
        h.update(f"{r.id},{r.request_time!r},{r.origin},{r.destination},{r.passenger_count};".encode())
    return h.hexdigest()[:16]


@dataclass
class CompareResult:
    labels: list
    seeds: list
    rows: dict = field(default_factory=dict)  # (label, seed) -> metrics dict
    fingerprints: dict = field(default_factory=dict)  # seed -> demand fingerprint

    def values(self, label: str, key: str) -> np.ndarray:
        return np.array([self.rows[(label, s)][key] for s in self.seeds], dtype=float)

    def mean(self, label: str, key: str) -> float:
        return float(self.values(label, key).mean())


def load_policy(cfg: SimConfig, path: Optional[str] = None) -> QFunction:
    path = path or cfg.checkpoint
    if not path:
        raise ConfigError("a trained checkpoint is required for dispatch or pricing rows (set checkpoint)")
    if not os.path.exists(path):
        raise ConfigError(f"checkpoint {path} not found")
    return QFunction.load(path, build_grid(cfg.rows, cfg.cols, cfg.cell_size))


def run_row(cfg: SimConfig, seed: int, agent: Optional[QFunction]) -> tuple:
    t0 = time.perf_counter()
    w = make_world(cfg.replace(learn=False), agent if needs_policy(cfg) else None, seed=seed)
    fp = demand_fingerprint(w.requests)
    res = w.run()
    rep = summarize(res.metrics, res.vehicles, res.requests, cfg.delta_t)
    row = {k: rep.totals.get(k, float("nan")) for k in ROW_METRICS if k != "seconds"}
    row["seconds"] = time.perf_counter() - t0
    return row, fp


def compare(base: SimConfig, seeds, agent: Optional[QFunction] = None,
            checkpoint: Optional[str] = None) -> CompareResult:
    """Run every row on every seed. The policy is loaded before any run."""
    configs = row_configs(base)
    if agent is None and any(needs_policy(c) for c in configs):
        agent = load_policy(base, checkpoint)
    seeds = list(seeds)
    out = CompareResult([c.label for c in configs], seeds)
    for seed in seeds:
        for c in configs:
            row, fp = run_row(c, seed, agent)
            prev = out.fingerprints.setdefault(seed, fp)
            if prev != fp:
                raise RuntimeError(f"demand differs across rows for seed {seed}: {prev} vs {fp}")
            out.rows[(c.label, seed)] = row
            logger.info("seed %d %s demand=%s accept=%.4f served=%d (%.1fs)", seed, c.label, fp,
                        row["accept_rate"], row["completed"], row["seconds"])
    return out


def format_compare(res: CompareResult) -> str:
    keys = [k for k in ROW_METRICS if k != "seconds"]
    lines = ["[compare]", "seeds = " + ",".join(str(s) for s in res.seeds),
             "demand = " + ",".join(f"{s}:{res.fingerprints[s]}" for s in res.seeds), ""]
    width = max(len(l) for l in res.labels) + 2
    lines.append(f"{'configuration':<{width}}" + "".join(f"{k:>24}" for k in keys))
    for label in res.labels:
        lines.append(f"{label:<{width}}" + "".join(f"{res.mean(label, k):>24.4f}" for k in keys))
    return "\n".join(lines) + "\n"


def write_compare_csv(path, res: CompareResult):
    import csv
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["configuration", "seed", "demand"] + list(ROW_METRICS))
        for label in res.labels:
            for s in res.seeds:
                row = res.rows[(label, s)]
                w.writerow([label, s, res.fingerprints[s]] + [f"{row[k]:.6f}" for k in ROW_METRICS])
