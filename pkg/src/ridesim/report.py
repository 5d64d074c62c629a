"""Run summaries: totals, per-hour aggregates and per-vehicle distributions
(profit/hour, km/hour, idle hours, occupancy share of duty, waiting seconds)."""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import METRIC_COLUMNS, read_metrics, read_table

logger = logging.getLogger(__name__)

OCCUPANCY_BINS = np.linspace(0.0, 100.0, 11)
WAIT_BINS = np.array([0, 30, 60, 120, 180, 300, 450, 600, 900, 1200, np.inf])


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    def lines(self, unit: str = "") -> list:
        out = []
        for lo, hi, n in zip(self.edges[:-1], self.edges[1:], self.counts):
            hi_txt = "inf" if not np.isfinite(hi) else f"{hi:g}"
            out.append(f"  [{lo:g}, {hi_txt}){unit}: {int(n)}")
        return out


@dataclass
class Report:
    totals: dict = field(default_factory=dict)
    hourly: dict = field(default_factory=dict)  # column -> per-hour array
    vehicles: dict = field(default_factory=dict)  # metric -> per-vehicle array
    histograms: dict = field(default_factory=dict)
    empty: bool = False

    @property
    def profit_per_hour(self) -> float:
        return self.totals.get("profit_per_hour", float("nan"))


def _columns(rows) -> dict:
    """Metric rows (lists in column order, or dicts) as a dict of float arrays."""
    if not rows:
        return {}
    if isinstance(rows[0], dict):
        return {k: np.array([float(r[k]) for r in rows]) for k in METRIC_COLUMNS if k in rows[0]}
    arr = np.array(rows, dtype=float)
    return {k: arr[:, i] for i, k in enumerate(METRIC_COLUMNS)}


def _num(x) -> float:
    if isinstance(x, str):
        return float(x) if x != "" else float("nan")
    return float(x)


def vehicle_rates(vehicles) -> dict:
    """Per-vehicle rates for vehicles that spent time on duty.

    profit/hour is (earnings - distance / mileage * gas price) / duty hours;
    the fuel part comes precomputed in the summary's ``profit``.
    """
    rows = [v for v in vehicles if _num(v["duty_minutes"]) > 0]
    if not rows:
        return {}
    duty_h = np.array([_num(v["duty_minutes"]) for v in rows]) / 60.0
    return {
        "profit_per_hour": np.array([_num(v["profit"]) for v in rows]) / duty_h,
        "km_per_hour": np.array([_num(v["distance_km"]) for v in rows]) / duty_h,
        "idle_hours": np.array([_num(v["idle_minutes"]) for v in rows]) / 60.0,
        "occupancy_pct": 100.0 * np.array([_num(v["occupied_minutes"]) for v in rows]) / (duty_h * 60.0),
        "riders_served": np.array([_num(v["riders_served"]) for v in rows]),
    }


def waiting_seconds(requests) -> np.ndarray:
    """Actual pickup waits (seconds) of every picked-up request."""
    out = []
    for r in requests:
        if isinstance(r, dict):
            w = _num(r.get("wait_s", ""))
        else:
            w = float("nan") if r.pickup_time is None else (r.pickup_time - r.request_time) * 60.0
        if math.isfinite(w):
            out.append(w)
    return np.array(out, dtype=float)


def summarize(metrics, vehicles=None, requests=None, delta_t: float = 1.0) -> Report:
    cols = _columns(metrics)
    if not cols or len(cols["t"]) == 0:
        logger.warning("empty metrics log, nothing to summarize")
        return Report(empty=True)
    rep = Report()
    last = {k: float(v[-1]) for k, v in cols.items()}
    n_ticks = len(cols["t"])
    rep.totals = {
        "ticks": n_ticks,
        "hours": n_ticks * delta_t / 60.0,
        "total_requests": int(last["total_requests"]),
        "accepted": int(last["accepted"]),
        "completed": int(last["completed"]),
        "rejected_radius": int(last["rejected_radius"]),
        "rejected_customer": int(last["rejected_customer"]),
        "expired": int(last["expired"]),
        "degenerate": int(last["degenerate"]),
        "accept_rate": last["accept_rate"],
        "mean_wait_s": last["mean_wait_s"],
        "mean_occupied_vehicles": float(cols["occupied_vehicles"].mean()),
        "peak_occupied_vehicles": int(cols["occupied_vehicles"].max()),
        "mean_onboard_riders": float(cols["onboard_riders"].mean()),
        "fleet_profit": last["profit"],
        "fleet_km": last["distance_km"],
        "dispatches": int(last["dispatches"]),
    }

    # per-hour aggregates from tick rows
    hour = np.floor(cols["t"] / 60.0).astype(int)
    hours = np.unique(hour)
    cum = {k: cols[k] for k in ("profit", "distance_km", "total_requests", "accepted", "completed")}
    first = np.searchsorted(hour, hours, side="left")
    end = np.searchsorted(hour, hours, side="right") - 1
    hourly = {"hour": hours.astype(float)}
    for k, v in cum.items():
        before = np.where(first > 0, v[np.maximum(first - 1, 0)], 0.0)
        hourly[k] = v[end] - before
    hourly["accept_rate"] = hourly["accepted"] / np.maximum(hourly["total_requests"], 1)
    for k in ("occupied_vehicles", "active_vehicles", "idle_vehicles"):
        hourly[k] = np.array([cols[k][hour == h].mean() for h in hours])
    rep.hourly = hourly

    if vehicles:
        rep.vehicles = vehicle_rates(vehicles)
        if rep.vehicles:
            rep.totals["profit_per_hour"] = float(rep.vehicles["profit_per_hour"].mean())
            rep.totals["km_per_hour"] = float(rep.vehicles["km_per_hour"].mean())
            rep.totals["idle_hours_per_vehicle"] = float(rep.vehicles["idle_hours"].mean())
            rep.totals["mean_occupancy_pct"] = float(rep.vehicles["occupancy_pct"].mean())
            rep.histograms["occupancy_pct"] = Histogram(
                OCCUPANCY_BINS, np.histogram(np.clip(rep.vehicles["occupancy_pct"], 0, 100), OCCUPANCY_BINS)[0])
    if requests:
        waits = waiting_seconds(requests)
        if len(waits):
            rep.totals["mean_wait_s"] = float(waits.mean())
            rep.totals["median_wait_s"] = float(np.median(waits))
            rep.histograms["wait_s"] = Histogram(WAIT_BINS, np.histogram(waits, WAIT_BINS)[0])
    return rep


def format_report(rep: Report, title: str = "run summary") -> str:
    if rep.empty:
        return f"[{title}]\nempty = true\n"
    lines = [f"[{title}]"]
    for k, v in rep.totals.items():
        lines.append(f"{k} = {v:.4f}" if isinstance(v, float) else f"{k} = {v}")
    if rep.hourly:
        lines.append("")
        lines.append("[hourly]")
        keys = ("hour", "total_requests", "accepted", "accept_rate", "completed", "occupied_vehicles",
                "profit", "distance_km")
        lines.append(" ".join(f"{k:>16}" for k in keys))
        for i in range(len(rep.hourly["hour"])):
            lines.append(" ".join(f"{rep.hourly[k][i]:>16.3f}" for k in keys))
    for name, h in rep.histograms.items():
        lines.append("")
        lines.append(f"[histogram {name}]")
        lines.extend(h.lines())
    return "\n".join(lines) + "\n"


def load_run(directory) -> tuple:
    """Metrics, vehicles and requests tables written by a previous run."""
    metrics = read_metrics(os.path.join(directory, "metrics.csv"))
    vpath = os.path.join(directory, "vehicles.csv")
    rpath = os.path.join(directory, "requests.csv")
    vehicles = read_table(vpath) if os.path.exists(vpath) else None
    requests = read_table(rpath) if os.path.exists(rpath) else None
    return metrics, vehicles, requests


def plot_report(rep: Report, path, title: str = "") -> Optional[str]:
    """Four-panel figure (profit/hour, km/hour, occupancy, waiting); None without matplotlib."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib not available, skipping plot")
        return None
    if rep.empty:
        return None
    fig, ax = plt.subplots(2, 2, figsize=(10, 7))
    v = rep.vehicles
    if v:
        ax[0, 0].hist(v["profit_per_hour"], bins=20)
        ax[0, 1].hist(v["km_per_hour"], bins=20)
        ax[1, 0].hist(np.clip(v["occupancy_pct"], 0, 100), bins=OCCUPANCY_BINS)
    if "wait_s" in rep.histograms:
        h = rep.histograms["wait_s"]
        ax[1, 1].bar(np.arange(len(h.counts)), h.counts)
        ax[1, 1].set_xticks(np.arange(len(h.counts)), [f"{e:g}" for e in h.edges[:-1]], rotation=45)
    for a, lab in zip(ax.flat, ("profit per hour", "km per hour", "occupancy % of duty", "waiting s")):
        a.set_xlabel(lab)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return str(path)
