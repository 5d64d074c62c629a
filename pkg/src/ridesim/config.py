"""Simulation configuration: defaults, key=value file parsing and validation.

The file format is INI-style. Section headers only group keys for the reader;
every key name is unique across sections. Keys may also appear before any
header. Unknown keys are errors.

    [grid]
    rows = 20
    cols = 20

    [toggles]
    dispatch = on
"""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any

from .errors import ConfigError
from .pricing import DEFAULT_VEHICLE_TYPES, VehicleType

TOGGLES = ("dispatch", "ridesharing", "pricing", "darm")

_TRUE = {"1", "on", "true", "yes"}
_FALSE = {"0", "off", "false", "no"}


def _f(default, lo=None, hi=None, lo_open=False, hi_open=False, section="sim", doc=""):
    return field(default=default, metadata=dict(lo=lo, hi=hi, lo_open=lo_open, hi_open=hi_open,
                                                section=section, doc=doc))


@dataclass
class SimConfig:
    # grid
    rows: int = _f(43, 1, section="grid")
    cols: int = _f(44, 1, section="grid")
    cell_size: float = _f(0.8, 0, lo_open=True, section="grid", doc="km per cell edge")
    speed: float = _f(20.0, 0, lo_open=True, section="grid", doc="fleet speed, km/h")
    # clock and fleet
    delta_t: float = _f(1.0, 0, lo_open=True, doc="minutes per tick")
    steps: int = _f(1440, 0)
    seed: int = _f(0)
    fleet_size: int = _f(200, 0)
    entry_minutes: float = _f(240.0, 0, doc="fleet enters uniformly over this window")
    duty_hours: float = _f(21.0, 0, 24, lo_open=True)
    idle_threshold: float = _f(10.0, 0, doc="minutes idle before relocation")
    radius_km: float = _f(5.0, 0, lo_open=True)
    delay_tolerance: float = _f(10.0, 0, doc="minutes a request may wait unmatched")
    max_requeues: int = _f(3, 0)
    horizon: int = _f(30, 30, doc="forecast steps")
    bin_minutes: int = _f(30, 1, 1440)
    history_days: int = _f(7, 0, doc="days of synthetic history fed to the demand predictor")
    # toggles
    dispatch: bool = _f(True, section="toggles")
    ridesharing: bool = _f(True, section="toggles")
    pricing: bool = _f(True, section="toggles")
    darm: bool = _f(True, section="toggles")
    # pricing and customers
    lam: float = _f(0.10, 0, 1, lo_open=True, section="pricing", doc="hotspot fraction")
    delta: float = _f(10000.0, section="pricing", doc="customer compromise threshold (money)")
    omega4: float = _f(15.0, 0, section="pricing")
    omega5: float = _f(1.0, 0, section="pricing")
    omega6: float = _f(4.0, 0, section="pricing")
    gas_price: float = _f(1.0, 0, section="pricing")
    hotspot_refresh: int = _f(5, 1, section="pricing", doc="ticks between hotspot list updates")
    vehicle_types: tuple = _f(DEFAULT_VEHICLE_TYPES, section="pricing")
    # reward
    beta1: float = _f(10.0, section="reward")
    beta2: float = _f(1.0, section="reward")
    beta3: float = _f(5.0, section="reward")
    beta4: float = _f(12.0, section="reward")
    beta5: float = _f(8.0, section="reward")
    # learning
    learn: bool = _f(False, section="learning")
    profile: str = _f("compact", section="learning")
    crop: int = _f(19, 3, section="learning")
    hidden: int = _f(64, 1, section="learning")
    discount: float = _f(0.9, 0, 1, True, True, section="learning")
    eps_start: float = _f(1.0, 0, 1, section="learning")
    eps_end: float = _f(0.1, 0, 1, section="learning")
    eps_span: int = _f(3000, 1, section="learning")
    lr_start: float = _f(0.1, 0, lo_open=True, section="learning")
    lr_end: float = _f(0.001, 0, lo_open=True, section="learning")
    lr_span: int = _f(10000, 1, section="learning")
    replay_capacity: int = _f(5000, 1, section="learning")
    batch_size: int = _f(32, 1, section="learning")
    target_sync: int = _f(150, 1, section="learning")
    grad_clip: float = _f(10.0, 0, section="learning")
    reward_scale: float = _f(0.01, 0, lo_open=True, section="learning")
    updates_per_tick: int = _f(1, 0, section="learning")
    checkpoint: str = _f("", section="learning", doc="policy checkpoint to load")
    # demand
    scenario: str = _f("standard", section="demand")
    trips: str = _f("", section="demand", doc="trip CSV when scenario = csv")
    demand_rate: float = _f(10.0, 0, section="demand", doc="mean requests per minute, whole city")

    def __post_init__(self):
        self.validate()

    def validate(self):
        for f in dataclasses.fields(self):
            m = f.metadata
            v = getattr(self, f.name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                continue
            if not math.isfinite(v):
                raise ConfigError(f"{f.name} must be finite, got {v}")
            lo, hi = m.get("lo"), m.get("hi")
            bad = ((lo is not None and (v <= lo if m.get("lo_open") else v < lo))
                   or (hi is not None and (v >= hi if m.get("hi_open") else v > hi)))
            if bad:
                raise ConfigError(f"{f.name} = {v} out of range {_range_text(m)}")
        if self.profile not in ("compact", "conv"):
            raise ConfigError(f"profile must be compact or conv, got {self.profile!r}")
        if self.scenario not in ("standard", "hotspot", "uniform", "csv"):
            raise ConfigError(f"scenario must be standard, hotspot, uniform or csv, got {self.scenario!r}")
        if self.scenario == "csv" and not self.trips:
            raise ConfigError("scenario = csv needs a trips file")
        if not self.vehicle_types:
            raise ConfigError("at least one vehicle type is required")

    @property
    def betas(self) -> tuple:
        return (self.beta1, self.beta2, self.beta3, self.beta4, self.beta5)

    @property
    def label(self) -> str:
        d = "D" if self.dispatch else "!D"
        rs = "RS" if self.ridesharing else "!RS"
        ps = "PS" if self.pricing else "!PS"
        m = "DARM" if self.darm else "GM"
        return f"({d}, {rs}, {ps}, {m})"

    def replace(self, **kw) -> "SimConfig":
        return dataclasses.replace(self, **kw)

    def as_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = format_types(v) if f.name == "vehicle_types" else v
        return out


def _range_text(m) -> str:
    lo, hi = m.get("lo"), m.get("hi")
    left = "(" if m.get("lo_open") else "["
    right = ")" if m.get("hi_open") else "]"
    return f"{left}{'-inf' if lo is None else lo}, {'inf' if hi is None else hi}{right}"


# alternative spellings accepted in files
ALIASES = {"lambda": "lam", "dt": "delta_t", "seed": "seed"}


def parse_types(text: str) -> tuple:
    """``"1:4:14:1.0:0.3:3; 2:4:12:1.3:0.4:4"`` -> VehicleType tuple
    (type id, capacity, km/l, per-km rate, per-minute wait rebate, base price)."""
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 6:
            raise ConfigError(f"vehicle type {chunk!r} needs 6 ':'-separated fields")
        try:
            out.append(VehicleType(int(parts[0]), int(parts[1]), *(float(p) for p in parts[2:])))
        except ValueError as exc:
            raise ConfigError(f"vehicle type {chunk!r}: {exc}") from None
    return tuple(out)


def format_types(types) -> str:
    return "; ".join(f"{t.type_id}:{t.capacity}:{t.mileage:g}:{t.rate_km:g}:{t.rate_wait:g}:{t.base_price:g}"
                     for t in types)


def _coerce(name: str, raw: str, default: Any):
    raw = raw.strip()
    if name == "vehicle_types":
        return parse_types(raw)
    if isinstance(default, bool):
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"{name}: expected on/off, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {raw!r}") from None
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, got {raw!r}") from None
    return raw


def config_from_mapping(values: dict, base: SimConfig | None = None) -> SimConfig:
    base = base or SimConfig()
    names = {f.name for f in dataclasses.fields(SimConfig)}
    kw = {}
    for key, raw in values.items():
        name = ALIASES.get(key.strip().lower(), key.strip().lower())
        if name not in names:
            raise ConfigError(f"unknown config key {key!r}")
        default = getattr(base, name)
        kw[name] = _coerce(name, raw, default) if isinstance(raw, str) else raw
    return base.replace(**kw)


def parse_config_text(text: str, base: SimConfig | None = None) -> SimConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string("[__top__]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    values = {}
    for sec in cp.sections():
        for key, raw in cp.items(sec):
            k = ALIASES.get(key.lower(), key.lower())
            if k in values:
                raise ConfigError(f"config key {key!r} given twice")
            values[k] = raw
    return config_from_mapping(values, base)


def parse_config(path) -> SimConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


def dump_config(cfg: SimConfig) -> str:
    """Render ``cfg`` back into the file format, grouped by section."""
    groups: dict[str, list] = {}
    for f in dataclasses.fields(SimConfig):
        v = getattr(cfg, f.name)
        if f.name == "vehicle_types":
            v = format_types(v)
        elif isinstance(v, bool):
            v = "on" if v else "off"
        key = "lambda" if f.name == "lam" else f.name
        groups.setdefault(f.metadata.get("section", "sim"), []).append(f"{key} = {v}")
    return "\n".join(f"[{sec}]\n" + "\n".join(lines) + "\n" for sec, lines in groups.items())
