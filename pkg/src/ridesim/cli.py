"""Command line: simulate, train, evaluate, report and compare.

Log verbosity comes from RIDESIM_LOG (DEBUG, INFO, WARNING, ...), default INFO.
Exit codes: 0 success, 2 invalid configuration or arguments, 1 failure during a run.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from .config import TOGGLES, SimConfig, config_from_mapping, dump_config, parse_config
from .errors import ConfigError, RideSimError

logger = logging.getLogger("ridesim.cli")

COMMANDS = ("simulate", "train", "evaluate", "report", "compare")
EXIT_OK, EXIT_RUN, EXIT_CONFIG = 0, 1, 2


@dataclass
class CommandSpec:
    command: str
    config: Optional[str] = None
    seed: Optional[int] = None
    out: str = "out"
    toggles: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")

    def build_config(self, preset: Optional[dict] = None) -> SimConfig:
        cfg = parse_config(self.config) if self.config else SimConfig()
        if preset:
            cfg = cfg.replace(**preset)
        values = dict(self.overrides)
        values.update({k: ("on" if v else "off") for k, v in self.toggles.items()})
        if self.seed is not None:
            values["seed"] = str(self.seed)
        return config_from_mapping(values, cfg) if values else cfg


def parse_toggle(text: str) -> tuple:
    name, sep, value = text.partition("=")
    name, value = name.strip().lower(), value.strip().lower()
    if not sep or name not in TOGGLES:
        raise ConfigError(f"--toggle expects one of {'|'.join(TOGGLES)}=on/off, got {text!r}")
    if value in ("on", "true", "1", "yes"):
        return name, True
    if value in ("off", "false", "0", "no"):
        return name, False
    raise ConfigError(f"--toggle {name} must be on or off, got {value!r}")


def parse_set(text: str) -> tuple:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"--set expects key=value, got {text!r}")
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", default="out", help="output directory (all files land here)")
    common.add_argument("--toggle", action="append", default=[], metavar="NAME=on|off",
                        help="dispatch, ridesharing, pricing or darm")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key")

    p = argparse.ArgumentParser(prog="ridesim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run one simulated day")
    s.add_argument("--steps", type=int, help="override the number of ticks")

    t = sub.add_parser("train", parents=[common], help="learn a relocation policy")
    t.add_argument("--days", type=int, default=10, help="simulated days of training")
    t.add_argument("--steps", type=int, help="ticks per training day")
    t.add_argument("--resume", help="continue from this checkpoint")
    t.add_argument("--minutes", type=float, help="wall-clock budget")
    t.add_argument("--checkpoint-every", type=int, default=1, help="days between checkpoints")
    t.add_argument("--toy", action="store_true", help="start from the 5x5 single-hotspot scenario")

    e = sub.add_parser("evaluate", parents=[common], help="run a trained policy greedily")
    e.add_argument("--checkpoint", help="policy checkpoint (default: config checkpoint)")
    e.add_argument("--steps", type=int)
    e.add_argument("--hotspot-episodes", type=int, default=0,
                   help="also run the corner-to-hotspot relocation check")

    r = sub.add_parser("report", parents=[common], help="summarize an existing run directory")
    r.add_argument("--run", required=True, help="directory holding metrics.csv")
    r.add_argument("--plot", action="store_true", help="also write summary.png")

    c = sub.add_parser("compare", parents=[common], help="run the six-row baseline matrix")
    c.add_argument("--checkpoint", help="policy checkpoint for dispatch and pricing rows")
    c.add_argument("--seeds", help="comma separated seeds (default: --seed or config seed)")
    c.add_argument("--steps", type=int)
    return p


def spec_from_args(args) -> CommandSpec:
    toggles = dict(parse_toggle(t) for t in args.toggle)
    overrides = dict(parse_set(s) for s in args.set)
    if getattr(args, "steps", None) is not None:
        overrides["steps"] = str(args.steps)
    return CommandSpec(args.command, args.config, args.seed, args.out, toggles, overrides)


def _ensure_out(path: str):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")


def _write_run(out: str, res, cfg: SimConfig):
    from .engine import write_metrics, write_requests, write_vehicles
    from .report import format_report, summarize
    write_metrics(os.path.join(out, "metrics.csv"), res.metrics)
    write_vehicles(os.path.join(out, "vehicles.csv"), res.vehicles)
    write_requests(os.path.join(out, "requests.csv"), res.requests)
    with open(os.path.join(out, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))
    text = format_report(summarize(res.metrics, res.vehicles, res.requests, cfg.delta_t), cfg.label)
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    return text


def cmd_simulate(spec: CommandSpec, args) -> int:
    from .engine import make_world
    from .baselines import load_policy, needs_policy
    cfg = spec.build_config().replace(learn=False)
    agent = load_policy(cfg) if needs_policy(cfg) else None
    _ensure_out(spec.out)
    res = make_world(cfg, agent).run()
    sys.stdout.write(_write_run(spec.out, res, cfg))
    return EXIT_OK


def cmd_train(spec: CommandSpec, args) -> int:
    from .dispatch import QFunction
    from .geo import build_grid
    from .training import TOY, train
    cfg = spec.build_config(TOY if args.toy else None)
    if args.days < 0:
        raise ConfigError("--days must be >= 0")
    _ensure_out(spec.out)
    ckpt = os.path.join(spec.out, "policy.npz")
    agent = None
    if args.resume:
        if not os.path.exists(args.resume):
            raise ConfigError(f"checkpoint {args.resume} not found")
        agent = QFunction.load(args.resume, build_grid(cfg.rows, cfg.cols, cfg.cell_size))
        logger.info("resuming at %d decisions, %d updates", agent.decisions, agent.updates)
    budget = None if args.minutes is None else args.minutes * 60.0
    agent, log = train(cfg, args.days, agent, time_budget=budget, checkpoint=ckpt,
                       checkpoint_every=args.checkpoint_every)
    with open(os.path.join(spec.out, "qmax.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["updates", "mean_qmax"])
        for u, q in log.curve:
            w.writerow([u, f"{q:.6f}"])
    with open(os.path.join(spec.out, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg.replace(checkpoint=ckpt)))
    print(f"trained {log.days} days in {log.seconds:.1f}s: {agent.updates} updates, "
          f"epsilon {agent.epsilon:.3f}, checkpoint {ckpt}")
    return EXIT_OK


def cmd_evaluate(spec: CommandSpec, args) -> int:
    from .baselines import load_policy
    from .engine import make_world
    from .training import hotspot_check
    cfg = spec.build_config().replace(learn=False)
    agent = load_policy(cfg, args.checkpoint)
    _ensure_out(spec.out)
    res = make_world(cfg, agent).run()
    text = _write_run(spec.out, res, cfg)
    if args.hotspot_episodes > 0:
        chk = hotspot_check(agent, cfg, episodes=args.hotspot_episodes)
        extra = (f"\n[hotspot check]\nepisodes = {args.hotspot_episodes}\n"
                 f"greedy_mean_cells = {chk.greedy_mean:.4f}\nrandom_mean_cells = {chk.random_mean:.4f}\n"
                 f"ratio = {chk.ratio:.4f}\n")
        text += extra
        with open(os.path.join(spec.out, "summary.txt"), "a", encoding="utf-8") as fh:
            fh.write(extra)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_report(spec: CommandSpec, args) -> int:
    from .report import format_report, load_run, plot_report, summarize
    if not os.path.exists(os.path.join(args.run, "metrics.csv")):
        raise ConfigError(f"{args.run} has no metrics.csv")
    cfg = spec.build_config()
    metrics, vehicles, requests = load_run(args.run)
    rep = summarize(metrics, vehicles, requests, cfg.delta_t)
    _ensure_out(spec.out)
    text = format_report(rep, os.path.basename(os.path.normpath(args.run)) or "run")
    with open(os.path.join(spec.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    if args.plot:
        plot_report(rep, os.path.join(spec.out, "summary.png"))
    sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(spec: CommandSpec, args) -> int:
    from .baselines import compare, format_compare, load_policy, write_compare_csv
    cfg = spec.build_config()
    if args.seeds:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError as exc:
            raise ConfigError(f"--seeds must be comma separated integers: {exc}") from exc
    else:
        seeds = [cfg.seed]
    agent = load_policy(cfg, args.checkpoint)  # before any run
    _ensure_out(spec.out)
    res = compare(cfg, seeds, agent)
    text = format_compare(res)
    write_compare_csv(os.path.join(spec.out, "compare.csv"), res)
    with open(os.path.join(spec.out, "compare.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


HANDLERS = {"simulate": cmd_simulate, "train": cmd_train, "evaluate": cmd_evaluate,
            "report": cmd_report, "compare": cmd_compare}


def setup_logging():
    level = os.environ.get("RIDESIM_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        spec = spec_from_args(args)
        return HANDLERS[spec.command](spec, args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except (RideSimError, RuntimeError, OSError) as exc:
        logger.error("run failed: %s", exc)
        return EXIT_RUN


if __name__ == "__main__":
    raise SystemExit(main())
