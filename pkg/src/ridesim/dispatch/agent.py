"""Shared Q-function: exploration and learning-rate schedules, replay memory,
Bellman updates against a target network, and checkpointing."""
from __future__ import annotations

import io
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NumericError
from .network import build_model
from .state import N_ACTIONS

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


def schedule(step: float, start: float, end: float, span: float) -> float:
    """Linear ramp from ``start`` to ``end`` over ``span`` steps, then held at ``end``."""
    if not (span > 0):
        raise ConfigError(f"schedule span must be > 0, got {span}")
    if step >= span:
        return end
    return start + (end - start) * max(step, 0) / span


def select_action(q_values, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; ``np.argmax`` resolves ties to the lowest index."""
    if not (0.0 <= epsilon <= 1.0):
        raise ConfigError(f"epsilon must be in [0, 1], got {epsilon}")
    # always consume one draw so the rng stream does not depend on epsilon
    u = rng.random()
    if u < epsilon:
        return int(rng.integers(len(q_values)))
    return int(np.argmax(q_values))


class ReplayBuffer:
    """Fixed-capacity FIFO of (s, a, r, s', done) transitions."""

    def __init__(self, capacity: int, state_shape: tuple, dtype=np.float32):
        if capacity < 1:
            raise ConfigError("replay capacity must be >= 1")
        self.capacity = capacity
        self.s = np.zeros((capacity,) + tuple(state_shape), dtype=dtype)
        self.s2 = np.zeros_like(self.s)
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.done = np.zeros(capacity, dtype=bool)
        self.gamma = np.zeros(capacity)  # discount applied to the bootstrap term
        self.pushes = 0

    def __len__(self):
        return min(self.pushes, self.capacity)

    def push(self, s, a, r, s2, done=False, gamma=1.0):
        i = self.pushes % self.capacity
        self.s[i], self.a[i], self.r[i], self.s2[i], self.done[i] = s, a, r, s2, done
        self.gamma[i] = gamma
        self.pushes += 1

    def order(self) -> np.ndarray:
        """Slot indices from oldest to newest."""
        n = len(self)
        start = self.pushes % self.capacity if self.pushes > self.capacity else 0
        return (start + np.arange(n)) % self.capacity

    def sample(self, n: int, rng: np.random.Generator):
        idx = rng.integers(len(self), size=n)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.done[idx], self.gamma[idx]


@dataclass
class AgentConfig:
    profile: str = "compact"
    crop: int | None = None
    hidden: int = 64
    discount: float = 0.9  # eta
    eps_start: float = 1.0
    eps_end: float = 0.1
    eps_span: int = 3000
    lr_start: float = 0.1  # sigma
    lr_end: float = 0.001
    lr_span: int = 10000
    replay_capacity: int = 5000
    batch_size: int = 32
    target_sync: int = 150
    grad_clip: float = 10.0  # global gradient-norm cap, 0 disables
    reward_scale: float = 1.0
    seed: int = 0
    n_states: int = 1  # tabular profile only

    def validate(self):
        if not (0 < self.discount < 1):
            raise ConfigError(f"discount must be in (0, 1), got {self.discount}")
        for name in ("eps_start", "eps_end"):
            v = getattr(self, name)
            if not (0 <= v <= 1):
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        for name in ("eps_span", "lr_span", "replay_capacity", "batch_size", "target_sync"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not (self.lr_start > 0 and self.lr_end > 0):
            raise ConfigError("learning rates must be > 0")
        if self.grad_clip < 0 or not (self.reward_scale > 0):
            raise ConfigError("grad_clip must be >= 0 and reward_scale > 0")


class QFunction:
    """Online and target networks with their schedules and replay memory."""

    def __init__(self, cfg: AgentConfig | None = None):
        self.cfg = cfg = cfg or AgentConfig()
        cfg.validate()
        self.model = build_model(cfg.profile, cfg.seed, cfg.crop, cfg.hidden, cfg.n_states)
        self.target = build_model(cfg.profile, cfg.seed, cfg.crop, cfg.hidden, cfg.n_states)
        self.target.set_params(self.model.params)
        self.decisions = 0  # drives epsilon
        self.updates = 0  # drives sigma and target sync
        self.buffer = None

    @property
    def crop(self) -> int:
        return self.model.crop

    @property
    def epsilon(self) -> float:
        c = self.cfg
        return schedule(self.decisions, c.eps_start, c.eps_end, c.eps_span)

    @property
    def learning_rate(self) -> float:
        c = self.cfg
        return schedule(self.updates, c.lr_start, c.lr_end, c.lr_span)

    def q_values(self, x, target: bool = False) -> np.ndarray:
        net = self.target if target else self.model
        return net.forward(x)

    def act(self, x, rng, greedy: bool = False) -> int:
        q = self.model.forward(x[None])[0]
        eps = 0.0 if greedy else self.epsilon
        a = select_action(q, eps, rng)
        if not greedy:
            self.decisions += 1
        return a

    def remember(self, s, a, r, s2, done=False, discount=None):
        """Store a transition. ``r`` is the (already discounted) reward collected
        between the decision and ``s2``; ``discount`` is the factor on the
        bootstrap term, eta**k for a transition spanning k ticks (default eta)."""
        if self.buffer is None:
            self.buffer = ReplayBuffer(self.cfg.replay_capacity, np.shape(s),
                                       np.int64 if self.cfg.profile == "tabular" else np.float32)
        gamma = self.cfg.discount if discount is None else discount
        self.buffer.push(s, a, r * self.cfg.reward_scale, s2, done, gamma)

    def sync_target(self):
        self.target.set_params(self.model.params)

    def q_update(self, batch, lr: float | None = None) -> float:
        """One SGD step on the mean of 0.5 * (r + eta * max Q_target(s') - Q(s, a))^2.

        ``batch`` is ``(s, a, r, s2, done)`` with an optional sixth entry of
        per-transition discounts replacing eta.
        """
        s, a, r, s2, done = batch[:5]
        if len(a) == 0:
            raise ConfigError("empty sample")
        lr = self.learning_rate if lr is None else lr
        gamma = batch[5] if len(batch) > 5 else self.cfg.discount
        q_next = self.target.forward(s2).max(axis=1)
        y = np.asarray(r, dtype=float) + gamma * q_next * (1.0 - np.asarray(done, dtype=float))
        q = self.model.forward(s)
        idx = np.arange(len(a))
        err = q[idx, a] - y
        loss = 0.5 * float(np.mean(err ** 2))
        if not np.isfinite(loss):
            raise NumericError(f"non-finite loss {loss}")
        dq = np.zeros_like(q)
        dq[idx, a] = err / len(a)
        grads = self.model.backward(dq)
        if self.cfg.grad_clip > 0:
            norm = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
            if norm > self.cfg.grad_clip:
                scale = self.cfg.grad_clip / norm
                grads = {k: g * scale for k, g in grads.items()}
        for k, g in grads.items():
            self.model.params[k] -= lr * g
        self.updates += 1
        if self.updates % self.cfg.target_sync == 0:
            self.sync_target()
        return loss

    def learn(self, rng) -> float | None:
        if self.buffer is None or len(self.buffer) < self.cfg.batch_size:
            return None
        return self.q_update(self.buffer.sample(self.cfg.batch_size, rng))

    # -- checkpoints -------------------------------------------------------
    def header(self, grid=None) -> dict:
        h = {
            "version": CHECKPOINT_VERSION,
            "agent": self.cfg.__dict__.copy(),
            "model": self.model.config(),
            "decisions": self.decisions,
            "updates": self.updates,
        }
        if grid is not None:
            h["grid"] = {"rows": grid.rows, "cols": grid.cols, "cell_size": grid.cell_size}
        return h

    def save(self, path, grid=None):
        arrays = {"theta/" + k: v for k, v in self.model.params.items()}
        arrays.update({"target/" + k: v for k, v in self.target.params.items()})
        arrays["header"] = np.frombuffer(json.dumps(self.header(grid), sort_keys=True).encode(), dtype=np.uint8)
        d = os.path.dirname(os.path.abspath(path))
        os.makedirs(d, exist_ok=True)
        buf = io.BytesIO()
        np.savez(buf, **arrays)
        tmp = str(path) + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path, grid=None) -> "QFunction":
        with np.load(path) as z:
            header = json.loads(bytes(z["header"]).decode())
            if header.get("version") != CHECKPOINT_VERSION:
                raise ConfigError(f"checkpoint version {header.get('version')} unsupported")
            if grid is not None and "grid" in header:
                g = header["grid"]
                if (g["rows"], g["cols"]) != (grid.rows, grid.cols) and header["model"]["profile"] == "tabular":
                    raise ConfigError("tabular checkpoint was trained on a different grid")
            agent = cls(AgentConfig(**header["agent"]))
            agent.model.set_params({k[6:]: z[k] for k in z.files if k.startswith("theta/")})
            agent.target.set_params({k[7:]: z[k] for k in z.files if k.startswith("target/")})
            agent.decisions = header["decisions"]
            agent.updates = header["updates"]
        return agent


def greedy_values(agent: QFunction, windows: np.ndarray, chunk: int = 256) -> np.ndarray:
    """max_a Q for a stack of state windows, batched."""
    out = np.empty(len(windows))
    for i in range(0, len(windows), chunk):
        out[i:i + chunk] = agent.model.forward(windows[i:i + chunk]).max(axis=1)
    return out


__all__ = ["schedule", "select_action", "ReplayBuffer", "AgentConfig", "QFunction",
           "greedy_values", "N_ACTIONS"]
