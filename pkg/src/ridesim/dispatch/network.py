"""Q-networks in plain numpy with hand-written backprop.

Every model maps a batch of inputs to ``(batch, 225)`` action values and
exposes ``params`` (name -> array), ``forward(x)`` and ``backward(dq)``; the
latter returns gradients for the most recent forward pass.

``compact``: log1p of a cropped 4-plane window, flattened, one ReLU hidden
layer, linear output. ``conv``: 51x51 crop, 29x29 average pooling to 23x23,
conv 16@5x5 -> 32@3x3 -> 64@3x3 -> 1x1 128 -> 1x1 1, ReLU between.
``tabular``: one free value per (state id, action), used for checking the
update rule.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, NumericError
from .state import N_ACTIONS, N_PLANES, ACTION_SIDE

PROFILES = ("compact", "conv", "tabular")
COMPACT_CROP = 2 * 7 + 1 + 4
CONV_CROP = 51
CONV_POOL = 29


def _he(rng, shape, fan_in):
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


class _Model:
    profile = ""
    crop = 0

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self._cache = None

    def _check(self, q):
        if not np.isfinite(q).all():
            norms = {k: float(np.linalg.norm(v)) for k, v in self.params.items()}
            raise NumericError(f"non-finite Q-values; parameter norms {norms}")
        return q

    def get_params(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}

    def set_params(self, params: dict):
        for k in self.params:
            if params[k].shape != self.params[k].shape:
                raise ConfigError(f"parameter {k}: shape {params[k].shape} != {self.params[k].shape}")
            self.params[k] = np.array(params[k], dtype=np.float64, copy=True)

    def config(self) -> dict:
        return {"profile": self.profile, "crop": self.crop}


class TabularQ(_Model):
    profile = "tabular"

    def __init__(self, n_states: int):
        super().__init__()
        self.n_states = n_states
        self.params = {"table": np.zeros((n_states, N_ACTIONS))}

    def forward(self, x):
        ids = np.asarray(x, dtype=np.int64).reshape(-1)
        self._cache = ids
        return self._check(self.params["table"][ids].copy())

    def backward(self, dq):
        g = np.zeros_like(self.params["table"])
        np.add.at(g, self._cache, dq)
        return {"table": g}

    def config(self):
        return {"profile": self.profile, "n_states": self.n_states}


class CompactQNet(_Model):
    profile = "compact"

    def __init__(self, crop: int = COMPACT_CROP, hidden: int = 64, seed: int = 0):
        super().__init__()
        self.crop, self.hidden = crop, hidden
        d = N_PLANES * crop * crop
        rng = np.random.default_rng(seed)
        self.params = {
            "w1": _he(rng, (d, hidden), d),
            "b1": np.zeros(hidden),
            "w2": np.zeros((hidden, N_ACTIONS)),  # zero output layer: Q starts at 0
            "b2": np.zeros(N_ACTIONS),
        }

    def forward(self, x):
        x = np.log1p(np.asarray(x, dtype=np.float64).reshape(len(x), -1))
        p = self.params
        z = x @ p["w1"] + p["b1"]
        h = np.maximum(z, 0.0)
        self._cache = (x, z, h)
        return self._check(h @ p["w2"] + p["b2"])

    def backward(self, dq):
        x, z, h = self._cache
        p = self.params
        dh = dq @ p["w2"].T
        dz = dh * (z > 0)
        return {"w1": x.T @ dz, "b1": dz.sum(0), "w2": h.T @ dq, "b2": dq.sum(0)}

    def config(self):
        return {"profile": self.profile, "crop": self.crop, "hidden": self.hidden}


def _conv(x, w, b):
    k = w.shape[-1]
    win = sliding_window_view(x, (k, k), axis=(2, 3))  # B,C,Ho,Wo,k,k
    return np.einsum("bchwij,fcij->bfhw", win, w, optimize=True) + b[None, :, None, None]


def _conv_back(x, w, dout):
    k = w.shape[-1]
    win = sliding_window_view(x, (k, k), axis=(2, 3))
    dw = np.einsum("bchwij,bfhw->fcij", win, dout, optimize=True)
    db = dout.sum(axis=(0, 2, 3))
    pad = np.pad(dout, ((0, 0), (0, 0), (k - 1, k - 1), (k - 1, k - 1)))
    pwin = sliding_window_view(pad, (k, k), axis=(2, 3))
    dx = np.einsum("bfhwij,fcij->bchw", pwin, w[:, :, ::-1, ::-1], optimize=True)
    return dx, dw, db


def _avg_pool(x, k):
    """Stride-1 ``k x k`` mean pooling via an integral image."""
    s = np.cumsum(np.cumsum(x, axis=2), axis=3)
    s = np.pad(s, ((0, 0), (0, 0), (1, 0), (1, 0)))
    tot = s[:, :, k:, k:] - s[:, :, :-k, k:] - s[:, :, k:, :-k] + s[:, :, :-k, :-k]
    return tot / (k * k)


class ConvQNet(_Model):
    profile = "conv"
    crop = CONV_CROP
    layers = (("c1", 16, 5), ("c2", 32, 3), ("c3", 64, 3), ("c4", 128, 1), ("c5", 1, 1))

    def __init__(self, seed: int = 0):
        super().__init__()
        rng = np.random.default_rng(seed)
        c_in = N_PLANES
        for name, c_out, k in self.layers:
            fan = c_in * k * k
            w = np.zeros((c_out, c_in, k, k)) if name == "c5" else _he(rng, (c_out, c_in, k, k), fan)
            self.params[name + "w"] = w
            self.params[name + "b"] = np.zeros(c_out)
            c_in = c_out

    def forward(self, x):
        x = np.log1p(np.asarray(x, dtype=np.float64))
        h = _avg_pool(x, CONV_POOL)
        acts = [h]
        pre = []
        for i, (name, _, _) in enumerate(self.layers):
            z = _conv(h, self.params[name + "w"], self.params[name + "b"])
            pre.append(z)
            h = z if i == len(self.layers) - 1 else np.maximum(z, 0.0)
            acts.append(h)
        self._cache = (acts, pre)
        if h.shape[-1] != ACTION_SIDE:
            raise ConfigError(f"conv profile needs {CONV_CROP}x{CONV_CROP} input")
        return self._check(h.reshape(len(x), N_ACTIONS))

    def backward(self, dq):
        acts, pre = self._cache
        g = {}
        d = dq.reshape(len(dq), 1, ACTION_SIDE, ACTION_SIDE)
        for i in range(len(self.layers) - 1, -1, -1):
            name = self.layers[i][0]
            if i < len(self.layers) - 1:
                d = d * (pre[i] > 0)
            dx, dw, db = _conv_back(acts[i], self.params[name + "w"], d)
            g[name + "w"], g[name + "b"] = dw, db
            d = dx
        return g


def build_model(profile: str, seed: int = 0, crop: int | None = None, hidden: int = 64,
                n_states: int = 1) -> _Model:
    if profile == "compact":
        return CompactQNet(crop or COMPACT_CROP, hidden, seed)
    if profile == "conv":
        return ConvQNet(seed)
    if profile == "tabular":
        return TabularQ(n_states)
    raise ConfigError(f"unknown network profile {profile!r}; choose from {PROFILES}")
