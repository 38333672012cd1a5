"""Minimal dense/LSTM toolkit with hand-written reverse-mode gradients.

Everything is float64 and batch-first: inputs are ``[batch, dim]`` (or
``[batch, time, dim]`` for sequences). Layers keep their parameters as plain
numpy arrays and expose exact analytic gradients through ``backward``; the
test suite holds every backward pass to a central finite-difference check.
"""

from __future__ import annotations

import json
import os
from typing import Iterable

import numpy as np

Array = np.ndarray

CHECKPOINT_VERSION = 1

_ACTIVATIONS = ("identity", "relu", "tanh")


def uniform_init(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> Array:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases start at zero elsewhere."""
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


def _sigmoid(x: Array) -> Array:
    # Clipping keeps exp() finite; saturated gates are exactly 0/1 afterwards.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Dense:
    """Affine layer ``y = act(x @ W.T + b)`` with activation in {identity, relu, tanh}."""

    def __init__(self, rng: np.random.Generator, in_dim: int, out_dim: int,
                 activation: str = "identity"):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.W = uniform_init(rng, in_dim, (out_dim, in_dim))
        self.b = np.zeros(out_dim)

    def forward(self, x: Array) -> tuple[Array, tuple]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"expected input [batch, {self.in_dim}], got {x.shape}")
        pre = x @ self.W.T + self.b
        if self.activation == "relu":
            y = np.maximum(pre, 0.0)
        elif self.activation == "tanh":
            y = np.tanh(pre)
        else:
            y = pre
        return y, (x, pre, y)

    def backward(self, cache: tuple, dy: Array) -> tuple[Array, dict[str, Array]]:
        x, pre, y = cache
        if self.activation == "relu":
            dpre = dy * (pre > 0.0)
        elif self.activation == "tanh":
            dpre = dy * (1.0 - y * y)
        else:
            dpre = dy
        dW = dpre.T @ x
        db = dpre.sum(axis=0)
        dx = dpre @ self.W
        return dx, {"W": dW, "b": db}

    def params(self) -> dict[str, Array]:
        return {"W": self.W, "b": self.b}

    def set_params(self, blocks: dict[str, Array]) -> None:
        self.W = np.asarray(blocks["W"], dtype=np.float64)
        self.b = np.asarray(blocks["b"], dtype=np.float64)


class LstmCell:
    """Single-layer LSTM consuming ``[batch, time, in_dim]`` sequences.

    Gate projections are stacked as one matrix in (input, forget, output,
    candidate) order; the forget-gate bias starts at +1.0.
    """

    def __init__(self, rng: np.random.Generator, in_dim: int, hidden_dim: int):
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim
        h4 = 4 * hidden_dim
        self.W = uniform_init(rng, in_dim, (h4, in_dim))
        self.U = uniform_init(rng, hidden_dim, (h4, hidden_dim))
        self.b = np.zeros(h4)
        self.b[hidden_dim:2 * hidden_dim] = 1.0

    def forward(self, xs: Array) -> tuple[Array, tuple]:
        """Run the recurrence and return the final hidden state ``[batch, hidden]``."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 3 or xs.shape[2] != self.in_dim:
            raise ValueError(f"expected input [batch, time, {self.in_dim}], got {xs.shape}")
        batch, steps, _ = xs.shape
        if steps == 0:
            raise ValueError("empty sequence")
        hd = self.hidden_dim
        h = np.zeros((batch, hd))
        c = np.zeros((batch, hd))
        per_step = []
        for t in range(steps):
            x = xs[:, t, :]
            gates = x @ self.W.T + h @ self.U.T + self.b
            i = _sigmoid(gates[:, :hd])
            f = _sigmoid(gates[:, hd:2 * hd])
            o = _sigmoid(gates[:, 2 * hd:3 * hd])
            g = np.tanh(gates[:, 3 * hd:])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            per_step.append((x, h, c, i, f, o, g, c_new, tc))
            h, c = h_new, c_new
        return h, (xs.shape, per_step)

    def backward(self, cache: tuple, dh_last: Array) -> tuple[Array, dict[str, Array]]:
        """Backprop through time from a gradient on the final hidden state."""
        (batch, steps, _), per_step = cache
        hd = self.hidden_dim
        dW = np.zeros_like(self.W)
        dU = np.zeros_like(self.U)
        db = np.zeros_like(self.b)
        dxs = np.zeros((batch, steps, self.in_dim))
        dh = np.asarray(dh_last, dtype=np.float64)
        dc = np.zeros((batch, hd))
        for t in range(steps - 1, -1, -1):
            x, h_prev, c_prev, i, f, o, g, c_new, tc = per_step[t]
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            d_gates = np.concatenate(
                [di * i * (1.0 - i),
                 df * f * (1.0 - f),
                 do * o * (1.0 - o),
                 dg * (1.0 - g * g)],
                axis=1,
            )
            dW += d_gates.T @ x
            dU += d_gates.T @ h_prev
            db += d_gates.sum(axis=0)
            dxs[:, t, :] = d_gates @ self.W
            dh = d_gates @ self.U
            dc = dc * f
        return dxs, {"W": dW, "U": dU, "b": db}

    def params(self) -> dict[str, Array]:
        return {"W": self.W, "U": self.U, "b": self.b}

    def set_params(self, blocks: dict[str, Array]) -> None:
        self.W = np.asarray(blocks["W"], dtype=np.float64)
        self.U = np.asarray(blocks["U"], dtype=np.float64)
        self.b = np.asarray(blocks["b"], dtype=np.float64)


class Mlp:
    """Stack of Dense layers applied in order."""

    def __init__(self, rng: np.random.Generator, dims: Iterable[int],
                 hidden_activation: str, out_activation: str = "identity"):
        dims = list(dims)
        self.layers = []
        for k in range(len(dims) - 1):
            act = hidden_activation if k < len(dims) - 2 else out_activation
            self.layers.append(Dense(rng, dims[k], dims[k + 1], act))

    def forward(self, x: Array) -> tuple[Array, list]:
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, caches: list, dy: Array) -> tuple[Array, dict[str, Array]]:
        grads: dict[str, Array] = {}
        for k in range(len(self.layers) - 1, -1, -1):
            dy, layer_grads = self.layers[k].backward(caches[k], dy)
            for name, g in layer_grads.items():
                grads[f"{k}/{name}"] = g
        return dy, grads

    def params(self) -> dict[str, Array]:
        out = {}
        for k, layer in enumerate(self.layers):
            for name, p in layer.params().items():
                out[f"{k}/{name}"] = p
        return out

    def set_params(self, blocks: dict[str, Array]) -> None:
        for k, layer in enumerate(self.layers):
            layer.set_params({"W": blocks[f"{k}/W"], "b": blocks[f"{k}/b"]})


class Adam:
    """Standard Adam over a named dict of parameter arrays (updates in place)."""

    def __init__(self, params: dict[str, Array], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps_num: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps_num = eps_num
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, Array], grads: dict[str, Array]) -> None:
        for name in params:
            if name not in grads:
                raise KeyError(f"missing gradient for parameter block {name!r}")
            if not np.all(np.isfinite(grads[name])):
                raise FloatingPointError(f"non-finite gradient in parameter block {name!r}")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, p in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps_num)


def save_params(path: str, blocks: dict[str, Array]) -> None:
    """Write named parameter blocks as versioned JSON; round-trips bit-exactly."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "blocks": {
            name: {"shape": list(arr.shape), "data": np.asarray(arr, dtype=np.float64).ravel().tolist()}
            for name, arr in blocks.items()
        },
    }
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)


def load_params(path: str) -> dict[str, Array]:
    with open(path) as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    blocks = {}
    for name, entry in payload["blocks"].items():
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        blocks[name] = arr
    return blocks


def finite_difference_grads(loss_fn, params: dict[str, Array], h: float = 1e-5) -> dict[str, Array]:
    """Central-difference gradient of ``loss_fn()`` w.r.t. every entry of ``params``.

    ``loss_fn`` must read the live arrays in ``params``; used as the
    independent oracle for every analytic backward pass.
    """
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        flat = p.ravel()
        gflat = g.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = loss_fn()
            flat[idx] = orig - h
            down = loss_fn()
            flat[idx] = orig
            gflat[idx] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


def relative_error(a: Array, b: Array) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    denom = max(na, nb, 1e-12)
    return float(np.linalg.norm(a - b)) / denom
