"""Small fully connected Q-network in plain numpy, float64 throughout.

Parameters are a list of ``(W, b)`` pairs; hidden layers use ReLU and the
output layer is linear with one unit per option.
"""

from __future__ import annotations

import numpy as np

Params = list[tuple[np.ndarray, np.ndarray]]


def init_mlp(sizes: tuple[int, ...] | list[int], rng: np.random.Generator) -> Params:
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        params.append((W, b))
    return params


def copy_params(params: Params) -> Params:
    return [(W.copy(), b.copy()) for W, b in params]


def n_parameters(params: Params) -> int:
    return sum(W.size + b.size for W, b in params)


def forward(params: Params, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Return outputs and the per-layer inputs needed by ``backward``."""
    cache = [x]
    h = x
    last = len(params) - 1
    for i, (W, b) in enumerate(params):
        h = h @ W + b
        if i < last:
            h = np.maximum(h, 0.0)
        cache.append(h)
    return h, cache


def backward(params: Params, cache: list[np.ndarray], dout: np.ndarray) -> Params:
    grads: Params = [None] * len(params)  # type: ignore[list-item]
    g = dout
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        inp = cache[i]
        grads[i] = (inp.T @ g, g.sum(axis=0))
        if i > 0:
            g = (g @ W.T) * (cache[i] > 0.0)
    return grads


def td_loss_and_grad(
    params: Params, obs: np.ndarray, options: np.ndarray, targets: np.ndarray
) -> tuple[float, Params, np.ndarray]:
    """Mean squared TD error against fixed targets, and its gradient.

    Targets are treated as constants (they come from the frozen target
    network). Returns ``(loss, grads, delta)`` with ``delta = target - Q``.
    """
    q, cache = forward(params, obs)
    rows = np.arange(len(options))
    delta = targets - q[rows, options]
    loss = float(np.mean(delta**2))
    dq = np.zeros_like(q)
    dq[rows, options] = -2.0 * delta / len(options)
    return loss, backward(params, cache, dq), delta


def flatten(params: Params) -> np.ndarray:
    return np.concatenate([a.ravel() for pair in params for a in pair])


def unflatten(vec: np.ndarray, like: Params) -> Params:
    out = []
    i = 0
    for W, b in like:
        Wn = vec[i : i + W.size].reshape(W.shape)
        i += W.size
        bn = vec[i : i + b.size].reshape(b.shape)
        i += b.size
        out.append((Wn.copy(), bn.copy()))
    return out


def clip_by_global_norm(grads: Params, max_norm: float) -> tuple[Params, float]:
    norm = float(np.sqrt(sum(float(np.sum(W * W)) + float(np.sum(b * b)) for W, b in grads)))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        grads = [(W * scale, b * scale) for W, b in grads]
    return grads, norm


class Adam:
    def __init__(self, params: Params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        self.v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        self.t = 0

    def step(self, params: Params, grads: Params) -> Params:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        new = []
        for i, ((W, b), (gW, gb)) in enumerate(zip(params, grads)):
            mW, mb = self.m[i]
            vW, vb = self.v[i]
            mW = b1 * mW + (1 - b1) * gW
            mb = b1 * mb + (1 - b1) * gb
            vW = b2 * vW + (1 - b2) * gW * gW
            vb = b2 * vb + (1 - b2) * gb * gb
            self.m[i] = (mW, mb)
            self.v[i] = (vW, vb)
            W = W - self.lr * (mW / c1) / (np.sqrt(vW / c2) + self.eps)
            b = b - self.lr * (mb / c1) / (np.sqrt(vb / c2) + self.eps)
            new.append((W, b))
        return new

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "m": [[W.tolist(), b.tolist()] for W, b in self.m],
            "v": [[W.tolist(), b.tolist()] for W, b in self.v],
        }

    def load_state_dict(self, d: dict) -> None:
        self.t = d["t"]
        self.m = [(np.array(W, dtype=np.float64), np.array(b, dtype=np.float64)) for W, b in d["m"]]
        self.v = [(np.array(W, dtype=np.float64), np.array(b, dtype=np.float64)) for W, b in d["v"]]


def params_to_lists(params: Params) -> list:
    return [[W.tolist(), b.tolist()] for W, b in params]


def params_from_lists(data: list) -> Params:
    return [(np.array(W, dtype=np.float64), np.array(b, dtype=np.float64)) for W, b in data]
