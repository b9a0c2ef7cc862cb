"""Small dense networks with hand-written backprop, float64 throughout.

Parameters are a flat list ``[W0, b0, W1, b1, ...]`` with ``W`` shaped
``(fan_in, fan_out)``; inputs are batched row-wise.
"""
from __future__ import annotations

import numpy as np

ACTIVATIONS = ("relu", "tanh", "identity")


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "identity":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name, z, a):
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def init_mlp(sizes, rng: np.random.Generator, final_scale=1.0):
    """Uniform ``+-1/sqrt(fan_in)`` init; the last layer is shrunk by ``final_scale``."""
    params = []
    n_layers = len(sizes) - 1
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        scale = final_scale if k == n_layers - 1 else 1.0
        params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)) * scale)
        params.append(rng.uniform(-bound, bound, size=fan_out) * scale)
    return params


def mlp_forward(params, x, activation="relu"):
    """Hidden layers use ``activation``, the output layer is linear.

    Returns ``(output, cache)``; ``cache`` feeds :func:`mlp_backward`.
    """
    h = np.atleast_2d(np.asarray(x, dtype=float))
    cache = [h]
    n_layers = len(params) // 2
    for k in range(n_layers):
        z = h @ params[2 * k] + params[2 * k + 1]
        if k < n_layers - 1:
            h = _act(activation, z)
            cache.append((z, h))
        else:
            h = z
    return h, cache


def mlp_backward(params, cache, grad_out, activation="relu"):
    """Gradients of ``sum(grad_out * output)`` w.r.t. params and input."""
    g = np.atleast_2d(grad_out)
    n_layers = len(params) // 2
    grads = [None] * len(params)
    for k in range(n_layers - 1, -1, -1):
        h_in = cache[0] if k == 0 else cache[k][1]
        grads[2 * k] = h_in.T @ g
        grads[2 * k + 1] = g.sum(axis=0)
        g = g @ params[2 * k].T
        if k > 0:
            z, a = cache[k]
            g = g * _act_grad(activation, z, a)
    return grads, g


class Adam:
    def __init__(self, params, lr=1e-4, betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
