"""Small fully connected networks with hand-written backprop and Adam."""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def silu(z):
    return z * expit(z)


def silu_grad(z):
    s = expit(z)
    return s * (1.0 + z * (1.0 - s))


class DenseNet:
    """Affine layers with SiLU between them and a linear head.

    Parameters live in ``self.params`` as ``[W0, b0, W1, b1, ...]`` so the
    optimizer and the checkpoint code can treat them as a flat list.
    """

    def __init__(self, widths, rng: np.random.Generator | None = None,
                 dtype=np.float32):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or min(widths) < 1:
            raise ValueError(f"bad layer widths {widths}")
        self.widths = widths
        self.dtype = np.dtype(dtype)
        self.params: list[np.ndarray] = []
        if rng is None:
            for fan_in, fan_out in zip(widths[:-1], widths[1:]):
                self.params += [np.zeros((fan_in, fan_out), self.dtype),
                                np.zeros(fan_out, self.dtype)]
            return
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            W = rng.standard_normal((fan_in, fan_out)) * np.sqrt(1.0 / fan_in)
            self.params += [W.astype(self.dtype), np.zeros(fan_out, self.dtype)]

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params))

    def forward(self, h, cache: bool = False):
        h = np.asarray(h, dtype=self.dtype)
        pre = []
        inputs = []
        for i in range(self.n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            inputs.append(h)
            z = h @ W + b
            if i < self.n_layers - 1:
                pre.append(z)
                h = silu(z)
            else:
                h = z
        if cache:
            return h, (inputs, pre)
        return h

    def backward(self, grad_out, cache) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of the parameters and of the network input."""
        inputs, pre = cache
        grads: list[np.ndarray] = [None] * len(self.params)  # type: ignore[list-item]
        g = np.asarray(grad_out, dtype=self.dtype)
        for i in reversed(range(self.n_layers)):
            if i < self.n_layers - 1:
                g = g * silu_grad(pre[i])
            grads[2 * i] = inputs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.params[2 * i].T
        return grads, g

    def astype(self, dtype) -> "DenseNet":
        out = DenseNet(self.widths, None, dtype)
        out.params = [p.astype(dtype) for p in self.params]
        return out

    def freeze(self) -> None:
        for p in self.params:
            p.setflags(write=False)


class Adam:
    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.step_count = 0

    def step(self, params, grads) -> None:
        self.step_count += 1
        c1 = 1.0 - self.beta1 ** self.step_count
        c2 = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype)
