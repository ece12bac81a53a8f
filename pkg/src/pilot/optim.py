"""Adam optimiser and global-norm gradient clipping."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


def global_norm(grads) -> float:
    """L2 norm of the concatenation of all gradient arrays."""
    total = 0.0
    for g in grads:
        if g is not None:
            total += float(np.sum(np.asarray(g) ** 2))
    return float(np.sqrt(total))


def clip_gradients(grads, max_norm: float):
    """Scale gradients so their global L2 norm is at most ``max_norm``.

    Direction is preserved; gradients already inside the ball pass through
    untouched.
    """
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    norm = global_norm(grads)
    if norm <= max_norm:
        return list(grads)
    scale = max_norm / norm
    return [None if g is None else g * scale for g in grads]


class Adam:
    """Adam with bias correction over a fixed parameter group.

    Holds first/second moment accumulators and a step counter per parameter;
    ``step`` consumes either explicit gradients or the parameters' ``.grad``.
    """

    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params: list[Tensor] = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, grads=None) -> None:
        if grads is None:
            grads = [p.grad for p in self.params]
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter group")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if g is None:
                g = np.zeros_like(p.data)
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_arrays(self) -> dict:
        """Moment/step state as named arrays (for checkpointing)."""
        out = {"adam.t": np.array([self.t], dtype=np.float64)}
        for i in range(len(self.params)):
            out[f"adam.m.{i}"] = self.m[i]
            out[f"adam.v.{i}"] = self.v[i]
        return out
