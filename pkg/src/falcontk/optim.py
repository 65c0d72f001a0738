"""Adaptive-moment optimizer with decoupled weight decay (AdamW).

Operates in place on a list of numpy arrays. Update per parameter ``x`` with
gradient ``g`` at step t (1-based)::

    x <- x - lr * wd * x
    m <- b1 * m + (1 - b1) * g
    v <- b2 * v + (1 - b2) * g**2
    x <- x - lr * (m / (1 - b1**t)) / (sqrt(v / (1 - b2**t)) + eps)
"""
from __future__ import annotations

import numpy as np


class AdamW:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if not (0.0 <= betas[0] < 1.0 and 0.0 <= betas[1] < 1.0):
            raise ValueError(f"betas must lie in [0, 1), got {betas}")
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = [np.zeros_like(p) for p in self.params]
        self._v = [np.zeros_like(p) for p in self.params]

    def step(self, grads) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for x, g, m, v in zip(self.params, grads, self._m, self._v):
            if self.weight_decay:
                x -= self.lr * self.weight_decay * x
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            x -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
