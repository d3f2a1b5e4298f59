"""Adam optimizer with element-wise gradient clipping.

Gradients are clipped to [-clip, +clip] per element *before* entering the
moment estimates, so a single exploding step cannot poison the running
statistics.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import NonFiniteError


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip: float = 10.0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be > 0")
        if self.clip <= 0:
            raise ValueError("clip threshold must be > 0")


def clip_gradients(grad: np.ndarray, clip: float) -> np.ndarray:
    return np.clip(grad, -clip, clip)


def adam_step(store, grads: dict[str, np.ndarray], cfg: AdamConfig) -> None:
    """One Adam update over named gradients, in place on the store.

    Parameters without an entry in `grads` (or with an all-zero gradient)
    still advance the bias-correction step but keep their value when the
    gradient is zero.
    """
    store.step_count += 1
    t = store.step_count
    for name, grad in grads.items():
        if not np.isfinite(grad.sum()):
            raise NonFiniteError(f"non-finite gradient for parameter {name!r}")
        g = clip_gradients(grad, cfg.clip)
        m = store.moment1[name]
        v = store.moment2[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g**2
        m_hat = m / (1.0 - cfg.beta1**t)
        v_hat = v / (1.0 - cfg.beta2**t)
        store.params[name].data -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
