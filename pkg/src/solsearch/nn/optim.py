"""Adam optimizer over a parameter store."""

from __future__ import annotations

import numpy as np

from .params import ParameterStore

__all__ = ["Adam"]


class Adam:
    """Adam with the usual defaults; state keyed by parameter name."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, store: ParameterStore, grads: dict[str, np.ndarray]) -> None:
        """One update; ``grads`` must cover exactly the stored names."""
        names = set(store.names())
        if set(grads) != names:
            missing = sorted(names - set(grads))
            extra = sorted(set(grads) - names)
            raise ValueError(
                f"gradient names mismatch: missing={missing}, unexpected={extra}"
            )
        for name in store.names():
            if not np.isfinite(grads[name]).all():
                raise ValueError(f"non-finite gradient for parameter {name!r}")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, param in store.items():
            g = grads[name]
            m = self._m.get(name)
            v = self._v.get(name)
            if m is None:
                m = np.zeros_like(param.data)
                v = np.zeros_like(param.data)
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * (g * g)
            self._m[name] = m
            self._v[name] = v
            step = self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            param.data = param.data - step
