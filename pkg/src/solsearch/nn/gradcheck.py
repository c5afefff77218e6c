"""Central finite-difference gradient checking.

The numeric side never touches the tape: it perturbs raw parameter arrays
and re-evaluates the forward function, so it stays an independent oracle
for the analytic gradients.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .params import ParameterStore
from .tensor import Tensor, backward

__all__ = ["numeric_gradient", "max_relative_error", "check_gradients"]


def numeric_gradient(forward: Callable[[], float], array: np.ndarray,
                     h: float = 1e-5) -> np.ndarray:
    """Central differences of ``forward`` w.r.t. every entry of ``array``.

    ``forward`` must read ``array`` afresh on each call (it is mutated in
    place and restored).
    """
    grad = np.zeros_like(array)
    flat = array.ravel()
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        up = forward()
        flat[i] = original - h
        down = forward()
        flat[i] = original
        grad.ravel()[i] = (up - down) / (2.0 * h)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float = 1e-3) -> float:
    """Worst-case |a - n| / max(|a|, |n|, floor) over all entries."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(
    build_loss: Callable[[], Tensor],
    store: ParameterStore,
    names: list[str] | None = None,
    h: float = 1e-5,
    tol: float = 1e-4,
) -> dict[str, float]:
    """Compare backprop gradients with central differences per parameter.

    ``build_loss`` re-runs the full forward pass and returns the scalar
    loss tensor. Returns the max relative error per parameter name and
    raises AssertionError if any exceeds ``tol``.
    """
    store.zero_grads()
    loss = build_loss()
    backward(loss)
    analytic: Mapping[str, np.ndarray] = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in store.items()
    }

    def forward() -> float:
        return build_loss().item()

    errors: dict[str, float] = {}
    for name in names if names is not None else store.names():
        numeric = numeric_gradient(forward, store[name].data, h=h)
        errors[name] = max_relative_error(analytic[name], numeric)
    worst = max(errors.values()) if errors else 0.0
    if worst > tol:
        offenders = {k: v for k, v in errors.items() if v > tol}
        raise AssertionError(
            f"gradient check failed (tol={tol}): {offenders}"
        )
    return errors
