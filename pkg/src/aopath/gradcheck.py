"""Central finite-difference oracle for checking tape gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .numerics import Tensor


def numerical_grad(loss_fn: Callable[[], float], tensor: Tensor, h: float = 1e-5, indices=None) -> np.ndarray:
    """``d loss / d tensor`` by central differences, perturbing ``tensor.data`` in place.

    ``indices`` restricts the probe to a subset of flat positions; the other
    entries of the returned array are NaN.
    """
    flat = tensor.data.reshape(-1)
    out = np.full(flat.shape, np.nan)
    probe = range(flat.size) if indices is None else indices
    for i in probe:
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn()
        flat[i] = orig - h
        down = loss_fn()
        flat[i] = orig
        out[i] = (up - down) / (2.0 * h)
    return out.reshape(tensor.shape)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-12) -> float:
    """``||a - n|| / max(||a||, ||n||, floor)`` over the probed entries (NaN = unprobed)."""
    a = np.asarray(analytic, dtype=float).reshape(-1)
    n = np.asarray(numeric, dtype=float).reshape(-1)
    keep = ~np.isnan(n)
    a, n = a[keep], n[keep]
    if a.size == 0:
        return 0.0
    scale = max(np.linalg.norm(a), np.linalg.norm(n), floor)
    return float(np.linalg.norm(a - n) / scale)


def check_gradients(
    build_loss, tensors, h: float = 1e-5, max_probes: int | None = None, seed: int = 0, floor: float = 1e-6
) -> dict[str, float]:
    """Relative error of tape gradients against central differences, per tensor.

    ``floor`` bounds the denominator from below. Central differences carry
    roundoff of order ``eps * |loss| / h`` (about 1e-11 at unit loss), so a gradient
    that is exactly zero would otherwise report a relative error near 1.

    ``build_loss()`` must rebuild the scalar loss from scratch on each call.
    ``tensors`` maps names to the leaf tensors to check. With ``max_probes``
    only that many randomly chosen entries of each tensor are probed.
    """
    from .numerics import no_grad

    for t in tensors.values():
        t.grad = None
    build_loss().backward()
    analytic = {name: np.zeros(t.shape) if t.grad is None else t.grad.copy() for name, t in tensors.items()}

    def scalar():
        with no_grad():
            return build_loss().item()

    rng = np.random.default_rng(seed)
    errors = {}
    for name, t in tensors.items():
        indices = None
        if max_probes is not None and t.data.size > max_probes:
            indices = rng.choice(t.data.size, size=max_probes, replace=False)
        errors[name] = relative_error(analytic[name], numerical_grad(scalar, t, h, indices), floor)
    return errors
