"""Finite-difference gradient checking.

Central differences with h=1e-5 against the analytic gradients produced by
:func:`trunklm.autodiff.backward`, at 64-bit precision.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .autodiff import Tensor, backward


def numeric_grad(f: Callable[[], Tensor], param: Tensor, coords, h: float = 1e-5) -> np.ndarray:
    """Central-difference d f / d param at the given flat coordinates."""
    flat = param.data.reshape(-1)
    out = np.empty(len(coords))
    for i, c in enumerate(coords):
        orig = flat[c]
        flat[c] = orig + h
        fp = f().item()
        flat[c] = orig - h
        fm = f().item()
        flat[c] = orig
        out[i] = (fp - fm) / (2.0 * h)
    return out


def check_gradients(
    f: Callable[[], Tensor],
    params: dict[str, Tensor],
    rel_tol: float = 1e-4,
    max_coords_per_param: int | None = None,
    rng: np.random.Generator | None = None,
    h: float = 1e-5,
) -> float:
    """Compare analytic and numeric gradients for every parameter.

    Returns the worst relative error seen; raises AssertionError past
    rel_tol. Large parameters can be spot-checked by sampling
    `max_coords_per_param` coordinates."""
    loss = f()
    backward(loss, params=params.values())
    analytic = {n: p.grad.copy() for n, p in params.items()}
    worst = 0.0
    for name, p in params.items():
        n = p.data.size
        if max_coords_per_param is not None and n > max_coords_per_param:
            if rng is None:
                rng = np.random.default_rng(0)
            coords = rng.choice(n, size=max_coords_per_param, replace=False)
        else:
            coords = np.arange(n)
        num = numeric_grad(f, p, coords, h=h)
        ana = analytic[name].reshape(-1)[coords]
        for c, a, g in zip(coords, ana, num):
            # floor the denominator at the central-difference noise scale
            # (~eps/h); below it the comparison is meaningless
            denom = max(abs(a), abs(g), 1e-6)
            rel = abs(a - g) / denom
            worst = max(worst, rel)
            if rel >= rel_tol:
                raise AssertionError(
                    f"gradient mismatch at {name}[{c}]: analytic={a:.6e} numeric={g:.6e} rel={rel:.3e}"
                )
    return worst
