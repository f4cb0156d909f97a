"""Pure-NumPy implementations of the hot kernels.

This is the fallback backend; `trunklm.kernels._fused` (Cython) implements
the same signatures. Both operate on float64 arrays and must agree to
floating-point noise. Shapes are fixed here: elementwise kernels take flat
1-D arrays, row kernels take 2-D (rows, cols).
"""

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT2PI = 0.3989422804014327


def gelu_forward(x: np.ndarray) -> np.ndarray:
    """Exact Gaussian-error-linear unit: x * Phi(x)."""
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_backward(x: np.ndarray, dout: np.ndarray) -> np.ndarray:
    """d/dx [x * Phi(x)] = Phi(x) + x * phi(x), times dout."""
    phi = _INV_SQRT2PI * np.exp(-0.5 * x * x)
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    return (cdf + x * phi) * dout


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Row softmax with max-subtraction. -inf entries get weight exactly 0;
    an all -inf row yields all zeros."""
    m = x.max(axis=1, keepdims=True)
    safe = np.where(np.isneginf(m), 0.0, m)
    e = np.exp(x - safe)
    s = e.sum(axis=1, keepdims=True)
    return np.where(s > 0.0, e / np.where(s == 0.0, 1.0, s), 0.0)


def layernorm_forward(
    x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-row normalization. Returns (y, mean, rstd) with mean/rstd cached
    for the backward pass."""
    mean = x.mean(axis=1)
    var = x.var(axis=1)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[:, None]) * rstd[:, None]
    return xhat * gamma + beta, mean, rstd


def layernorm_backward(
    dout: np.ndarray,
    x: np.ndarray,
    gamma: np.ndarray,
    mean: np.ndarray,
    rstd: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of layernorm_forward w.r.t. (x, gamma, beta)."""
    n = x.shape[1]
    xhat = (x - mean[:, None]) * rstd[:, None]
    dgamma = (dout * xhat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    dxhat = dout * gamma
    # dx = rstd * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
    m1 = dxhat.mean(axis=1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
    dx = rstd[:, None] * (dxhat - m1 - xhat * m2)
    return dx, dgamma, dbeta


def adam_update(
    p: np.ndarray,
    g: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
    weight_decay: float,
    t: int,
) -> None:
    """In-place bias-corrected Adam step with decoupled weight decay."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)
    if weight_decay != 0.0:
        p -= lr * weight_decay * p
