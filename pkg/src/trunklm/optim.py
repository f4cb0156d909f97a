"""Adam with decoupled weight decay and the warmup/linear-decay LR schedule."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .autodiff import Tensor

log = logging.getLogger(__name__)


@dataclass
class AdamHyper:
    lr_peak: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.01
    warmup_steps: int = 10_000
    total_steps: int = 100_000

    def validate(self) -> "AdamHyper":
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.weight_decay < 0.0:
            raise ValueError("weight decay must be non-negative")
        if not 0 < self.warmup_steps <= self.total_steps:
            raise ValueError("need 0 < warmup_steps <= total_steps")
        return self


@dataclass
class AdamState:
    """Step counter plus per-parameter first/second moment arrays."""

    hyper: AdamHyper
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def moments_for(self, name: str, param: Tensor) -> tuple[np.ndarray, np.ndarray]:
        if name not in self.m:
            self.m[name] = np.zeros_like(param.data)
            self.v[name] = np.zeros_like(param.data)
        return self.m[name], self.v[name]


def lr_at(step: int, hyper: AdamHyper) -> float:
    """Linear 0 -> lr_peak over warmup_steps, then linear decay to 0 at
    total_steps. Steps past total_steps clamp to 0 (with a warning)."""
    if step < 0:
        raise ValueError("step must be non-negative")
    if step > hyper.total_steps:
        log.warning("lr_at called with step %d > total_steps %d; clamping to 0", step, hyper.total_steps)
        return 0.0
    if step <= hyper.warmup_steps:
        return hyper.lr_peak * step / hyper.warmup_steps
    return hyper.lr_peak * (hyper.total_steps - step) / (hyper.total_steps - hyper.warmup_steps)


def _decays(name: str) -> bool:
    """Weight decay exempts biases and layer-norm parameters."""
    leaf = name.rsplit(".", 1)[-1]
    return leaf not in ("b", "bias", "gamma", "beta", "pos_bias_u", "pos_bias_v")


def adam_step(params: dict[str, Tensor], state: AdamState, lr: float | None = None) -> float:
    """One bias-corrected Adam update over `params`, in place.

    `lr` overrides the schedule (used while the progressive ramp owns the
    learning rate); by default the post-increment step's scheduled rate is
    used. Every parameter must carry a gradient."""
    missing = [n for n, p in params.items() if p.grad is None]
    if missing:
        raise ValueError(f"adam_step: missing gradients for {missing[:3]} (+{max(0, len(missing) - 3)} more)")
    state.step += 1
    t = state.step
    if lr is None:
        lr = lr_at(t, state.hyper)
    h = state.hyper
    for name, p in params.items():
        if not p.data.flags["C_CONTIGUOUS"]:
            raise ValueError(f"parameter {name!r} must be C-contiguous for in-place update")
        m, v = state.moments_for(name, p)
        wd = h.weight_decay if _decays(name) else 0.0
        kernels.adam_update(
            p.data.reshape(-1), np.ascontiguousarray(p.grad.reshape(-1)),
            m.reshape(-1), v.reshape(-1),
            lr, h.beta1, h.beta2, h.epsilon, wd, t,
        )
    return lr
