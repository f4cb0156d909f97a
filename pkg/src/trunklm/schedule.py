"""Progressive training schedule: simultaneous linear ramp of sequence
length, batch size, learning rate and dropout over an initial warmup
window, after which the learning rate hands off to the linear-decay phase
of the optimizer schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class Ramp:
    start: float
    end: float

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"ramp must be non-decreasing, got {self.start} -> {self.end}")

    def at(self, frac: float) -> float:
        return self.start + (self.end - self.start) * frac


@dataclass
class ProgressiveSchedule:
    warmup_steps: int = 10_000
    total_steps: int = 100_000
    seq_len: Ramp = field(default_factory=lambda: Ramp(128, 512))
    batch_size: Ramp = field(default_factory=lambda: Ramp(8, 2048))
    lr: Ramp = field(default_factory=lambda: Ramp(0.0, 1e-4))
    dropout: Ramp = field(default_factory=lambda: Ramp(0.0, 0.0))

    def __post_init__(self):
        if not 0 < self.warmup_steps <= self.total_steps:
            raise ValueError("need 0 < warmup_steps <= total_steps")
        for name in ("seq_len", "batch_size"):
            ramp = getattr(self, name)
            if _round_half_up(ramp.start) < 1 or _round_half_up(ramp.end) < 1:
                raise ValueError(f"{name} must round to positive integers")


@dataclass
class Factors:
    seq_len: int
    batch_size: int
    lr: float
    dropout: float


def factors_at(step: int, schedule: ProgressiveSchedule) -> Factors:
    """Scheduled factors at an optimizer step. Integer factors round half
    up. Past the warmup window the ramped factors sit at their end values
    and lr follows the linear decay to zero at total_steps."""
    if step < 0:
        raise ValueError("step must be non-negative")
    w = schedule.warmup_steps
    if step < w:
        frac = step / w
        lr = schedule.lr.at(frac)
        dropout = schedule.dropout.at(frac)
        seq = _round_half_up(schedule.seq_len.at(frac))
        batch = _round_half_up(schedule.batch_size.at(frac))
    else:
        seq = _round_half_up(schedule.seq_len.end)
        batch = _round_half_up(schedule.batch_size.end)
        dropout = schedule.dropout.end
        if step >= schedule.total_steps:
            lr = 0.0
        else:
            lr = schedule.lr.end * (schedule.total_steps - step) / (schedule.total_steps - w) \
                if schedule.total_steps > w else schedule.lr.end
    return Factors(seq, batch, lr, dropout)


def effective_batch(step: int, schedule: ProgressiveSchedule, device_batch: int) -> int:
    """Gradient-accumulation count: micro-batches of at most device_batch
    samples per optimizer step."""
    if device_batch < 1:
        raise ValueError("device_batch must be >= 1")
    return math.ceil(factors_at(step, schedule).batch_size / device_batch)


def dump_table(schedule: ProgressiveSchedule, every: int = 1) -> list[dict]:
    """Per-step factor table for audit."""
    rows = []
    for step in range(0, schedule.total_steps + 1, every):
        f = factors_at(step, schedule)
        rows.append({"step": step, "seq_len": f.seq_len, "batch_size": f.batch_size,
                     "lr": f.lr, "dropout": f.dropout})
    return rows
