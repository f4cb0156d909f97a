"""Multiplier-weighted dataset mixing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TypeVar

import numpy as np

T = TypeVar("T")


@dataclass
class DatasetSpec:
    name: str
    path: str
    multiplier: int = 1
    annotations: str | None = None

    def __post_init__(self):
        if int(self.multiplier) != self.multiplier or self.multiplier < 1:
            raise ValueError(f"multiplier must be a positive integer, got {self.multiplier}")
        self.multiplier = int(self.multiplier)


def mix_datasets(items_by_dataset: dict[str, Sequence[T]], multipliers: dict[str, int],
                 rng: np.random.Generator) -> list[T]:
    """One epoch stream: every dataset's items repeated `multiplier` times,
    globally shuffled. Length is exactly sum(multiplier * len(items))."""
    stream: list[T] = []
    for name in sorted(items_by_dataset):
        mult = multipliers.get(name, 1)
        if mult < 1:
            raise ValueError(f"multiplier for {name!r} must be >= 1")
        for _ in range(mult):
            stream.extend(items_by_dataset[name])
    order = rng.permutation(len(stream))
    return [stream[i] for i in order]
