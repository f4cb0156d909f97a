"""Bijective codec between segment permutations and class indices.

A shuffled paragraph of n segments is one of n! permutations; classes for
all n in 1..m are packed consecutively, so the label space has
sum(j! for j=1..m) classes. A permutation p of size n maps to
offset(n) + lexicographic_rank(p) with offset(n) = sum(j! for j < n).
"""

import math
from itertools import permutations

__all__ = ["total_classes", "encode_permutation", "decode_class", "all_permutations"]


def total_classes(max_segments: int) -> int:
    if max_segments < 1:
        raise ValueError("max_segments must be >= 1")
    return sum(math.factorial(j) for j in range(1, max_segments + 1))


def _offset(n: int) -> int:
    return sum(math.factorial(j) for j in range(1, n))


def _validate(perm) -> tuple[int, ...]:
    perm = tuple(perm)
    if sorted(perm) != list(range(len(perm))) or not perm:
        raise ValueError(f"not a permutation of 0..{max(len(perm) - 1, 0)}: {perm}")
    return perm


def _lex_rank(perm: tuple[int, ...]) -> int:
    n = len(perm)
    remaining = sorted(perm)
    rank = 0
    for i, v in enumerate(perm):
        rank += remaining.index(v) * math.factorial(n - 1 - i)
        remaining.remove(v)
    return rank


def _lex_unrank(rank: int, n: int) -> tuple[int, ...]:
    remaining = list(range(n))
    out = []
    for i in range(n):
        f = math.factorial(n - 1 - i)
        q, rank = divmod(rank, f)
        out.append(remaining.pop(q))
    return tuple(out)


def encode_permutation(perm) -> int:
    perm = _validate(perm)
    return _offset(len(perm)) + _lex_rank(perm)


def decode_class(class_index: int) -> tuple[int, ...]:
    if class_index < 0:
        raise ValueError("class index must be non-negative")
    n = 1
    while _offset(n + 1) <= class_index:
        n += 1
    rank = class_index - _offset(n)
    if rank >= math.factorial(n):  # unreachable by construction
        raise ValueError(f"class index {class_index} out of range")
    return _lex_unrank(rank, n)


def all_permutations(n: int):
    return permutations(range(n))
