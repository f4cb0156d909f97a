"""Token-level generation metrics and helpers."""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter

import numpy as np

_WS_RE = re.compile(r"\s+")


def normalize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    out = []
    for ch in text.lower():
        if unicodedata.category(ch).startswith("P"):
            out.append(" ")
        else:
            out.append(ch)
    return [t for t in _WS_RE.split("".join(out)) if t]


def exact_match(pred: str, gold: str) -> float:
    return float(normalize(pred) == normalize(gold))


def token_f1(pred: str, gold: str) -> float:
    p, g = normalize(pred), normalize(gold)
    if not p or not g:
        return float(p == g)
    common = Counter(p) & Counter(g)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(p)
    recall = overlap / len(g)
    return 2 * precision * recall / (precision + recall)


def rouge_1(pred: str, gold: str) -> float:
    """Unigram Rouge F1 over normalized token sets."""
    p, g = set(normalize(pred)), set(normalize(gold))
    if not p or not g:
        return float(p == g)
    overlap = len(p & g)
    if overlap == 0:
        return 0.0
    precision = overlap / len(p)
    recall = overlap / len(g)
    return 2 * precision * recall / (precision + recall)


def max_gen_len(lengths: list[int]) -> int:
    """Nearest-rank 95th percentile: smallest L with >= 95% of lengths <= L."""
    if not lengths:
        raise ValueError("empty length list")
    ordered = sorted(lengths)
    k = math.ceil(0.95 * len(ordered))
    return ordered[max(k - 1, 0)]


def sample_negatives(labels: list, gold_index: int, k: int, rng: np.random.Generator) -> list:
    """k distinct non-gold labels, for building multi-choice items out of
    classification tasks."""
    pool = [l for i, l in enumerate(labels) if i != gold_index]
    if k > len(pool):
        raise ValueError(f"cannot draw {k} negatives from {len(pool)} labels")
    idx = rng.choice(len(pool), size=k, replace=False)
    return [pool[i] for i in sorted(idx)]
