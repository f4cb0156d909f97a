"""Builders for the understanding-paradigm training samples.

All builders are pure functions of (inputs, rng) so sample construction is
reproducible from the run seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .permcode import encode_permutation

log = logging.getLogger(__name__)

WORD = "word"
PHRASE = "phrase"
ENTITY = "entity"

ADJACENT = 0
SAME_DOC = 1
DIFFERENT_DOCS = 2
DISTANCE_LABELS = ("adjacent", "same-doc-nonadjacent", "different-docs")


@dataclass
class Span:
    start: int
    end: int  # exclusive
    kind: str

    def __post_init__(self):
        if self.kind not in (WORD, PHRASE, ENTITY):
            raise ValueError(f"unknown span kind {self.kind!r}")
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad span [{self.start}, {self.end})")


@dataclass
class MaskedSample:
    input_ids: list[int]
    mask_positions: list[int]
    target_ids: list[int]
    spans: list[Span] = field(default_factory=list)

    def restore(self) -> list[int]:
        out = list(self.input_ids)
        for pos, tid in zip(self.mask_positions, self.target_ids):
            out[pos] = tid
        return out


def build_knowledge_masked_sample(
    doc_tokens: list[int],
    spans: list[Span],
    mask_rate: float,
    rng: np.random.Generator,
    mask_id: int,
    protect: frozenset[int] = frozenset(),
) -> MaskedSample:
    """Mask whole phrase/entity spans atomically and uncovered tokens as
    single-token word units, each unit independently with probability
    `mask_rate`. `protect` positions are never masked."""
    if not doc_tokens:
        raise ValueError("cannot mask an empty document")
    if not 0.0 < mask_rate < 1.0:
        raise ValueError("mask_rate must lie strictly between 0 and 1")
    n = len(doc_tokens)
    covered = np.zeros(n, dtype=bool)
    for s in spans:
        if s.end > n:
            raise ValueError(f"span [{s.start}, {s.end}) exceeds document length {n}")
        if covered[s.start:s.end].any():
            raise ValueError("overlapping spans")
        covered[s.start:s.end] = True
    units = list(spans)
    units += [Span(i, i + 1, WORD) for i in range(n) if not covered[i] and i not in protect]
    units.sort(key=lambda s: s.start)

    input_ids = list(doc_tokens)
    positions: list[int] = []
    targets: list[int] = []
    chosen: list[Span] = []
    for unit in units:
        if rng.random() >= mask_rate:
            continue
        chosen.append(unit)
        for pos in range(unit.start, unit.end):
            if pos in protect:
                continue
            positions.append(pos)
            targets.append(doc_tokens[pos])
            input_ids[pos] = mask_id
    return MaskedSample(input_ids, positions, targets, chosen)


def segment_document_lm(doc_tokens: list[int], seq_len: int) -> list[list[int]]:
    """Chunk a document into consecutive non-overlapping segments whose
    concatenation round-trips to the document."""
    if seq_len < 2:
        raise ValueError("seq_len must be >= 2")
    return [list(doc_tokens[i:i + seq_len]) for i in range(0, len(doc_tokens), seq_len)]


@dataclass
class ReorderSample:
    segments: list[list[int]]  # shuffled order, token ids per segment
    n: int
    label: int
    permutation: tuple[int, ...]  # segments[i] == original[permutation[i]]

    def restored(self) -> list[list[int]]:
        out: list[list[int] | None] = [None] * self.n
        for i, src in enumerate(self.permutation):
            out[src] = self.segments[i]
        return out  # type: ignore[return-value]


def build_reorder_sample(
    sentences: list[list[int]],
    max_segments: int,
    rng: np.random.Generator,
) -> ReorderSample:
    """Split a paragraph into 1..max_segments contiguous sentence groups
    (boundaries at sentence gaps), shuffle them uniformly, and label the
    shuffle with the permutation codec."""
    if not sentences:
        raise ValueError("paragraph has no sentences")
    if max_segments < 1:
        raise ValueError("max_segments must be >= 1")
    n = int(rng.integers(1, max_segments + 1))
    n = min(n, len(sentences))
    cuts = sorted(rng.choice(len(sentences) - 1, size=n - 1, replace=False)) if n > 1 else []
    bounds = [0] + [c + 1 for c in cuts] + [len(sentences)]
    original = [sum(sentences[a:b], []) for a, b in zip(bounds[:-1], bounds[1:])]
    perm = tuple(rng.permutation(n).tolist())
    shuffled = [original[p] for p in perm]
    return ReorderSample(shuffled, n, encode_permutation(perm), perm)


@dataclass
class DistanceSample:
    first: list[int]
    second: list[int]
    label: int
    meta: dict = field(default_factory=dict)


def build_distance_sample(
    corpus: list[list[list[int]]],
    rng: np.random.Generator,
    ratio: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> DistanceSample:
    """Draw one sentence pair: adjacent, same-document non-adjacent, or
    cross-document, with class probabilities `ratio`. Classes the corpus
    cannot support are skipped with a notice."""
    if len(ratio) != 3 or min(ratio) < 0 or sum(ratio) == 0:
        raise ValueError("ratio must be three non-negative weights")
    can_adjacent = [d for d in range(len(corpus)) if len(corpus[d]) >= 2]
    can_same = [d for d in range(len(corpus)) if len(corpus[d]) >= 3]
    can_diff = len(corpus) >= 2
    feasible = {ADJACENT: bool(can_adjacent), SAME_DOC: bool(can_same), DIFFERENT_DOCS: can_diff}
    weights = np.array(ratio, dtype=float)
    for cls, ok in feasible.items():
        if not ok and weights[cls] > 0:
            log.info("distance sampling: corpus too small for class %s; skipping",
                     DISTANCE_LABELS[cls])
            weights[cls] = 0.0
    if weights.sum() == 0:
        raise ValueError("corpus cannot support any distance class")
    label = int(rng.choice(3, p=weights / weights.sum()))
    if label == ADJACENT:
        d = int(rng.choice(can_adjacent))
        i = int(rng.integers(0, len(corpus[d]) - 1))
        return DistanceSample(corpus[d][i], corpus[d][i + 1], ADJACENT,
                              {"doc": d, "sentences": (i, i + 1)})
    if label == SAME_DOC:
        d = int(rng.choice(can_same))
        i = int(rng.integers(0, len(corpus[d]) - 2))
        j = int(rng.integers(i + 2, len(corpus[d])))
        return DistanceSample(corpus[d][i], corpus[d][j], SAME_DOC,
                              {"doc": d, "sentences": (i, j)})
    d1, d2 = rng.choice(len(corpus), size=2, replace=False)
    i = int(rng.integers(0, len(corpus[d1])))
    j = int(rng.integers(0, len(corpus[d2])))
    return DistanceSample(corpus[int(d1)][i], corpus[int(d2)][j], DIFFERENT_DOCS,
                          {"docs": (int(d1), int(d2)), "sentences": (i, j)})
