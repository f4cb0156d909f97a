"""Knowledge-graph / text alignment and the joint triple-sentence samples.

Pairing follows a distant-supervision shape: candidate triples are those
whose head or tail mention equals the document title, and a (triple,
sentence) pair is emitted whenever both mentions occur in one sentence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

MASK_RELATION = "mask-relation"
MASK_WORDS = "mask-words"

HD, HD_END, TL, TL_END = "[HD]", "[/HD]", "[TL]", "[/TL]"


@dataclass(frozen=True)
class KnowledgeTriple:
    head: str
    relation: str
    tail: str

    def __post_init__(self):
        if not self.head or not self.tail:
            raise ValueError("head and tail mentions must be non-empty")
        if not self.relation:
            raise ValueError("relation must be non-empty")


def pair_triples_with_sentences(
    sentences: list[str],
    title: str | None,
    kg: list[KnowledgeTriple],
) -> list[tuple[KnowledgeTriple, str]]:
    """All (triple, sentence) pairs where the triple's head or tail mention
    is the document title and both mentions occur in the sentence. One pair
    per (triple, sentence); empty input or no matches yields []."""
    if title is None:
        return []
    candidates = [t for t in kg if t.head == title or t.tail == title]
    out = []
    for triple in candidates:
        for sent in sentences:
            if triple.head in sent and triple.tail in sent:
                out.append((triple, sent))
    return out


@dataclass
class UKTPSample:
    """Joint triple + sentence input with a mask plan.

    Layout: [CLS] [HD] head [/HD] rel [TL] tail [/TL] [SEP] sentence [SEP].
    marker_positions indexes the four delimiter tokens; sentence_span is the
    half-open token range of the sentence region."""

    input_ids: list[int]
    mode: str
    mask_positions: list[int]
    target_ids: list[int]
    marker_positions: tuple[int, int, int, int]
    relation_positions: tuple[int, ...]
    sentence_span: tuple[int, int]

    def restore(self) -> list[int]:
        out = list(self.input_ids)
        for pos, tid in zip(self.mask_positions, self.target_ids):
            out[pos] = tid
        return out


def build_uktp_sample(
    triple: KnowledgeTriple,
    sentence: str,
    rng: np.random.Generator,
    encode: Callable[[str], list[int]],
    special_id: Callable[[str], int],
    relation_id: Callable[[str], int],
    mask_rate: float = 0.15,
) -> UKTPSample:
    """Serialize one (triple, sentence) pair and mask either the relation
    token or a fraction of the sentence tokens, by fair coin."""
    cls_id, sep_id, mask_id = special_id("[CLS]"), special_id("[SEP]"), special_id("[MASK]")
    ids = [cls_id]
    ids.append(special_id(HD))
    hd_pos = len(ids) - 1
    ids.extend(encode(triple.head))
    ids.append(special_id(HD_END))
    hd_end_pos = len(ids) - 1
    rel_pos = len(ids)
    ids.append(relation_id(triple.relation))
    ids.append(special_id(TL))
    tl_pos = len(ids) - 1
    ids.extend(encode(triple.tail))
    ids.append(special_id(TL_END))
    tl_end_pos = len(ids) - 1
    ids.append(sep_id)
    sent_start = len(ids)
    ids.extend(encode(sentence))
    sent_end = len(ids)
    ids.append(sep_id)

    mode = MASK_RELATION if rng.random() < 0.5 else MASK_WORDS
    if mode == MASK_RELATION:
        positions = [rel_pos]
    else:
        sent_positions = list(range(sent_start, sent_end))
        picked = [p for p in sent_positions if rng.random() < mask_rate]
        if not picked:
            picked = [int(rng.choice(sent_positions))]
        positions = picked
    targets = [ids[p] for p in positions]
    masked = list(ids)
    for p in positions:
        masked[p] = mask_id
    return UKTPSample(
        input_ids=masked,
        mode=mode,
        mask_positions=positions,
        target_ids=targets,
        marker_positions=(hd_pos, hd_end_pos, tl_pos, tl_end_pos),
        relation_positions=(rel_pos,),
        sentence_span=(sent_start, sent_end),
    )
