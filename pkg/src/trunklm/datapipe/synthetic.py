"""Synthetic corpus + knowledge graph generator for smoke tests and demos.

Documents are built from a small closed vocabulary with positional opener
words, so sentence order, adjacency and entity relations are all learnable
by a tiny model. Every sentence has at least 10 words so it survives the
short-sentence filter. Output is deterministic in the seed.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

ENTITIES = [
    "amber", "basalt", "cedar", "dunes", "ember", "fjord", "garnet", "harbor",
    "iris", "juniper", "krill", "lagoon", "marble", "nectar", "onyx", "pumice",
]
RELATIONS = ["paired_with", "found_near", "made_from", "guarded_by"]
VERBS = ["rests beside", "leans toward", "drifts past", "settles under"]
FILLERS = ["pale", "quiet", "heavy", "bright", "narrow", "distant"]
PLACES = ["valley", "ridge", "shore", "meadow"]
OPENERS = ["first", "next", "then", "later", "finally", "afterwards"]


def synthetic_kg(rng: np.random.Generator) -> list[dict]:
    triples = []
    for i, head in enumerate(ENTITIES):
        for j in range(2):
            tail = ENTITIES[(i + 1 + j * 3) % len(ENTITIES)]
            rel = RELATIONS[(i + j) % len(RELATIONS)]
            triples.append({"head": head, "relation": rel, "tail": tail})
    return triples


def _sentence(rng: np.random.Generator, opener: str, head: str, tail: str) -> str:
    verb = VERBS[int(rng.integers(len(VERBS)))]
    f1 = FILLERS[int(rng.integers(len(FILLERS)))]
    f2 = FILLERS[int(rng.integers(len(FILLERS)))]
    place = PLACES[int(rng.integers(len(PLACES)))]
    return (f"{opener} the {head} stone {verb} the {tail} line while "
            f"{f1} {f2} light moves across the {place} ground.")


def synthetic_corpus(seed: int, n_docs: int = 40, paragraphs_per_doc: int = 2,
                     sentences_per_paragraph: int = 4) -> tuple[list[dict], list[dict], list[dict]]:
    """Returns (corpus records, annotation records, kg records).

    Corpus records: {dataset, doc_id, title, text}; annotations list entity
    and phrase mention strings per document."""
    rng = np.random.default_rng(seed)
    kg = synthetic_kg(rng)
    by_head: dict[str, list[dict]] = {}
    for t in kg:
        by_head.setdefault(t["head"], []).append(t)
    corpus, annotations = [], []
    for d in range(n_docs):
        title = ENTITIES[d % len(ENTITIES)]
        related = by_head.get(title, [])
        mentions = {title}
        paras = []
        for _ in range(paragraphs_per_doc):
            sents = []
            for k in range(sentences_per_paragraph):
                pick = related[int(rng.integers(len(related)))] if related else None
                tail = pick["tail"] if pick else ENTITIES[int(rng.integers(len(ENTITIES)))]
                mentions.add(tail)
                # opener tied to the sentence position: gives ordering tasks
                # a learnable cue
                sents.append(_sentence(rng, OPENERS[k % len(OPENERS)], title, tail))
            paras.append(" ".join(sents))
        corpus.append({
            "dataset": "synthetic",
            "doc_id": f"doc{d:04d}",
            "title": title,
            "text": "\n".join(paras),
        })
        annotations.append({
            "doc_id": f"doc{d:04d}",
            "entities": sorted(mentions),
            "phrases": ["light moves across"],
        })
    return corpus, annotations, kg


def write_jsonl(records: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True, ensure_ascii=True) + "\n")
