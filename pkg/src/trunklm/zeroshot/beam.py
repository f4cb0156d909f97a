"""Beam search with optional trie restraint and no length penalty.

A hypothesis's score is the plain sum of per-step log-probabilities. Under
a trie restraint, expansions are limited to continuations present in the
trie and a hypothesis may finish (emit the end token) only at a trie
terminal. The best finished hypothesis wins; if none finished within
max_len, the best live one does.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .scoring import Scorer
from .trie import SpanTrie, TrieNode


@dataclass
class BeamHypothesis:
    tokens: list[int] = field(default_factory=list)
    logprob: float = 0.0
    cursor: TrieNode | None = None
    finished: bool = False


def beam_search(
    scorer: Scorer,
    prompt: list[int],
    width: int,
    max_len: int,
    trie: SpanTrie | None = None,
    end_id: int | None = None,
) -> BeamHypothesis:
    if width < 1 or max_len < 1:
        raise ValueError("width and max_len must be >= 1")
    if trie is not None and trie.empty:
        raise ValueError("restraining trie is empty")
    beam = [BeamHypothesis(cursor=trie.root if trie else None)]
    finished: list[BeamHypothesis] = []
    for _ in range(max_len):
        if not beam:
            break
        logprobs = scorer.next_token_logprobs([prompt + h.tokens for h in beam])
        candidates: list[BeamHypothesis] = []
        for h, row in zip(beam, logprobs):
            if trie is not None:
                allowed = list(h.cursor.children)
                if end_id is not None and h.cursor.terminal and h.tokens:
                    allowed.append(end_id)
                if not allowed:
                    # maximal span with no way to emit an end token: keep as-is
                    finished.append(BeamHypothesis(h.tokens, h.logprob, h.cursor, True))
                    continue
            else:
                allowed = range(len(row))
            for t in allowed:
                nxt = BeamHypothesis(
                    tokens=h.tokens + ([] if t == end_id else [t]),
                    logprob=h.logprob + float(row[t]),
                    cursor=h.cursor.children.get(t) if trie is not None else None,
                    finished=(end_id is not None and t == end_id),
                )
                candidates.append(nxt)
        candidates.sort(key=lambda c: -c.logprob)
        beam = []
        for c in candidates:
            if c.finished:
                finished.append(c)
            elif len(beam) < width:
                beam.append(c)
            if len(beam) >= width and len(finished) >= width:
                break
    pool = finished if finished else beam
    if not pool:
        raise ValueError("no hypotheses produced (max_len too small?)")
    return max(pool, key=lambda h: h.logprob)
