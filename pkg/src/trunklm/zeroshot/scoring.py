"""Perplexity scoring for zero-shot multi-choice evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from ..model import UnifiedModel

log = logging.getLogger(__name__)


class Scorer(Protocol):
    vocab_size: int

    def sequence_logprobs(self, ids: list[int]) -> np.ndarray:
        """L[t] = log p(ids[t] | ids[:t]); length len(ids)."""
        ...

    def next_token_logprobs(self, prefixes: list[list[int]]) -> np.ndarray:
        """(n, V) log distribution over the token following each prefix.
        All prefixes must have equal length."""
        ...


def _log_softmax(rows: np.ndarray) -> np.ndarray:
    m = rows.max(axis=-1, keepdims=True)
    return rows - m - np.log(np.exp(rows - m).sum(axis=-1, keepdims=True))


class ModelScorer:
    """Causal-path adapter: feeds [BOS]-prefixed token streams through
    decode_nlg, chunked at max_seq_len with carried memory."""

    def __init__(self, model: UnifiedModel, bos_id: int):
        self.model = model
        self.bos_id = bos_id
        self.vocab_size = model.config.vocab_size

    def _stream_logits(self, inputs: np.ndarray) -> np.ndarray:
        """inputs (B, T) -> logits (B, T, V), chunked with memory."""
        limit = self.model.config.max_seq_len
        memory = None
        outs = []
        for start in range(0, inputs.shape[1], limit):
            chunk = inputs[:, start:start + limit]
            logits, memory = self.model.decode_nlg(chunk, memory=memory, dropout_p=0.0)
            outs.append(logits.data)
        return np.concatenate(outs, axis=1)

    def sequence_logprobs(self, ids: list[int]) -> np.ndarray:
        if not ids:
            raise ValueError("cannot score an empty sequence")
        inputs = np.array([[self.bos_id] + list(ids[:-1])])
        logits = self._stream_logits(inputs)[0]
        logp = _log_softmax(logits)
        return logp[np.arange(len(ids)), ids]

    def next_token_logprobs(self, prefixes: list[list[int]]) -> np.ndarray:
        lens = {len(p) for p in prefixes}
        if len(lens) != 1:
            raise ValueError("prefixes must share one length")
        inputs = np.array([[self.bos_id] + list(p) for p in prefixes])
        logits = self._stream_logits(inputs)[:, -1, :]
        return _log_softmax(logits)


def per_token_ppl(scorer: Scorer, ids: list[int]) -> float:
    """exp of the mean negative log-likelihood per token; >= 1 always."""
    if not ids:
        raise ValueError("cannot score an empty sequence")
    return float(np.exp(-scorer.sequence_logprobs(list(ids)).mean()))


@dataclass
class ChoiceScore:
    predicted: int
    ppls: list[float]
    tied: bool = False


def score_choices(
    scorer: Scorer,
    encode,
    prefix: str,
    candidates: list[str],
    suffix: str = "",
    span_only: bool = False,
) -> ChoiceScore:
    """Fill each candidate into the blank between prefix and suffix, score
    the filled text by per-token perplexity, and pick the argmin (ties go
    to the lowest index, with a notice).

    span_only restricts the average to the candidate's own tokens (an
    ablation alternative to full-text scoring)."""
    if len(candidates) < 2:
        raise ValueError("need at least two candidates")
    pre_ids = encode(prefix)
    suf_ids = encode(suffix) if suffix else []
    ppls = []
    for cand in candidates:
        cand_ids = encode(cand)
        ids = pre_ids + cand_ids + suf_ids
        if not ids:
            raise ValueError("candidate produced an empty sequence")
        logprobs = scorer.sequence_logprobs(ids)
        if span_only:
            lo, hi = len(pre_ids), len(pre_ids) + len(cand_ids)
            if lo == hi:
                raise ValueError("span-only scoring needs a non-empty candidate")
            logprobs = logprobs[lo:hi]
        ppls.append(float(np.exp(-logprobs.mean())))
    best = int(np.argmin(ppls))
    tied = ppls.count(min(ppls)) > 1
    if tied:
        log.info("per-token perplexity tie among candidates; picking index %d", best)
    return ChoiceScore(predicted=best, ppls=ppls, tied=tied)
