"""Loss computation: route archived samples through the right paradigm path.

Understanding-side tasks (masked spans, reorder, distance, triple
prediction) run through the bidirectional path; document LM runs through
the causal path with carried memory, reset between documents. All losses
are means over their prediction units, so batch order only perturbs
floating-point summation order.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..model import UnifiedModel
from .samples import segment_document_lm

NLU_TOKEN_TASKS = ("span_mlm", "triple_mlm")
NLU_CLS_TASKS = {"reorder": "reorder", "sent_dist": "distance"}
ALL_TASKS = ("span_mlm", "doc_lm", "reorder", "sent_dist", "triple_mlm")


def pad_batch(inputs: list[list[int]], pad_id: int) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(x) for x in inputs)
    ids = np.full((len(inputs), width), pad_id, dtype=np.int64)
    ok = np.zeros((len(inputs), width), dtype=bool)
    for i, x in enumerate(inputs):
        ids[i, :len(x)] = x
        ok[i, :len(x)] = True
    return ids, ok


def _truncate_masked(rec: dict, limit: int) -> tuple[list[int], list[int], list[int]]:
    """Clip a masked-token record to the scheduled length, dropping mask
    positions past the cut."""
    inp = rec["input"][:limit]
    pos, tgt = [], []
    for p, t in zip(rec["positions"], rec["targets"]):
        if p < limit:
            pos.append(p)
            tgt.append(t)
    return inp, pos, tgt


def masked_token_loss(model: UnifiedModel, batch: list[dict], pad_id: int,
                      seq_limit: int | None = None, dropout_p: float | None = None,
                      rng=None) -> Tensor:
    limit = seq_limit or model.config.max_seq_len
    inputs, b_idx, p_idx, targets = [], [], [], []
    for rec in batch:
        inp, pos, tgt = _truncate_masked(rec, limit)
        if not pos:
            continue
        row = len(inputs)
        inputs.append(inp)
        b_idx.extend([row] * len(pos))
        p_idx.extend(pos)
        targets.extend(tgt)
    if not inputs:
        raise ValueError("batch has no masked positions after truncation")
    ids, ok = pad_batch(inputs, pad_id)
    top = model.encode_nlu(ids, pad_ok=ok, dropout_p=dropout_p, rng=rng, seq_limit=limit)
    logits = model.mlm_logits(top, np.array(b_idx), np.array(p_idx))
    return ad.softmax_cross_entropy(logits, np.array(targets))


def classification_loss(model: UnifiedModel, batch: list[dict], head: str, pad_id: int,
                        seq_limit: int | None = None, dropout_p: float | None = None,
                        rng=None) -> Tensor:
    limit = seq_limit or model.config.max_seq_len
    ids, ok = pad_batch([rec["input"][:limit] for rec in batch], pad_id)
    labels = np.array([rec["label"] for rec in batch])
    top = model.encode_nlu(ids, pad_ok=ok, dropout_p=dropout_p, rng=rng, seq_limit=limit)
    return ad.softmax_cross_entropy(model.classify(top, head), labels)


def document_lm_loss(model: UnifiedModel, batch: list[dict], bos_id: int,
                     seq_limit: int | None = None, dropout_p: float | None = None,
                     rng=None, pad_id: int = 0) -> Tensor:
    """Mean next-token loss over every position of every document.

    Documents run their segment streams in lockstep as one padded batch;
    memory carries across a document's segments and is never shared between
    documents. Padding only occurs at stream ends, so no valid position
    ever attends a padded memory slot; padded positions are excluded from
    attention keys and from the loss."""
    limit = seq_limit or model.config.max_seq_len
    total_positions = sum(len(rec["tokens"]) for rec in batch)
    if total_positions == 0:
        raise ValueError("document LM batch is empty")
    streams_in = [[bos_id] + list(rec["tokens"][:-1]) for rec in batch]
    streams_tgt = [list(rec["tokens"]) for rec in batch]
    b = len(batch)
    width = max(len(s) for s in streams_in)
    in_arr = np.full((b, width), pad_id, dtype=np.int64)
    tgt_arr = np.full((b, width), 0, dtype=np.int64)
    ok = np.zeros((b, width), dtype=bool)
    for i, (si, st) in enumerate(zip(streams_in, streams_tgt)):
        in_arr[i, :len(si)] = si
        tgt_arr[i, :len(st)] = st
        ok[i, :len(si)] = True

    loss_terms: list[Tensor] = []
    memory = None
    for start in range(0, width, limit):
        ids = in_arr[:, start:start + limit]
        chunk_ok = ok[:, start:start + limit]
        logits, memory = model.decode_nlg(ids, memory=memory, pad_ok=chunk_ok,
                                          dropout_p=dropout_p, rng=rng, seq_limit=limit)
        rows, cols = np.nonzero(chunk_ok)
        picked = ad.gather_positions(logits, rows, cols)
        targets = tgt_arr[:, start:start + limit][rows, cols]
        ce = ad.softmax_cross_entropy(picked, targets)
        loss_terms.append(ad.scale(ce, len(rows) / total_positions))
    total = loss_terms[0]
    for term in loss_terms[1:]:
        total = ad.add(total, term)
    return total


def compute_task_loss(model: UnifiedModel, task: str, batch: list[dict], specials,
                      seq_limit: int | None = None, dropout_p: float | None = None,
                      rng=None) -> Tensor:
    """specials needs .pad_id and .bos_id (a Tokenizer works)."""
    if not batch:
        raise ValueError("empty batch")
    bad = [r for r in batch if r.get("task", task) != task]
    if bad:
        raise ValueError(f"batch mixes tasks: expected {task!r}, got {bad[0].get('task')!r}")
    try:
        if task in NLU_TOKEN_TASKS:
            return masked_token_loss(model, batch, specials.pad_id, seq_limit, dropout_p, rng)
        if task in NLU_CLS_TASKS:
            return classification_loss(model, batch, NLU_CLS_TASKS[task], specials.pad_id,
                                       seq_limit, dropout_p, rng)
        if task == "doc_lm":
            return document_lm_loss(model, batch, specials.bos_id, seq_limit, dropout_p, rng,
                                    pad_id=specials.pad_id)
    except KeyError as e:
        raise ValueError(f"batch record missing field for task {task!r}: {e}") from e
    raise ValueError(f"unknown task {task!r}")


def loss_units(task: str, batch: list[dict], seq_limit: int | None = None) -> int:
    """How many prediction units the task loss averages over; used to weight
    micro-batch losses so accumulated gradients match the large batch."""
    if task in NLU_TOKEN_TASKS:
        limit = seq_limit or 10**9
        return sum(sum(1 for p in rec["positions"] if p < limit) for rec in batch)
    if task == "doc_lm":
        return sum(len(rec["tokens"]) for rec in batch)
    return len(batch)
