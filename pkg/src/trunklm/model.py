"""The unified multi-paradigm model: one shared trunk, two task heads.

The trunk and both heads are recurrent-memory transformer stacks. The NLU
head runs bidirectionally with memory hard-disabled; the NLG head runs
causally with memory enabled on both trunk and head. Token embeddings and
the LM output projection are tied and owned by the trunk ("universal")
parameter group; each head owns learned width bridges in and out of its
stack plus its classification heads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .backbone import (
    NLG,
    NLU,
    SAME_LAYER,
    SHIFT_DOWN,
    MemoryState,
    StackConfig,
    XLStack,
    make_mask,
    update_memory,
)

UNIVERSAL = "universal"
NLU_HEAD = "nlu_head"
NLG_HEAD = "nlg_head"
GROUPS = (UNIVERSAL, NLU_HEAD, NLG_HEAD)


def reorder_class_count(max_segments: int) -> int:
    """Number of reorder classes: sum of n! for n = 1..max_segments."""
    return sum(math.factorial(n) for n in range(1, max_segments + 1))


@dataclass
class ModelConfig:
    vocab_size: int
    universal_layers: int = 12
    universal_hidden: int = 768
    universal_heads: int = 12
    head_layers: int = 3
    head_hidden: int = 256
    head_heads: int = 4
    max_seq_len: int = 512
    memory_len: int = 128
    recurrence_mode: str = SAME_LAYER
    dropout: float = 0.0
    reorder_max_segments: int = 3

    def validate(self) -> "ModelConfig":
        StackConfig(self.universal_layers, self.universal_hidden, self.universal_heads).validate()
        StackConfig(self.head_layers, self.head_hidden, self.head_heads).validate()
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be at least 2")
        if self.memory_len < 0 or self.max_seq_len < 1:
            raise ValueError("memory_len must be >= 0 and max_seq_len >= 1")
        if self.recurrence_mode not in (SAME_LAYER, SHIFT_DOWN):
            raise ValueError(f"unknown recurrence mode {self.recurrence_mode!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.reorder_max_segments < 1:
            raise ValueError("reorder_max_segments must be >= 1")
        return self

    @classmethod
    def desk(cls, vocab_size: int, **overrides) -> "ModelConfig":
        """Small preset that trains in seconds on one CPU core."""
        base = dict(
            universal_layers=4, universal_hidden=128, universal_heads=4,
            head_layers=2, head_hidden=64, head_heads=2,
            max_seq_len=64, memory_len=32,
        )
        base.update(overrides)
        return cls(vocab_size=vocab_size, **base).validate()


@dataclass
class FineTuneMode:
    """Which parameter groups an optimizer step may touch."""

    update_universal: bool = False
    update_nlu_head: bool = False
    update_nlg_head: bool = False

    def groups(self) -> list[str]:
        out = []
        if self.update_universal:
            out.append(UNIVERSAL)
        if self.update_nlu_head:
            out.append(NLU_HEAD)
        if self.update_nlg_head:
            out.append(NLG_HEAD)
        if not out:
            raise ValueError("at least one parameter group must be trainable")
        return out


ALL_GROUPS = FineTuneMode(True, True, True)


@dataclass
class UnifiedMemory:
    """Recurrence caches for the NLG path, trunk and head stacks."""

    trunk: MemoryState | None = None
    head: MemoryState | None = None

    @property
    def segments(self) -> int:
        return self.trunk.segments if self.trunk is not None else 0


class _HeadStack:
    """Width bridge in, XL stack, width bridge out."""

    def __init__(self, d_in: int, cfg: StackConfig, rng: np.random.Generator, prefix: str):
        p = ad.parameter
        self.stack = XLStack(cfg, rng, f"{prefix}.stack")
        self.params = {
            f"{prefix}.bridge_in.w": p(rng.normal(0, 0.02, size=(d_in, cfg.hidden))),
            f"{prefix}.bridge_in.b": p(np.zeros(cfg.hidden)),
            f"{prefix}.bridge_out.w": p(rng.normal(0, 0.02, size=(cfg.hidden, d_in))),
            f"{prefix}.bridge_out.b": p(np.zeros(d_in)),
        }
        self.params.update(self.stack.parameters())
        self._prefix = prefix

    def bridge_in(self, x: Tensor) -> Tensor:
        return ad.add(ad.matmul(x, self.params[f"{self._prefix}.bridge_in.w"]),
                      self.params[f"{self._prefix}.bridge_in.b"])

    def bridge_out(self, x: Tensor) -> Tensor:
        return ad.add(ad.matmul(x, self.params[f"{self._prefix}.bridge_out.w"]),
                      self.params[f"{self._prefix}.bridge_out.b"])


class UnifiedModel:
    """Shared trunk + NLU/NLG heads with tied embeddings."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        config.validate()
        self.config = config
        rng = np.random.default_rng(seed)
        d_u = config.universal_hidden
        head_cfg = StackConfig(config.head_layers, config.head_hidden, config.head_heads)

        self.embed = ad.parameter(rng.normal(0, 0.02, size=(config.vocab_size, d_u)),
                                  name="universal.embed")
        self.trunk = XLStack(
            StackConfig(config.universal_layers, d_u, config.universal_heads), rng, "universal.trunk")
        self.nlu = _HeadStack(d_u, head_cfg, rng, "nlu_head")
        self.nlg = _HeadStack(d_u, head_cfg, rng, "nlg_head")

        k = reorder_class_count(config.reorder_max_segments)
        dh = config.head_hidden
        p = ad.parameter
        self.nlu_cls = {
            "nlu_head.reorder.w": p(rng.normal(0, 0.02, size=(dh, k))),
            "nlu_head.reorder.b": p(np.zeros(k)),
            "nlu_head.distance.w": p(rng.normal(0, 0.02, size=(dh, 3))),
            "nlu_head.distance.b": p(np.zeros(3)),
        }
        self._groups = {
            UNIVERSAL: {"universal.embed": self.embed, **self.trunk.parameters()},
            NLU_HEAD: {**self.nlu.params, **self.nlu_cls},
            NLG_HEAD: dict(self.nlg.params),
        }

    # ------------------------------------------------------------ params

    def parameters(self, group: str | None = None) -> dict[str, Tensor]:
        if group is not None:
            return dict(self._groups[group])
        out: dict[str, Tensor] = {}
        for g in GROUPS:
            out.update(self._groups[g])
        return out

    def trainable_parameters(self, mode: FineTuneMode) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for g in mode.groups():
            out.update(self._groups[g])
        return out

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters().values())

    # ----------------------------------------------------------- forward

    def _check_len(self, ids: np.ndarray, seq_limit: int | None) -> None:
        limit = self.config.max_seq_len if seq_limit is None else min(seq_limit, self.config.max_seq_len)
        if ids.ndim != 2:
            raise ValueError("token ids must be a (batch, time) array")
        if ids.shape[1] > limit:
            raise ValueError(f"sequence length {ids.shape[1]} exceeds limit {limit}")
        if ids.size and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            raise ValueError("token id out of vocabulary range")

    def encode_nlu(
        self,
        ids: np.ndarray,
        pad_ok: np.ndarray | None = None,
        dropout_p: float | None = None,
        rng: np.random.Generator | None = None,
        seq_limit: int | None = None,
    ) -> Tensor:
        """Bidirectional path: trunk then NLU head, no memory anywhere.
        Returns the head stack's top hidden states (B, T, head_hidden)."""
        ids = np.asarray(ids)
        self._check_len(ids, seq_limit)
        p = self.config.dropout if dropout_p is None else dropout_p
        mask = make_mask(NLU, ids.shape[1], 0)
        x = ad.embedding(self.embed, ids)
        h, _ = self.trunk.forward(x, None, mask, dropout_p=p, rng=rng, pad_ok=pad_ok)
        h = self.nlu.bridge_in(h)
        top, _ = self.nlu.stack.forward(h, None, mask, dropout_p=p, rng=rng, pad_ok=pad_ok)
        return top

    def decode_nlg(
        self,
        ids: np.ndarray,
        memory: UnifiedMemory | None = None,
        pad_ok: np.ndarray | None = None,
        dropout_p: float | None = None,
        rng: np.random.Generator | None = None,
        seq_limit: int | None = None,
    ) -> tuple[Tensor, UnifiedMemory]:
        """Causal path with recurrence memory: trunk then NLG head.
        Returns next-token logits (B, T, vocab) and the updated memory."""
        ids = np.asarray(ids)
        self._check_len(ids, seq_limit)
        p = self.config.dropout if dropout_p is None else dropout_p
        mem = memory or UnifiedMemory()
        mlen = self.config.memory_len
        mode = self.config.recurrence_mode

        mask_t = make_mask(NLG, ids.shape[1], mem.trunk.length if mem.trunk else 0)
        x = ad.embedding(self.embed, ids)
        h, trunk_levels = self.trunk.forward(x, mem.trunk, mask_t, dropout_p=p, rng=rng, pad_ok=pad_ok)
        new_trunk = update_memory(mode, trunk_levels, mlen, prev=mem.trunk)

        h = self.nlg.bridge_in(h)
        mask_h = make_mask(NLG, ids.shape[1], mem.head.length if mem.head else 0)
        top, head_levels = self.nlg.stack.forward(h, mem.head, mask_h, dropout_p=p, rng=rng, pad_ok=pad_ok)
        new_head = update_memory(mode, head_levels, mlen, prev=mem.head)

        logits = self.lm_logits(self.nlg.bridge_out(top))
        return logits, UnifiedMemory(trunk=new_trunk, head=new_head)

    def lm_logits(self, h: Tensor) -> Tensor:
        """Project trunk-width states onto the tied embedding: (..., V)."""
        return ad.matmul(h, ad.transpose(self.embed, (1, 0)))

    def mlm_logits(self, nlu_top: Tensor, batch_idx: np.ndarray, pos_idx: np.ndarray) -> Tensor:
        """Token-prediction logits at selected positions: (N, V)."""
        picked = ad.gather_positions(nlu_top, batch_idx, pos_idx)
        return self.lm_logits(self.nlu.bridge_out(picked))

    def classify(self, nlu_top: Tensor, head: str) -> Tensor:
        """Sequence-level logits from the first position. head is
        'reorder' (sum-of-factorials classes) or 'distance' (3 classes)."""
        b = nlu_top.shape[0]
        pooled = ad.gather_positions(nlu_top, np.arange(b), np.zeros(b, dtype=int))
        w = self.nlu_cls[f"nlu_head.{head}.w"]
        bias = self.nlu_cls[f"nlu_head.{head}.b"]
        return ad.add(ad.matmul(pooled, w), bias)


class RelationProbe:
    """Relation classifier over the summed final representations of the four
    entity-marker tokens, run on top of the bidirectional path."""

    def __init__(self, model: UnifiedModel, n_relations: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        dh = model.config.head_hidden
        self.model = model
        self.params = {
            "probe.w": ad.parameter(rng.normal(0, 0.02, size=(dh, n_relations))),
            "probe.b": ad.parameter(np.zeros(n_relations)),
        }

    def logits(self, ids: np.ndarray, marker_positions: np.ndarray) -> Tensor:
        """marker_positions: (B, 4) indices of the head/tail delimiters."""
        top = self.model.encode_nlu(ids)
        b = ids.shape[0]
        parts = []
        for j in range(4):
            parts.append(ad.gather_positions(top, np.arange(b), marker_positions[:, j]))
        summed = ad.add(ad.add(parts[0], parts[1]), ad.add(parts[2], parts[3]))
        return ad.add(ad.matmul(summed, self.params["probe.w"]), self.params["probe.b"])
