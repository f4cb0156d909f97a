"""Transformer-XL encoder stacks with segment-level recurrence memory.

Attention uses the Transformer-XL relative-position form: a content term
(q + u)·k and a position term (q + v)·r(d) over sinusoidal distance
embeddings projected by a learned matrix, with u/v learned per-stack global
bias vectors. The attention mask selects bidirectional (NLU) or causal
(NLG) operation; memory is only ever consumed on the NLG path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

NLU = "nlu"
NLG = "nlg"


@dataclass
class StackConfig:
    layers: int
    hidden: int
    heads: int

    def validate(self) -> "StackConfig":
        if self.hidden % self.heads != 0:
            raise ValueError(f"hidden {self.hidden} not divisible by heads {self.heads}")
        if self.layers < 1:
            raise ValueError("need at least one layer")
        return self


@dataclass
class AttentionMask:
    """Boolean (query_len, memory_len + query_len) matrix; True = may attend."""

    allowed: np.ndarray
    paradigm: str
    memory_len: int

    @property
    def query_len(self) -> int:
        return self.allowed.shape[0]


@dataclass
class MemoryState:
    """Per-layer cached hidden states (B, mem_len, hidden), detached.

    `layers` has one entry per block of the owning stack; `segments` counts
    how many segments have been folded in."""

    layers: list[np.ndarray]
    segments: int = 0

    @property
    def length(self) -> int:
        return self.layers[0].shape[1] if self.layers else 0


def make_mask(paradigm: str, query_len: int, memory_len: int) -> AttentionMask:
    """NLG: causal over the current segment, full view of memory. NLU:
    bidirectional over the current segment, memory blocked entirely."""
    if query_len < 0 or memory_len < 0:
        raise ValueError("lengths must be non-negative")
    if paradigm == NLG:
        cur = np.tril(np.ones((query_len, query_len), dtype=bool))
        mem = np.ones((query_len, memory_len), dtype=bool)
    elif paradigm == NLU:
        cur = np.ones((query_len, query_len), dtype=bool)
        mem = np.zeros((query_len, memory_len), dtype=bool)
    else:
        raise ValueError(f"unknown paradigm {paradigm!r}")
    return AttentionMask(np.concatenate([mem, cur], axis=1), paradigm, memory_len)


def sinusoid_table(distances: np.ndarray, dim: int) -> np.ndarray:
    """Standard sin/cos embedding of signed relative distances."""
    inv_freq = 1.0 / (10000.0 ** (np.arange(0, dim, 2) / dim))
    ang = distances[:, None] * inv_freq[None, :]
    out = np.zeros((len(distances), dim))
    out[:, 0::2] = np.sin(ang)
    out[:, 1::2] = np.cos(ang)
    return out


def _init(rng: np.random.Generator, shape, std=0.02) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)


class XLBlock:
    """Pre-norm block: x + attn(LN(x)) followed by x + ffn(LN(x))."""

    def __init__(self, cfg: StackConfig, rng: np.random.Generator, prefix: str):
        d = cfg.hidden
        self.cfg = cfg
        p = ad.parameter
        self.params = {
            f"{prefix}.attn.wq": p(_init(rng, (d, d))),
            f"{prefix}.attn.wk": p(_init(rng, (d, d))),
            f"{prefix}.attn.wv": p(_init(rng, (d, d))),
            f"{prefix}.attn.wo": p(_init(rng, (d, d))),
            f"{prefix}.attn.bo": p(np.zeros(d)),
            f"{prefix}.ln1.gamma": p(np.ones(d)),
            f"{prefix}.ln1.beta": p(np.zeros(d)),
            f"{prefix}.ffn.w1": p(_init(rng, (d, 4 * d))),
            f"{prefix}.ffn.b1": p(np.zeros(4 * d)),
            f"{prefix}.ffn.w2": p(_init(rng, (4 * d, d))),
            f"{prefix}.ffn.b2": p(np.zeros(d)),
            f"{prefix}.ln2.gamma": p(np.ones(d)),
            f"{prefix}.ln2.beta": p(np.zeros(d)),
        }
        self._prefix = prefix

    def _p(self, key: str) -> Tensor:
        return self.params[f"{self._prefix}.{key}"]

    def forward(
        self,
        x: Tensor,
        mem: np.ndarray | None,
        allowed: np.ndarray,
        rel: dict,
        dropout_p: float,
        rng: np.random.Generator | None,
    ) -> Tensor:
        b, q, d = x.shape
        h = self.cfg.heads
        dh = d // h
        z = ad.layernorm(x, self._p("ln1.gamma"), self._p("ln1.beta"))
        if mem is not None and mem.shape[1] > 0:
            mz = ad.concat([ad.layernorm(ad.constant(mem), self._p("ln1.gamma"), self._p("ln1.beta")), z], axis=1)
        else:
            mz = z
        k_len = mz.shape[1]

        def heads_first(t: Tensor, length: int) -> Tensor:
            return ad.transpose(ad.reshape(t, (b, length, h, dh)), (0, 2, 1, 3))

        qh = heads_first(ad.matmul(z, self._p("attn.wq")), q)
        kh = heads_first(ad.matmul(mz, self._p("attn.wk")), k_len)
        vh = heads_first(ad.matmul(mz, self._p("attn.wv")), k_len)

        u = ad.reshape(rel["u"], (1, h, 1, dh))
        v = ad.reshape(rel["v"], (1, h, 1, dh))
        content = ad.matmul(ad.add(qh, u), ad.transpose(kh, (0, 1, 3, 2)))
        # (B,H,Q,dh) @ (H,dh,N) -> (B,H,Q,N), then pick the distance for
        # each (query, key) pair.
        pos_all = ad.matmul(ad.add(qh, v), rel["emb"])
        assert rel["idx"].shape == (q, k_len)
        pos = ad.rel_gather(pos_all, rel["idx"])
        scores = ad.scale(ad.add(content, pos), 1.0 / np.sqrt(dh))
        scores = ad.where_mask(scores, allowed)
        attn = ad.softmax(scores)
        attn = ad.dropout(attn, dropout_p, rng)
        ctx = ad.matmul(attn, vh)
        ctx = ad.reshape(ad.transpose(ctx, (0, 2, 1, 3)), (b, q, d))
        out = ad.add(ad.matmul(ctx, self._p("attn.wo")), self._p("attn.bo"))
        x = ad.add(x, ad.dropout(out, dropout_p, rng))

        z2 = ad.layernorm(x, self._p("ln2.gamma"), self._p("ln2.beta"))
        f = ad.gelu(ad.add(ad.matmul(z2, self._p("ffn.w1")), self._p("ffn.b1")))
        f = ad.add(ad.matmul(f, self._p("ffn.w2")), self._p("ffn.b2"))
        return ad.add(x, ad.dropout(f, dropout_p, rng))


class XLStack:
    """A stack of XL blocks plus shared relative-attention parameters and a
    final layer norm."""

    def __init__(self, cfg: StackConfig, rng: np.random.Generator, prefix: str):
        cfg.validate()
        self.cfg = cfg
        d, h = cfg.hidden, cfg.heads
        self.blocks = [XLBlock(cfg, rng, f"{prefix}.block{i}") for i in range(cfg.layers)]
        p = ad.parameter
        self.params: dict[str, Tensor] = {
            f"{prefix}.rel.wr": p(_init(rng, (d, d))),
            f"{prefix}.rel.pos_bias_u": p(np.zeros((h, d // h))),
            f"{prefix}.rel.pos_bias_v": p(np.zeros((h, d // h))),
            f"{prefix}.ln_out.gamma": p(np.ones(d)),
            f"{prefix}.ln_out.beta": p(np.zeros(d)),
        }
        for blk in self.blocks:
            self.params.update(blk.params)
        self._prefix = prefix

    def parameters(self) -> dict[str, Tensor]:
        return dict(self.params)

    def _rel_context(self, q_len: int, mem_len: int) -> dict:
        d, h = self.cfg.hidden, self.cfg.heads
        dh = d // h
        # distances d(i, j) = (i + mem_len) - j for keys j in [0, mem_len + q_len)
        dmin = 1 - q_len
        dmax = mem_len + q_len - 1
        dist = np.arange(dmin, dmax + 1, dtype=np.float64)
        table = ad.constant(sinusoid_table(dist, d))
        emb = ad.matmul(table, self.params[f"{self._prefix}.rel.wr"])  # (N, d)
        emb = ad.transpose(ad.reshape(emb, (len(dist), h, dh)), (1, 2, 0))  # (H, dh, N)
        i = np.arange(q_len)[:, None]
        j = np.arange(mem_len + q_len)[None, :]
        idx = (i + mem_len - j) - dmin
        return {
            "emb": emb,
            "idx": idx,
            "u": self.params[f"{self._prefix}.rel.pos_bias_u"],
            "v": self.params[f"{self._prefix}.rel.pos_bias_v"],
        }

    def forward(
        self,
        x: Tensor,
        memory: MemoryState | None,
        mask: AttentionMask,
        dropout_p: float = 0.0,
        rng: np.random.Generator | None = None,
        pad_ok: np.ndarray | None = None,
    ) -> tuple[Tensor, list[np.ndarray]]:
        """Run one segment. Returns (final hidden states, levels) where
        levels[0] is the detached stack input and levels[l+1] the detached
        output of block l, for memory construction.

        Under the NLU paradigm memory is ignored outright (effective
        memory length 0). `pad_ok` is an optional (B, query_len) validity
        mask for padded batches; padded keys are never attended."""
        if memory is not None and memory.layers and len(memory.layers) != self.cfg.layers:
            raise ValueError(
                f"memory has {len(memory.layers)} layers, stack has {self.cfg.layers}")
        q_len = x.shape[1]
        if mask.paradigm == NLU:
            memory = None
        mem_len = memory.length if memory is not None else 0
        allowed = mask.allowed
        if mask.allowed.shape != (q_len, mem_len + q_len):
            # Re-derive at the true lengths (e.g. NLU mask built with a
            # nominal memory_len, or shorter final segment).
            allowed = make_mask(mask.paradigm, q_len, mem_len).allowed
        allowed_b = np.broadcast_to(allowed, (1, 1, q_len, mem_len + q_len))
        if pad_ok is not None:
            key_ok = pad_ok
            if mem_len:
                key_ok = np.concatenate([np.ones((pad_ok.shape[0], mem_len), dtype=bool), pad_ok], axis=1)
            allowed_b = allowed_b & key_ok[:, None, None, :]
        rel = self._rel_context(q_len, mem_len)
        levels = [x.data.copy()]
        for li, blk in enumerate(self.blocks):
            mem_l = memory.layers[li] if memory is not None else None
            x = blk.forward(x, mem_l, allowed_b, rel, dropout_p, rng)
            levels.append(x.data.copy())
        y = ad.layernorm(x, self.params[f"{self._prefix}.ln_out.gamma"], self.params[f"{self._prefix}.ln_out.beta"])
        return y, levels


def forward_segment(
    stack: "XLStack",
    x: Tensor,
    memory: MemoryState | None,
    mask: AttentionMask,
    recurrence_mode: str,
    memory_len: int,
    dropout_p: float = 0.0,
    rng: np.random.Generator | None = None,
    pad_ok: np.ndarray | None = None,
) -> tuple[Tensor, MemoryState]:
    """Run one segment through `stack` and fold it into the recurrence cache."""
    y, levels = stack.forward(x, memory, mask, dropout_p=dropout_p, rng=rng, pad_ok=pad_ok)
    new_mem = update_memory(recurrence_mode, levels, memory_len, prev=memory)
    return y, new_mem


SHIFT_DOWN = "shift-down"
SAME_LAYER = "same-layer"


def update_memory(
    mode: str,
    levels: list[np.ndarray],
    memory_len: int,
    prev: MemoryState | None = None,
) -> MemoryState:
    """Fold a segment's hidden levels into the recurrence cache.

    `levels` is what XLStack.forward returns: levels[0] the stack input,
    levels[l+1] the output of block l. shift-down caches levels[l] for
    block l (classic recurrence: each block sees the previous segment's
    input to itself); same-layer caches levels[l+1] (each block sees its
    own previous output). Keeps the last `memory_len` positions, detached.
    """
    if mode not in (SHIFT_DOWN, SAME_LAYER):
        raise ValueError(f"unknown recurrence mode {mode!r}")
    n_blocks = len(levels) - 1
    out: list[np.ndarray] = []
    for l in range(n_blocks):
        src = levels[l] if mode == SHIFT_DOWN else levels[l + 1]
        if prev is not None and prev.layers:
            src = np.concatenate([prev.layers[l], src], axis=1)
        keep = src[:, max(0, src.shape[1] - memory_len):, :]
        out.append(np.ascontiguousarray(keep))
    return MemoryState(layers=out, segments=(prev.segments if prev else 0) + 1)
