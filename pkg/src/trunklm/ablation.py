"""Task-head ablation: separate per-paradigm head stacks vs one shared
stack at matched parameter count.

The shared variant routes both paradigms through a single double-depth head
stack (same total transformer blocks as the two separate stacks) while
keeping per-paradigm width bridges, so parameter counts differ only by one
set of shared relative-attention projections (<2%). Training both variants
on the same generation+understanding mixture and logging generation
perplexity shows whether separate heads converge faster.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .backbone import NLG, NLU, StackConfig, XLStack, make_mask, update_memory
from .model import ModelConfig, UnifiedMemory, UnifiedModel, reorder_class_count
from .optim import AdamHyper, AdamState, adam_step
from .tasks.losses import compute_task_loss, loss_units


class SharedHeadModel:
    """Same trunk and interface as UnifiedModel, but one task stack serves
    both paradigms (double depth, per-paradigm width bridges)."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        config.validate()
        self.config = config
        rng = np.random.default_rng(seed)
        d_u = config.universal_hidden
        d_h = config.head_hidden
        self.embed = ad.parameter(rng.normal(0, 0.02, size=(config.vocab_size, d_u)),
                                  name="universal.embed")
        self.trunk = XLStack(
            StackConfig(config.universal_layers, d_u, config.universal_heads), rng, "universal.trunk")
        self.shared = XLStack(
            StackConfig(2 * config.head_layers, d_h, config.head_heads), rng, "shared_head.stack")
        p = ad.parameter
        self.bridges = {}
        for side in ("nlu", "nlg"):
            self.bridges.update({
                f"shared_head.{side}.bridge_in.w": p(rng.normal(0, 0.02, size=(d_u, d_h))),
                f"shared_head.{side}.bridge_in.b": p(np.zeros(d_h)),
                f"shared_head.{side}.bridge_out.w": p(rng.normal(0, 0.02, size=(d_h, d_u))),
                f"shared_head.{side}.bridge_out.b": p(np.zeros(d_u)),
            })
        k = reorder_class_count(config.reorder_max_segments)
        self.cls = {
            "shared_head.reorder.w": p(rng.normal(0, 0.02, size=(d_h, k))),
            "shared_head.reorder.b": p(np.zeros(k)),
            "shared_head.distance.w": p(rng.normal(0, 0.02, size=(d_h, 3))),
            "shared_head.distance.b": p(np.zeros(3)),
        }

    def parameters(self) -> dict[str, Tensor]:
        out = {"universal.embed": self.embed}
        out.update(self.trunk.parameters())
        out.update(self.shared.parameters())
        out.update(self.bridges)
        out.update(self.cls)
        return out

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def _bridge(self, side: str, direction: str, x: Tensor) -> Tensor:
        w = self.bridges[f"shared_head.{side}.bridge_{direction}.w"]
        b = self.bridges[f"shared_head.{side}.bridge_{direction}.b"]
        return ad.add(ad.matmul(x, w), b)

    def encode_nlu(self, ids, pad_ok=None, dropout_p=None, rng=None, seq_limit=None):
        ids = np.asarray(ids)
        p = self.config.dropout if dropout_p is None else dropout_p
        mask = make_mask(NLU, ids.shape[1], 0)
        x = ad.embedding(self.embed, ids)
        h, _ = self.trunk.forward(x, None, mask, dropout_p=p, rng=rng, pad_ok=pad_ok)
        h = self._bridge("nlu", "in", h)
        top, _ = self.shared.forward(h, None, mask, dropout_p=p, rng=rng, pad_ok=pad_ok)
        return top

    def decode_nlg(self, ids, memory=None, pad_ok=None, dropout_p=None, rng=None, seq_limit=None):
        ids = np.asarray(ids)
        p = self.config.dropout if dropout_p is None else dropout_p
        mem = memory or UnifiedMemory()
        mlen = self.config.memory_len
        mode = self.config.recurrence_mode
        mask_t = make_mask(NLG, ids.shape[1], mem.trunk.length if mem.trunk else 0)
        x = ad.embedding(self.embed, ids)
        h, lv_t = self.trunk.forward(x, mem.trunk, mask_t, dropout_p=p, rng=rng, pad_ok=pad_ok)
        new_trunk = update_memory(mode, lv_t, mlen, prev=mem.trunk)
        h = self._bridge("nlg", "in", h)
        mask_h = make_mask(NLG, ids.shape[1], mem.head.length if mem.head else 0)
        top, lv_h = self.shared.forward(h, mem.head, mask_h, dropout_p=p, rng=rng, pad_ok=pad_ok)
        new_head = update_memory(mode, lv_h, mlen, prev=mem.head)
        logits = ad.matmul(self._bridge("nlg", "out", top), ad.transpose(self.embed, (1, 0)))
        return logits, UnifiedMemory(trunk=new_trunk, head=new_head)

    def mlm_logits(self, nlu_top, batch_idx, pos_idx):
        picked = ad.gather_positions(nlu_top, batch_idx, pos_idx)
        out = self._bridge("nlu", "out", picked)
        return ad.matmul(out, ad.transpose(self.embed, (1, 0)))

    def classify(self, nlu_top, head):
        b = nlu_top.shape[0]
        pooled = ad.gather_positions(nlu_top, np.arange(b), np.zeros(b, dtype=int))
        return ad.add(ad.matmul(pooled, self.cls[f"shared_head.{head}.w"]),
                      self.cls[f"shared_head.{head}.b"])


@dataclass
class AblationCurve:
    steps: list[int] = field(default_factory=list)
    ppl: list[float] = field(default_factory=list)


def _nlg_eval_ppl(model, eval_batch, specials, seq_limit) -> float:
    loss = compute_task_loss(model, "doc_lm", eval_batch, specials, seq_limit=seq_limit,
                             dropout_p=0.0)
    return float(np.exp(loss.item()))


def train_variant(
    model,
    batches: list[tuple[str, list[dict]]],
    eval_batch: list[dict],
    specials,
    lr_peak: float,
    warmup: int,
    seq_limit: int,
    eval_every: int,
) -> AblationCurve:
    """Train on a fixed (task, batch) sequence, logging generation
    perplexity on a held batch at regular checkpoints."""
    params = model.parameters()
    total = len(batches)
    opt = AdamState(hyper=AdamHyper(lr_peak=lr_peak, warmup_steps=warmup, total_steps=total))
    curve = AblationCurve()
    for step, (task, batch) in enumerate(batches):
        for p in params.values():
            p.zero_grad()
        loss = compute_task_loss(model, task, batch, specials, seq_limit=seq_limit)
        ad.backward(loss, params=params.values())
        adam_step(params, opt)
        done = step + 1
        if done % eval_every == 0:
            curve.steps.append(done)
            curve.ppl.append(_nlg_eval_ppl(model, eval_batch, specials, seq_limit))
    return curve


def run_branch_ablation(
    by_task: dict[str, list[dict]],
    specials,
    config: ModelConfig,
    seed: int,
    steps: int,
    warmup: int,
    batch_size: int,
    lr_peak: float,
    eval_every: int,
    eval_docs: int = 4,
) -> tuple[AblationCurve, AblationCurve, dict]:
    """Train the separate-head and shared-head variants on identical data.
    Returns (separate curve, shared curve, parameter counts)."""
    rng = np.random.default_rng([seed, 21])
    tasks = ["doc_lm", "span_mlm"]
    batches = []
    for step in range(steps):
        task = tasks[step % 2]
        pool = by_task[task]
        idx = rng.choice(len(pool), size=min(batch_size, len(pool)), replace=False)
        batches.append((task, [pool[i] for i in idx]))
    eval_batch = by_task["doc_lm"][:eval_docs]
    seq_limit = config.max_seq_len

    separate = UnifiedModel(config, seed=seed)
    shared = SharedHeadModel(config, seed=seed)
    counts = {"separate": separate.parameter_count(), "shared": shared.parameter_count()}
    curve_sep = train_variant(separate, batches, eval_batch, specials, lr_peak, warmup,
                              seq_limit, eval_every)
    curve_sh = train_variant(shared, batches, eval_batch, specials, lr_peak, warmup,
                             seq_limit, eval_every)
    return curve_sep, curve_sh, counts
