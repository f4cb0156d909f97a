"""Multi-task pretraining loop.

Each optimizer step draws one task from the mix weights, pulls the
scheduled number of samples from that task's multiplier-weighted epoch
stream, accumulates gradients over device-sized micro-batches (weighted by
prediction units so the update equals the single large batch), and applies
Adam at the scheduled learning rate to the parameter groups on that task's
path. All randomness is derived statelessly from (seed, step), so resuming
from a checkpoint replays identically.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .checkpoint import load_checkpoint, restore_model, restore_optimizer, save_checkpoint
from .config import RunConfig
from .datapipe.mixing import mix_datasets
from .datapipe.pipeline import read_jsonl
from .datapipe.tokenizer import Tokenizer
from .model import NLG_HEAD, NLU_HEAD, UNIVERSAL, ModelConfig, UnifiedModel
from .optim import AdamState, adam_step
from .schedule import factors_at
from .tasks.losses import ALL_TASKS, compute_task_loss, loss_units

log = logging.getLogger(__name__)

TASK_GROUPS = {
    "span_mlm": (UNIVERSAL, NLU_HEAD),
    "reorder": (UNIVERSAL, NLU_HEAD),
    "sent_dist": (UNIVERSAL, NLU_HEAD),
    "triple_mlm": (UNIVERSAL, NLU_HEAD),
    "doc_lm": (UNIVERSAL, NLG_HEAD),
}


class TaskStream:
    """Cycling multiplier-weighted sample stream for one task. The epoch
    permutation derives from (seed, task, epoch); consumption position is a
    pure function of how many samples were taken, so it can be replayed."""

    def __init__(self, task: str, records: list[dict], multipliers: dict[str, int], seed: int):
        self.task = task
        self.seed = seed
        by_dataset: dict[str, list[dict]] = {}
        for rec in records:
            by_dataset.setdefault(rec.get("dataset", "default"), []).append(rec)
        self._by_dataset = by_dataset
        self._multipliers = multipliers
        self._epoch = -1
        self._stream: list[dict] = []
        self._pos = 0

    def _task_index(self) -> int:
        return ALL_TASKS.index(self.task)

    def _advance_epoch(self) -> None:
        self._epoch += 1
        rng = np.random.default_rng([self.seed, 11, self._task_index(), self._epoch])
        self._stream = mix_datasets(self._by_dataset, self._multipliers, rng)
        self._pos = 0

    def take(self, n: int) -> list[dict]:
        out: list[dict] = []
        while len(out) < n:
            if self._pos >= len(self._stream):
                self._advance_epoch()
                if not self._stream:
                    raise ValueError(f"task {self.task!r} has no samples")
            out.append(self._stream[self._pos])
            self._pos += 1
        return out


@dataclass
class TrainState:
    model: UnifiedModel
    opt: AdamState
    tokenizer: Tokenizer
    streams: dict[str, TaskStream]
    log_rows: list[dict] = field(default_factory=list)


def load_archive(data_dir: Path) -> tuple[Tokenizer, dict[str, list[dict]]]:
    vocab_path = data_dir / "vocab.json"
    archive_path = data_dir / "archive.jsonl"
    if not vocab_path.exists() or not archive_path.exists():
        raise FileNotFoundError(f"no preprocessed archive under {data_dir}")
    tokenizer = Tokenizer.from_json(vocab_path.read_text(encoding="utf-8"))
    by_task: dict[str, list[dict]] = {t: [] for t in ALL_TASKS}
    for rec in read_jsonl(archive_path):
        by_task.setdefault(rec["task"], []).append(rec)
    return tokenizer, by_task


def _draw_task(seed: int, step: int, tasks: list[str], weights: np.ndarray) -> str:
    rng = np.random.default_rng([seed, 12, step])
    return tasks[int(rng.choice(len(tasks), p=weights))]


def _micro_batches(batch: list[dict], device_batch: int) -> list[list[dict]]:
    return [batch[i:i + device_batch] for i in range(0, len(batch), device_batch)]


def init_train_state(run: RunConfig, resume: str | Path | None = None) -> tuple[TrainState, int]:
    tokenizer, by_task = load_archive(run.data_dir)
    active = [t for t in ALL_TASKS if t in run.task_mix]
    missing = [t for t in active if not by_task.get(t)]
    if missing:
        raise ValueError(f"archive has no samples for tasks {missing}; "
                         f"adjust task_mix or regenerate data")
    cfg = ModelConfig(vocab_size=tokenizer.vocab_size, **run.model).validate()
    model = UnifiedModel(cfg, seed=run.seed)
    opt = AdamState(hyper=run.optimizer)
    multipliers = {d.name: d.multiplier for d in run.datasets}
    streams = {t: TaskStream(t, by_task[t], multipliers, run.seed) for t in active}
    start_step = 0
    if resume is not None:
        ckpt = load_checkpoint(resume)
        if ckpt.tokenizer_digest != tokenizer.digest():
            raise ValueError("checkpoint was trained with a different vocabulary")
        restore_model(model, ckpt)
        opt = restore_optimizer(ckpt)
        start_step = ckpt.opt_step
        _replay_streams(run, streams, start_step)
    return TrainState(model, opt, tokenizer, streams), start_step


def _replay_streams(run: RunConfig, streams: dict[str, TaskStream], upto: int) -> None:
    """Fast-forward sample streams to their position at step `upto` by
    replaying the (task, batch-size) decisions without any model work."""
    tasks = sorted(streams)
    weights = np.array([run.task_mix[t] for t in tasks])
    weights = weights / weights.sum()
    for step in range(upto):
        f = factors_at(step, run.schedule)
        task = _draw_task(run.seed, step, tasks, weights)
        streams[task].take(f.batch_size)


def train_step(run: RunConfig, state: TrainState, step: int) -> dict:
    f = factors_at(step, run.schedule)
    tasks = sorted(state.streams)
    weights = np.array([run.task_mix[t] for t in tasks])
    weights = weights / weights.sum()
    task = _draw_task(run.seed, step, tasks, weights)
    batch = state.streams[task].take(f.batch_size)

    params = {}
    for group in TASK_GROUPS[task]:
        params.update(state.model.parameters(group))
    for p in params.values():
        p.zero_grad()

    micros = _micro_batches(batch, run.pretrain.device_batch)
    total_units = sum(loss_units(task, mb, f.seq_len) for mb in micros)
    if total_units == 0:
        raise ValueError(f"step {step}: batch for {task!r} has no prediction units")
    rng = np.random.default_rng([run.seed, 13, step])
    loss_value = 0.0
    for mb in micros:
        units = loss_units(task, mb, f.seq_len)
        if units == 0:
            continue
        loss = compute_task_loss(state.model, task, mb, state.tokenizer,
                                 seq_limit=f.seq_len, dropout_p=f.dropout, rng=rng)
        loss_value += loss.item() * units / total_units
        ad.backward(ad.scale(loss, units / total_units))
    adam_step(params, state.opt, lr=f.lr)
    return {
        "step": step, "task": task, "loss": loss_value, "lr": f.lr,
        "seq_len": f.seq_len, "batch_size": f.batch_size, "dropout": f.dropout,
        "micro_batches": len(micros),
    }


def pretrain(run: RunConfig, resume: str | Path | None = None) -> dict:
    """Run the configured number of steps; writes loss log and checkpoints
    under out_dir/train. Returns summary info."""
    train_dir = run.train_dir
    train_dir.mkdir(parents=True, exist_ok=True)
    probe = train_dir / ".write_probe"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise RuntimeError(f"checkpoint directory not writable: {e}") from e

    state, start_step = init_train_state(run, resume=resume)
    log_path = train_dir / "loss_log.jsonl"
    mode = "a" if (resume is not None and log_path.exists()) else "w"
    digest = state.tokenizer.digest()
    with open(log_path, mode, encoding="utf-8") as log_file:
        for step in range(start_step, run.pretrain.steps):
            row = train_step(run, state, step)
            state.log_rows.append(row)
            if step % run.pretrain.log_every == 0 or step == run.pretrain.steps - 1:
                log_file.write(json.dumps(row, sort_keys=True) + "\n")
            done = step + 1
            if done % run.pretrain.checkpoint_every == 0 and done < run.pretrain.steps:
                save_checkpoint(train_dir / f"ckpt_step{done:06d}.ckpt", state.model,
                                opt_state=state.opt, tokenizer_digest=digest)
            if done % 50 == 0:
                log.info("step %d/%d task=%s loss=%.4f", done, run.pretrain.steps,
                         row["task"], row["loss"])
    final = train_dir / "ckpt_final.ckpt"
    save_checkpoint(final, state.model, opt_state=state.opt, tokenizer_digest=digest)
    return {"steps": run.pretrain.steps - start_step, "final_checkpoint": str(final),
            "loss_log": str(log_path), "rows": state.log_rows}


def finetune(run: RunConfig, checkpoint_path: str | Path, mode: "FineTuneMode",
             task: str, steps: int, lr: float | None = None) -> dict:
    """Continue training one task from a checkpoint, updating only the
    parameter groups enabled in `mode`."""
    from .model import FineTuneMode  # noqa: F401  (typing reference)

    if task not in TASK_GROUPS:
        raise ValueError(f"unknown task {task!r}")
    tokenizer, by_task = load_archive(run.data_dir)
    if not by_task.get(task):
        raise ValueError(f"archive has no samples for task {task!r}")
    ckpt = load_checkpoint(checkpoint_path)
    if ckpt.tokenizer_digest != tokenizer.digest():
        raise ValueError("checkpoint was trained with a different vocabulary")
    cfg = ModelConfig(**ckpt.config)
    model = UnifiedModel(cfg, seed=run.seed)
    restore_model(model, ckpt)
    trainable = model.trainable_parameters(mode)
    opt = AdamState(hyper=run.optimizer)
    multipliers = {d.name: d.multiplier for d in run.datasets}
    stream = TaskStream(task, by_task[task], multipliers, run.seed)
    out_dir = Path(run.out_dir) / "finetune"
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    end = factors_at(run.schedule.warmup_steps, run.schedule)
    with open(out_dir / "loss_log.jsonl", "w", encoding="utf-8") as log_file:
        for step in range(steps):
            batch = stream.take(min(end.batch_size, run.pretrain.device_batch))
            for p in trainable.values():
                p.zero_grad()
            rng = np.random.default_rng([run.seed, 14, step])
            loss = compute_task_loss(model, task, batch, tokenizer,
                                     seq_limit=end.seq_len, dropout_p=end.dropout, rng=rng)
            ad.backward(loss, params=trainable.values())
            adam_step(trainable, opt, lr=lr)
            row = {"step": step, "task": task, "loss": loss.item()}
            rows.append(row)
            log_file.write(json.dumps(row, sort_keys=True) + "\n")
    final = out_dir / "ckpt_finetuned.ckpt"
    save_checkpoint(final, model, opt_state=opt, tokenizer_digest=tokenizer.digest())
    return {"steps": steps, "final_checkpoint": str(final), "rows": rows}
