"""Run configuration: one JSON file drives preprocess, pretrain and eval.

The seed fully determines sample construction, batch order, masking and
weight initialization, so (config, seed) -> bit-identical artifacts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .datapipe.mixing import DatasetSpec
from .datapipe.pipeline import PreprocessConfig
from .optim import AdamHyper
from .schedule import ProgressiveSchedule, Ramp
from .tasks.losses import ALL_TASKS

# Headline pretraining constants at paper scale: total batch 6144 across all
# tasks, lr peak 1e-4 with 10k-step warmup. Desk-scale configs override.
PAPER_TOTAL_BATCH = 6144


class ConfigError(Exception):
    pass


@dataclass
class PretrainConfig:
    steps: int = 500
    device_batch: int = 8
    checkpoint_every: int = 100
    log_every: int = 1

    def validate(self) -> "PretrainConfig":
        if self.steps < 1 or self.device_batch < 1:
            raise ConfigError("pretrain.steps and pretrain.device_batch must be >= 1")
        if self.checkpoint_every < 1 or self.log_every < 1:
            raise ConfigError("pretrain intervals must be >= 1")
        return self


@dataclass
class RunConfig:
    seed: int
    out_dir: str
    datasets: list[DatasetSpec]
    kg_path: str | None
    model: dict
    schedule: ProgressiveSchedule
    optimizer: AdamHyper
    task_mix: dict[str, float]
    preprocess: PreprocessConfig
    pretrain: PretrainConfig

    @property
    def data_dir(self) -> Path:
        return Path(self.out_dir) / "data"

    @property
    def train_dir(self) -> Path:
        return Path(self.out_dir) / "train"

    @property
    def eval_dir(self) -> Path:
        return Path(self.out_dir) / "eval"


def _ramp(obj, default: Ramp) -> Ramp:
    if obj is None:
        return default
    if not (isinstance(obj, (list, tuple)) and len(obj) == 2):
        raise ConfigError(f"ramp must be a [start, end] pair, got {obj!r}")
    return Ramp(float(obj[0]), float(obj[1]))


def parse_run_config(obj: dict, base_dir: str | Path = ".") -> RunConfig:
    try:
        return _parse(obj, Path(base_dir))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad run config: {e}") from e


def _parse(obj: dict, base: Path) -> RunConfig:
    seed = int(obj.get("seed", 0))
    out_dir = str(obj.get("out_dir") or (base / "run_out"))

    datasets = []
    for d in obj.get("datasets", []):
        path = str(base / d["path"]) if not Path(d["path"]).is_absolute() else d["path"]
        anno = d.get("annotations")
        if anno and not Path(anno).is_absolute():
            anno = str(base / anno)
        datasets.append(DatasetSpec(d["name"], path, int(d.get("multiplier", 1)), anno))

    kg_path = obj.get("kg_path")
    if kg_path and not Path(kg_path).is_absolute():
        kg_path = str(base / kg_path)

    pre = PreprocessConfig(**obj.get("preprocess", {}))
    pt = PretrainConfig(**obj.get("pretrain", {})).validate()

    sch = obj.get("schedule", {})
    schedule = ProgressiveSchedule(
        warmup_steps=int(sch.get("warmup_steps", 200)),
        total_steps=int(sch.get("total_steps", pt.steps)),
        seq_len=_ramp(sch.get("seq_len"), Ramp(128, 512)),
        batch_size=_ramp(sch.get("batch_size"), Ramp(8, 2048)),
        lr=_ramp(sch.get("lr"), Ramp(0.0, 1e-4)),
        dropout=_ramp(sch.get("dropout"), Ramp(0.0, 0.0)),
    )

    optd = dict(obj.get("optimizer", {}))
    optd.setdefault("lr_peak", schedule.lr.end)
    optd.setdefault("warmup_steps", schedule.warmup_steps)
    optd.setdefault("total_steps", schedule.total_steps)
    optimizer = AdamHyper(**optd).validate()

    mix = {k: float(v) for k, v in obj.get(
        "task_mix", {t: 1.0 / len(ALL_TASKS) for t in ALL_TASKS}).items()}
    unknown = set(mix) - set(ALL_TASKS)
    if unknown:
        raise ConfigError(f"task_mix has unknown tasks: {sorted(unknown)}")
    if any(w <= 0 for w in mix.values()):
        raise ConfigError("task_mix weights must be positive")
    if abs(sum(mix.values()) - 1.0) > 1e-9:
        raise ConfigError(f"task_mix weights must sum to 1, got {sum(mix.values())}")

    model = dict(obj.get("model", {}))
    if "vocab_size" in model:
        raise ConfigError("model.vocab_size is derived from the built vocabulary")

    return RunConfig(seed=seed, out_dir=out_dir, datasets=datasets, kg_path=kg_path,
                     model=model, schedule=schedule, optimizer=optimizer, task_mix=mix,
                     preprocess=pre, pretrain=pt)


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return parse_run_config(obj, base_dir=path.parent)
