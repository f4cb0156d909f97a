"""Binary checkpoint container.

Layout (all little-endian):
  magic "TLMC" | u32 version | 16-byte tokenizer digest | u32 json len |
  model-config JSON | u32 n_sections | sections | u8 has_optimizer |
  optimizer state.

Each section is one parameter group (universal / nlu_head / nlg_head):
  name | u32 n_params | per param: name, u8 ndim, u32 dims..., raw f64 data.
Optimizer state stores the step counter, hyper JSON, and first/second
moment arrays in the same parameter order. Sections can be loaded
selectively for partial restore.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .model import GROUPS, ModelConfig, UnifiedModel
from .optim import AdamHyper, AdamState

MAGIC = b"TLMC"
VERSION = 1


class CheckpointError(Exception):
    pass


def _write_str(f, s: str) -> None:
    raw = s.encode("utf-8")
    f.write(struct.pack("<H", len(raw)))
    f.write(raw)


def _read_str(f) -> str:
    (n,) = struct.unpack("<H", f.read(2))
    return f.read(n).decode("utf-8")


def _write_array(f, arr: np.ndarray) -> None:
    f.write(struct.pack("<B", arr.ndim))
    f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_array(f) -> np.ndarray:
    (ndim,) = struct.unpack("<B", f.read(1))
    shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
    count = int(np.prod(shape)) if ndim else 1
    data = np.frombuffer(f.read(8 * count), dtype="<f8").reshape(shape)
    return data.astype(np.float64)


@dataclass
class Checkpoint:
    config: dict
    groups: dict[str, dict[str, np.ndarray]]
    tokenizer_digest: bytes = b"\x00" * 16
    opt_step: int = 0
    opt_hyper: dict | None = None
    opt_m: dict[str, np.ndarray] = field(default_factory=dict)
    opt_v: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def has_optimizer(self) -> bool:
        return self.opt_hyper is not None


def save_checkpoint(
    path: str | Path,
    model: UnifiedModel,
    opt_state: AdamState | None = None,
    tokenizer_digest: bytes = b"\x00" * 16,
) -> None:
    if len(tokenizer_digest) != 16:
        raise ValueError("tokenizer digest must be 16 bytes")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(tokenizer_digest)
        cfg = json.dumps(asdict(model.config), sort_keys=True).encode("utf-8")
        f.write(struct.pack("<I", len(cfg)))
        f.write(cfg)
        f.write(struct.pack("<I", len(GROUPS)))
        for group in GROUPS:
            params = model.parameters(group)
            _write_str(f, group)
            f.write(struct.pack("<I", len(params)))
            for name in sorted(params):
                _write_str(f, name)
                _write_array(f, params[name].data)
        f.write(struct.pack("<B", 1 if opt_state is not None else 0))
        if opt_state is not None:
            f.write(struct.pack("<Q", opt_state.step))
            hyper = json.dumps(asdict(opt_state.hyper), sort_keys=True).encode("utf-8")
            f.write(struct.pack("<I", len(hyper)))
            f.write(hyper)
            for group in GROUPS:
                params = model.parameters(group)
                for name in sorted(params):
                    m, v = opt_state.moments_for(name, params[name])
                    _write_array(f, m)
                    _write_array(f, v)


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        digest = f.read(16)
        (n,) = struct.unpack("<I", f.read(4))
        config = json.loads(f.read(n).decode("utf-8"))
        (n_sections,) = struct.unpack("<I", f.read(4))
        groups: dict[str, dict[str, np.ndarray]] = {}
        order: list[tuple[str, str]] = []
        for _ in range(n_sections):
            gname = _read_str(f)
            (n_params,) = struct.unpack("<I", f.read(4))
            groups[gname] = {}
            for _ in range(n_params):
                pname = _read_str(f)
                groups[gname][pname] = _read_array(f)
                order.append((gname, pname))
        (has_opt,) = struct.unpack("<B", f.read(1))
        ckpt = Checkpoint(config=config, groups=groups, tokenizer_digest=digest)
        if has_opt:
            (ckpt.opt_step,) = struct.unpack("<Q", f.read(8))
            (n,) = struct.unpack("<I", f.read(4))
            ckpt.opt_hyper = json.loads(f.read(n).decode("utf-8"))
            for _, pname in order:
                ckpt.opt_m[pname] = _read_array(f)
                ckpt.opt_v[pname] = _read_array(f)
        return ckpt


def restore_model(model: UnifiedModel, ckpt: Checkpoint, groups: list[str] | None = None) -> None:
    """Copy checkpointed arrays into the model, whole groups at a time."""
    for group in groups or GROUPS:
        if group not in ckpt.groups:
            raise CheckpointError(f"checkpoint has no section {group!r}")
        params = model.parameters(group)
        saved = ckpt.groups[group]
        if set(saved) != set(params):
            missing = set(params) ^ set(saved)
            raise CheckpointError(f"section {group!r} parameter mismatch: {sorted(missing)[:4]}")
        for name, arr in saved.items():
            if params[name].data.shape != arr.shape:
                raise CheckpointError(
                    f"shape mismatch for {name}: {params[name].data.shape} vs {arr.shape}")
            params[name].data[...] = arr


def restore_optimizer(ckpt: Checkpoint) -> AdamState:
    if not ckpt.has_optimizer:
        raise CheckpointError("checkpoint carries no optimizer state")
    state = AdamState(hyper=AdamHyper(**ckpt.opt_hyper), step=ckpt.opt_step)
    state.m = {k: v.copy() for k, v in ckpt.opt_m.items()}
    state.v = {k: v.copy() for k, v in ckpt.opt_v.items()}
    return state


def model_from_checkpoint(ckpt: Checkpoint, seed: int = 0) -> UnifiedModel:
    model = UnifiedModel(ModelConfig(**ckpt.config), seed=seed)
    restore_model(model, ckpt)
    return model
