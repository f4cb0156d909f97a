"""Checkpoint container: round trips, partial loads, corruption handling."""

import numpy as np
import pytest

from trunklm import autodiff as ad
from trunklm.checkpoint import (
    CheckpointError,
    load_checkpoint,
    model_from_checkpoint,
    restore_model,
    restore_optimizer,
    save_checkpoint,
)
from trunklm.model import NLU_HEAD, UNIVERSAL, ModelConfig, UnifiedModel
from trunklm.optim import AdamHyper, AdamState, adam_step


def tiny(seed=0):
    cfg = ModelConfig.desk(vocab_size=40, universal_layers=1, universal_hidden=16,
                           universal_heads=2, head_layers=1, head_hidden=8,
                           head_heads=2, max_seq_len=12, memory_len=4)
    return UnifiedModel(cfg, seed=seed)


def test_forward_bit_identical_after_round_trip(tmp_path):
    m = tiny(seed=3)
    ids = np.array([[5, 6, 7, 8]])
    before = m.encode_nlu(ids).data.copy()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, m, tokenizer_digest=b"\x01" * 16)
    m2 = model_from_checkpoint(load_checkpoint(path), seed=99)
    np.testing.assert_array_equal(m2.encode_nlu(ids).data, before)
    logits_a, _ = m.decode_nlg(ids)
    logits_b, _ = m2.decode_nlg(ids)
    np.testing.assert_array_equal(logits_a.data, logits_b.data)


def test_optimizer_state_round_trip(tmp_path):
    m = tiny()
    params = m.parameters()
    st = AdamState(hyper=AdamHyper(weight_decay=0.0, warmup_steps=10, total_steps=100))
    rng = np.random.default_rng(0)
    for p in params.values():
        p.grad = rng.normal(size=p.data.shape)
    adam_step(params, st, lr=1e-3)
    save_checkpoint(tmp_path / "c.ckpt", m, opt_state=st)
    ckpt = load_checkpoint(tmp_path / "c.ckpt")
    st2 = restore_optimizer(ckpt)
    assert st2.step == st.step
    assert st2.hyper == st.hyper
    for name in st.m:
        np.testing.assert_array_equal(st2.m[name], st.m[name])
        np.testing.assert_array_equal(st2.v[name], st.v[name])


def test_partial_group_load(tmp_path):
    donor = tiny(seed=1)
    save_checkpoint(tmp_path / "d.ckpt", donor)
    target = tiny(seed=2)
    ckpt = load_checkpoint(tmp_path / "d.ckpt")
    before_nlu = {n: p.data.copy() for n, p in target.parameters(NLU_HEAD).items()}
    restore_model(target, ckpt, groups=[UNIVERSAL])
    for n, p in target.parameters(UNIVERSAL).items():
        np.testing.assert_array_equal(p.data, donor.parameters(UNIVERSAL)[n].data)
    for n, p in target.parameters(NLU_HEAD).items():
        np.testing.assert_array_equal(p.data, before_nlu[n])


def test_digest_preserved(tmp_path):
    m = tiny()
    save_checkpoint(tmp_path / "c.ckpt", m, tokenizer_digest=b"\xab" * 16)
    assert load_checkpoint(tmp_path / "c.ckpt").tokenizer_digest == b"\xab" * 16


def test_rejects_garbage_file(tmp_path):
    p = tmp_path / "junk.ckpt"
    p.write_bytes(b"not a checkpoint at all")
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        load_checkpoint(p)


def test_shape_mismatch_rejected(tmp_path):
    m = tiny()
    save_checkpoint(tmp_path / "c.ckpt", m)
    other_cfg = ModelConfig.desk(vocab_size=44, universal_layers=1, universal_hidden=16,
                                 universal_heads=2, head_layers=1, head_hidden=8,
                                 head_heads=2, max_seq_len=12, memory_len=4)
    other = UnifiedModel(other_cfg, seed=0)
    with pytest.raises(CheckpointError, match="shape mismatch"):
        restore_model(other, load_checkpoint(tmp_path / "c.ckpt"))


def test_save_is_byte_deterministic(tmp_path):
    m = tiny(seed=7)
    save_checkpoint(tmp_path / "a.ckpt", m)
    save_checkpoint(tmp_path / "b.ckpt", m)
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
