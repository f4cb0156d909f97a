"""Perplexity scoring, span trie, restrained beam search, prompts, metrics."""

import itertools
import logging
import zlib

import numpy as np
import pytest

from trunklm.model import ModelConfig, UnifiedModel
from trunklm.zeroshot import (
    apply_prompt,
    beam_search,
    build_span_trie,
    max_gen_len,
    per_token_ppl,
    sample_negatives,
    score_choices,
    split_on_blank,
)
from trunklm.zeroshot.metrics import exact_match, rouge_1, token_f1
from trunklm.zeroshot.prompts import BUILTIN_TEMPLATES, TEMPLATE_CANDIDATES
from trunklm.zeroshot.scoring import ModelScorer, _log_softmax


class UniformScorer:
    def __init__(self, vocab_size):
        self.vocab_size = vocab_size

    def sequence_logprobs(self, ids):
        return np.full(len(ids), -np.log(self.vocab_size))

    def next_token_logprobs(self, prefixes):
        return np.full((len(prefixes), self.vocab_size), -np.log(self.vocab_size))


class SeededScorer:
    """Deterministic pseudo-random next-token distribution per prefix."""

    def __init__(self, vocab_size, salt=0):
        self.vocab_size = vocab_size
        self.salt = salt

    def _row(self, prefix):
        seed = zlib.crc32(bytes(f"{self.salt}:{list(prefix)}", "utf-8"))
        logits = np.random.default_rng(seed).normal(size=self.vocab_size)
        return _log_softmax(logits)

    def sequence_logprobs(self, ids):
        return np.array([self._row(ids[:t])[ids[t]] for t in range(len(ids))])

    def next_token_logprobs(self, prefixes):
        return np.stack([self._row(p) for p in prefixes])


# ------------------------------------------------------------ perplexity


def test_uniform_model_ppl_equals_vocab_size():
    s = UniformScorer(37)
    assert per_token_ppl(s, [1, 5, 9]) == pytest.approx(37.0, rel=1e-12)
    assert per_token_ppl(s, [2]) == pytest.approx(37.0, rel=1e-12)


def test_duplicated_sequence_same_ppl_under_uniform():
    s = UniformScorer(11)
    seq = [1, 2, 3]
    assert per_token_ppl(s, seq) == pytest.approx(per_token_ppl(s, seq + seq), rel=1e-12)


def test_ppl_at_least_one_and_equals_one_iff_certain():
    class Certain:
        vocab_size = 4

        def sequence_logprobs(self, ids):
            return np.zeros(len(ids))

    assert per_token_ppl(Certain(), [0, 1, 2]) == 1.0
    assert per_token_ppl(SeededScorer(16), [3, 1, 2]) > 1.0


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        per_token_ppl(UniformScorer(5), [])


def test_model_scorer_consistency():
    cfg = ModelConfig.desk(vocab_size=32, universal_layers=1, universal_hidden=16,
                           universal_heads=2, head_layers=1, head_hidden=8,
                           head_heads=2, max_seq_len=8, memory_len=4)
    m = UnifiedModel(cfg, seed=0)
    sc = ModelScorer(m, bos_id=1)
    seq = [4, 9, 2, 7]
    lp = sc.sequence_logprobs(seq)
    assert lp.shape == (4,) and (lp < 0).all()
    nxt = sc.next_token_logprobs([seq[:3]])
    assert nxt[0, seq[3]] == pytest.approx(lp[3], rel=1e-12)
    # chunked scoring (len > max_seq_len) still returns one value per token
    long = list(np.random.default_rng(0).integers(2, 30, size=20))
    assert sc.sequence_logprobs(long).shape == (20,)


# ----------------------------------------------------------- choices


def _enc(text):
    return [ord(c) % 50 for c in text]


def test_identical_candidates_tie_to_index_zero(caplog):
    s = UniformScorer(50)
    with caplog.at_level(logging.INFO):
        out = score_choices(s, _enc, "prefix ", ["same", "same"])
    assert out.predicted == 0 and out.tied


def test_choice_prediction_invariant_under_permutation():
    s = SeededScorer(50)
    cands = ["alpha", "beta", "gamma", "delta"]
    base = score_choices(s, _enc, "q: ", cands)
    winner = cands[base.predicted]
    perm = ["gamma", "alpha", "delta", "beta"]
    out = score_choices(s, _enc, "q: ", perm)
    assert perm[out.predicted] == winner


def test_span_only_scoring_differs_from_full_text():
    s = SeededScorer(50, salt=3)
    cands = ["one fish", "two fish"]
    full = score_choices(s, _enc, "count: ", cands, span_only=False)
    span = score_choices(s, _enc, "count: ", cands, span_only=True)
    assert full.ppls != span.ppls


def test_score_choices_needs_two_candidates():
    with pytest.raises(ValueError):
        score_choices(UniformScorer(5), _enc, "x", ["only"])


# ---------------------------------------------------------------- trie


def test_trie_enumerates_short_spans():
    trie = build_span_trie([10, 11, 12], max_span=2)
    spans = {(10,), (11,), (12,), (10, 11), (11, 12)}
    for s in spans:
        assert trie.contains(list(s))
    assert not trie.contains([10, 12])
    assert not trie.contains([10, 11, 12])  # longer than max_span
    assert trie.size == len(spans)


def test_trie_membership_matches_brute_force():
    rng = np.random.default_rng(0)
    source = [int(x) for x in rng.integers(0, 5, size=12)]
    trie = build_span_trie(source, max_span=3)
    src = "".join(map(str, source))
    for length in (1, 2, 3):
        for combo in itertools.product(range(5), repeat=length):
            expected = "".join(map(str, combo)) in src if length <= 3 else False
            # substring check corresponds to contiguous-span membership
            expected = any(source[i:i + length] == list(combo) for i in range(len(source)))
            assert trie.contains(list(combo)) == expected, combo


def test_single_token_source():
    trie = build_span_trie([7], max_span=4)
    assert trie.size == 1 and trie.contains([7])


def test_trie_rejects_bad_max_span():
    with pytest.raises(ValueError):
        build_span_trie([1, 2], 0)


# ---------------------------------------------------------------- beam


def test_width_one_is_greedy():
    s = SeededScorer(20, salt=1)
    prompt = [3, 4]
    best = beam_search(s, prompt, width=1, max_len=5)
    greedy = []
    for _ in range(5):
        row = s.next_token_logprobs([prompt + greedy])[0]
        greedy.append(int(np.argmax(row)))
    assert best.tokens == greedy


def test_restrained_output_is_always_a_source_span():
    rng = np.random.default_rng(1)
    for trial in range(50):
        s = SeededScorer(30, salt=trial)
        source = [int(x) for x in rng.integers(2, 28, size=10)]
        prompt = [int(x) for x in rng.integers(2, 28, size=4)]
        trie = build_span_trie(source, max_span=4)
        best = beam_search(s, prompt, width=4, max_len=6, trie=trie, end_id=0)
        assert best.tokens, "restrained search returned an empty span"
        assert any(source[i:i + len(best.tokens)] == best.tokens
                   for i in range(len(source))), (best.tokens, source)


def test_wider_beam_never_scores_worse():
    for salt in range(10):
        s = SeededScorer(12, salt=salt)
        scores = [beam_search(s, [5], width=w, max_len=4, end_id=0).logprob
                  for w in (1, 2, 4, 8)]
        assert all(b >= a - 1e-12 for a, b in zip(scores, scores[1:])), scores


def test_empty_trie_rejected():
    trie = build_span_trie([], max_span=3)
    with pytest.raises(ValueError, match="empty"):
        beam_search(UniformScorer(5), [1], width=2, max_len=3, trie=trie)


def test_beam_validates_parameters():
    with pytest.raises(ValueError):
        beam_search(UniformScorer(5), [1], width=0, max_len=3)


# ------------------------------------------------------------- prompts


def test_qa_prompt_renders_exactly():
    assert apply_prompt(BUILTIN_TEMPLATES["qa"], {"QUESTION": "q"}) == "QUESTION: q? ANSWER:"


def test_unbound_placeholder_rejected():
    with pytest.raises(ValueError, match=r"unbound placeholder \$QUESTION"):
        apply_prompt(BUILTIN_TEMPLATES["qa"], {})


def test_empty_field_warns_but_renders(caplog):
    with caplog.at_level(logging.WARNING):
        out = apply_prompt("$A and $B", {"A": "", "B": "y"})
    assert out == " and y"
    assert any("empty" in r.message for r in caplog.records)


def test_nli_template_carries_label_words():
    prefix, suffix = split_on_blank(BUILTIN_TEMPLATES["nli"], {"SENT_A": "it rains", "SENT_B": "wet"})
    rendered = [prefix + c + suffix for c in TEMPLATE_CANDIDATES["nli"]]
    assert rendered == ["it rains? No, wet", "it rains? Yes, wet", "it rains? Maybe, wet"]


def test_blank_at_end_splits_cleanly():
    prefix, suffix = split_on_blank(BUILTIN_TEMPLATES["qa"], {"QUESTION": "q"})
    assert prefix == "QUESTION: q? ANSWER:" and suffix == ""


# ------------------------------------------------------------- metrics


def test_max_gen_len_nearest_rank():
    assert max_gen_len(list(range(1, 101))) == 95
    assert max_gen_len([4, 4, 4]) == 4
    assert max_gen_len([7]) == 7
    with pytest.raises(ValueError):
        max_gen_len([])


def test_generation_metrics():
    assert exact_match("The Answer!", "the answer") == 1.0
    assert exact_match("a answer", "the answer") == 0.0
    assert token_f1("the right answer", "the answer") == pytest.approx(0.8)
    assert rouge_1("b a", "a b") == 1.0
    assert token_f1("", "") == 1.0
    assert token_f1("x", "") == 0.0


def test_sample_negatives():
    rng = np.random.default_rng(0)
    labels = ["a", "b", "c", "d", "e"]
    negs = sample_negatives(labels, gold_index=2, k=3, rng=rng)
    assert len(negs) == 3 and "c" not in negs and len(set(negs)) == 3
    with pytest.raises(ValueError):
        sample_negatives(["a", "b"], 0, 3, rng)
