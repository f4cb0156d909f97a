"""Cleaning, segmentation, fingerprints, tokenizer, mixing, preprocess."""

import hashlib
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trunklm.datapipe import (
    DatasetSpec,
    PreprocessConfig,
    build_vocab,
    dedup_chars,
    dedup_paragraphs,
    doc_fingerprint,
    filter_short_sentences,
    mix_datasets,
    run_preprocess,
    segment_sentences,
    word_count,
)
from trunklm.datapipe.synthetic import synthetic_corpus, write_jsonl
from trunklm.datapipe.tokenizer import Tokenizer


# ----------------------------------------------------------- char dedup


def test_char_runs_collapse():
    assert dedup_chars("a!!!b") == "a!b"


def test_plain_text_is_fixpoint():
    assert dedup_chars("abc") == "abc"


def test_mixed_runs():
    assert dedup_chars("x???   y") == "x? y"


def test_non_repeatable_chars_untouched():
    assert dedup_chars("aaab") == "aaab"


# ------------------------------------------------------ paragraph dedup

P = ["this paragraph has exactly ten words in it right now."]
Q = ["a different paragraph also carrying ten whole words right here."]


def test_consecutive_duplicate_paragraph_collapses():
    assert dedup_paragraphs([P, P, Q]) == [P, Q]


def test_non_consecutive_duplicates_survive():
    assert dedup_paragraphs([P, Q, P]) == [P, Q, P]


def test_triple_collapses_to_one():
    assert dedup_paragraphs([P, P, P]) == [P]


def test_century_long_paragraph_not_deduped():
    big = [f"sentence {i}" for i in range(100)]
    assert dedup_paragraphs([big, big]) == [big, big]


# ------------------------------------------------------ fingerprint


def test_fingerprint_order_insensitive_over_top3():
    sents = ["ccc third longest!", "bbbb second longest sentence", "aaaaa the very longest sentence"]
    a = doc_fingerprint(sents)
    b = doc_fingerprint(sents[::-1])
    assert a == b


def test_single_sentence_fingerprint_is_md5():
    s = "only one sentence here."
    expected = int.from_bytes(hashlib.md5(s.encode()).digest(), "big")
    assert doc_fingerprint([s]) == expected


def test_fingerprint_sensitive_to_single_char():
    sents = ["a long sentence number one", "a long sentence number two", "short"]
    assert doc_fingerprint(sents) != doc_fingerprint([sents[0], sents[1][:-1] + "!", sents[2]])


def test_fingerprint_rejects_empty():
    with pytest.raises(ValueError):
        doc_fingerprint([])


# ----------------------------------------------------- sentence filter


def test_nine_word_sentence_removed():
    nine = "one two three four five six seven eight nine"
    assert filter_short_sentences([[nine]]) == []


def test_ten_word_sentence_kept():
    ten = "one two three four five six seven eight nine ten"
    assert filter_short_sentences([[ten]]) == [[ten]]


def test_mixed_lengths_filtered_by_count():
    def words(n):
        return " ".join(f"w{i}" for i in range(n))
    doc = [[words(5), words(12)], [words(3), words(15)]]
    out = filter_short_sentences(doc)
    assert [len(p) for p in out] == [1, 1]
    assert sum(len(p) for p in out) == 2


# ------------------------------------------------------- segmentation


def test_basic_cjk_split():
    assert segment_sentences("A。B！") == ["A。", "B！"]


def test_no_terminal_is_one_sentence():
    assert segment_sentences("no terminal punctuation here") == ["no terminal punctuation here"]


def test_quoted_dialogue_split():
    # terminals keep trailing closers; following text starts the next sentence
    text = 'He said "stop!" and left. Then she replied "why?" quietly.'
    expected = ['He said "stop!"', ' and left.', ' Then she replied "why?"', ' quietly.']
    assert segment_sentences(text) == expected


@given(st.text(max_size=200))
@settings(max_examples=100, deadline=None)
def test_segmentation_concatenation_reproduces_input(text):
    assert "".join(segment_sentences(text)) == text


# ----------------------------------------------------------- idempotence


@given(st.text(max_size=120))
@settings(max_examples=80, deadline=None)
def test_dedup_chars_idempotent(text):
    once = dedup_chars(text)
    assert dedup_chars(once) == once


@given(st.lists(st.lists(st.text(min_size=1, max_size=8), min_size=1, max_size=3), max_size=8))
@settings(max_examples=60, deadline=None)
def test_dedup_paragraphs_idempotent(paragraphs):
    once = dedup_paragraphs(paragraphs)
    assert dedup_paragraphs(once) == once


def test_filter_idempotent():
    def words(n):
        return " ".join(f"w{i}" for i in range(n))
    doc = [[words(n) for n in (4, 11, 10, 2)]]
    once = filter_short_sentences(doc)
    assert filter_short_sentences(once) == once


# -------------------------------------------------------------- tokenizer


def test_empty_text_encodes_empty():
    tok = build_vocab(["hello world"], vocab_size=300)
    assert tok.encode("") == []


def test_round_trip_on_training_text():
    tok = build_vocab(["the quick brown fox jumps over the lazy dog"], vocab_size=300)
    text = "the quick brown fox"
    assert tok.decode(tok.encode(text)) == text


@given(st.text(max_size=80))
@settings(max_examples=120, deadline=None)
def test_round_trip_arbitrary_unicode(text):
    tok = build_vocab(["some training text"], vocab_size=290)
    assert tok.decode(tok.encode(text)) == text


def test_top_frequent_words_get_single_ids():
    rng = np.random.default_rng(0)
    words = [f"word{i}" for i in range(40)]
    # frequencies strictly decreasing with index
    corpus = " ".join(w for i, w in enumerate(words) for _ in range(80 - 2 * i))
    tok = build_vocab([corpus], vocab_size=256 + 9 + 15)  # room for ~15 pieces
    for w in words[:10]:
        ids = tok.encode(w)
        assert len(ids) == 1, f"{w} split into {ids}"


def test_relation_tokens_resolve():
    tok = build_vocab(["text"], vocab_size=300, relations=["made_from", "near"])
    assert tok.relation_id("near") != tok.relation_id("made_from")
    assert tok.token_string(tok.relation_id("near")) == "[REL:near]"
    with pytest.raises(KeyError):
        tok.relation_id("unknown")


def test_tokenizer_json_round_trip():
    tok = build_vocab(["alpha beta gamma alpha"], vocab_size=280, relations=["r1"])
    clone = Tokenizer.from_json(tok.to_json())
    assert clone.encode("alpha beta") == tok.encode("alpha beta")
    assert clone.digest() == tok.digest()


def test_specials_never_produced_by_encode():
    tok = build_vocab(["[MASK] in text"], vocab_size=300)
    ids = tok.encode("literal [MASK] here")
    assert tok.mask_id not in ids
    assert tok.decode(ids) == "literal [MASK] here"


# ----------------------------------------------------------------- mixing


def test_multiplier_repeats_dataset():
    rng = np.random.default_rng(0)
    stream = mix_datasets({"a": list(range(10))}, {"a": 20}, rng)
    assert len(stream) == 200
    assert sorted(set(stream)) == list(range(10))


def test_unit_multipliers_give_permutation():
    rng = np.random.default_rng(1)
    stream = mix_datasets({"a": [1, 2, 3], "b": [4, 5]}, {"a": 1, "b": 1}, rng)
    assert sorted(stream) == [1, 2, 3, 4, 5]


def test_mixed_multiplier_counts():
    rng = np.random.default_rng(2)
    a = [("a", i) for i in range(10)]
    b = [("b", i) for i in range(30)]
    stream = mix_datasets({"a": a, "b": b}, {"a": 2, "b": 1}, rng)
    assert len(stream) == 50
    assert sum(1 for x in stream if x[0] == "a") == 20


def test_dataset_spec_validates_multiplier():
    with pytest.raises(ValueError):
        DatasetSpec("x", "p", multiplier=0)


# ------------------------------------------------------------- preprocess


def test_preprocess_deterministic_and_stats(tmp_path):
    corpus, anno, kg = synthetic_corpus(seed=5, n_docs=8)
    write_jsonl(corpus, tmp_path / "corpus.jsonl")
    write_jsonl(anno, tmp_path / "anno.jsonl")
    write_jsonl(kg, tmp_path / "kg.jsonl")
    spec = DatasetSpec("synthetic", str(tmp_path / "corpus.jsonl"),
                       annotations=str(tmp_path / "anno.jsonl"))
    cfg = PreprocessConfig(vocab_size=600, sample_len=96)
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    s1 = run_preprocess([spec], str(tmp_path / "kg.jsonl"), out1, cfg, seed=7)
    s2 = run_preprocess([spec], str(tmp_path / "kg.jsonl"), out2, cfg, seed=7)
    assert (out1 / "archive.jsonl").read_bytes() == (out2 / "archive.jsonl").read_bytes()
    assert (out1 / "vocab.json").read_bytes() == (out2 / "vocab.json").read_bytes()
    assert s1.to_dict() == s2.to_dict()
    assert s1.docs_in == 8 and s1.docs_md5_dropped == 0
    for task in ("span_mlm", "doc_lm", "reorder", "sent_dist", "triple_mlm"):
        assert s1.samples[task] > 0, task


def test_preprocess_empty_input(tmp_path):
    (tmp_path / "empty.jsonl").write_text("")
    spec = DatasetSpec("e", str(tmp_path / "empty.jsonl"))
    stats = run_preprocess([spec], None, tmp_path / "out", PreprocessConfig(), seed=0)
    assert stats.docs_in == 0
    assert (tmp_path / "out" / "archive.jsonl").read_text() == ""


def test_preprocess_drops_md5_duplicates(tmp_path):
    corpus, _, _ = synthetic_corpus(seed=1, n_docs=4)
    dup = dict(corpus[0])
    dup["doc_id"] = "copycat"
    write_jsonl(corpus + [dup], tmp_path / "c.jsonl")
    stats = run_preprocess([DatasetSpec("d", str(tmp_path / "c.jsonl"))], None,
                           tmp_path / "out", PreprocessConfig(vocab_size=600), seed=0)
    assert stats.docs_md5_dropped == 1


def test_archive_records_are_wellformed(tmp_path):
    corpus, anno, kg = synthetic_corpus(seed=2, n_docs=6)
    write_jsonl(corpus, tmp_path / "c.jsonl")
    write_jsonl(anno, tmp_path / "a.jsonl")
    write_jsonl(kg, tmp_path / "kg.jsonl")
    spec = DatasetSpec("synthetic", str(tmp_path / "c.jsonl"), annotations=str(tmp_path / "a.jsonl"))
    run_preprocess([spec], str(tmp_path / "kg.jsonl"), tmp_path / "out",
                   PreprocessConfig(vocab_size=600, sample_len=96), seed=3)
    tok = Tokenizer.from_json((tmp_path / "out" / "vocab.json").read_text())
    with open(tmp_path / "out" / "archive.jsonl") as f:
        records = [json.loads(line) for line in f]
    assert records
    for rec in records:
        if rec["task"] == "doc_lm":
            assert all(0 <= t < tok.vocab_size for t in rec["tokens"])
        else:
            assert len(rec["input"]) <= 96
            assert all(0 <= t < tok.vocab_size for t in rec["input"])
        if rec["task"] in ("span_mlm", "triple_mlm"):
            assert len(rec["positions"]) == len(rec["targets"]) >= 1
            assert all(rec["input"][p] == tok.mask_id for p in rec["positions"])


def test_word_count_counts_word_units():
    assert word_count("three tidy words") == 3
    assert word_count("hyphen-joined counts as two") == 5
