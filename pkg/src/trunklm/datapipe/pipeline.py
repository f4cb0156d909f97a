"""Corpus -> training-sample archive.

Stage order: character run-collapse, sentence/paragraph structure,
consecutive-paragraph dedup, corpus-level digest dedup, short-sentence
filter, vocabulary build, sample construction. Deterministic given the
seed: re-running produces byte-identical archives.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..tasks.knowledge import KnowledgeTriple, build_uktp_sample, pair_triples_with_sentences
from ..tasks.samples import Span, build_distance_sample, build_knowledge_masked_sample, build_reorder_sample
from .cleaning import (
    Document,
    dedup_chars,
    dedup_paragraphs,
    doc_fingerprint,
    filter_short_sentences,
    segment_sentences,
    split_paragraphs,
)
from .mixing import DatasetSpec
from .tokenizer import Tokenizer, build_vocab

log = logging.getLogger(__name__)

TASKS = ("span_mlm", "doc_lm", "reorder", "sent_dist", "triple_mlm")


@dataclass
class PreprocessConfig:
    vocab_size: int = 2000
    sample_len: int = 96
    mask_rate: float = 0.15
    min_words: int = 10
    reorder_max_segments: int = 3
    distance_per_doc: int = 1
    distance_ratio: tuple[float, float, float] = (1.0, 1.0, 1.0)
    max_bad_record_fraction: float = 0.05


@dataclass
class PreprocessStats:
    docs_in: int = 0
    malformed_records: int = 0
    docs_empty_dropped: int = 0
    docs_md5_dropped: int = 0
    paragraphs_deduped: int = 0
    sentences_filtered: int = 0
    samples: dict = field(default_factory=lambda: {t: 0 for t in TASKS})
    vocab_size: int = 0

    def to_dict(self) -> dict:
        return {
            "docs_in": self.docs_in,
            "malformed_records": self.malformed_records,
            "docs_empty_dropped": self.docs_empty_dropped,
            "docs_md5_dropped": self.docs_md5_dropped,
            "paragraphs_deduped": self.paragraphs_deduped,
            "sentences_filtered": self.sentences_filtered,
            "samples": dict(self.samples),
            "vocab_size": self.vocab_size,
        }


class DataError(Exception):
    pass


def read_jsonl(path: str | Path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def load_documents(spec: DatasetSpec, stats: PreprocessStats,
                   max_bad_fraction: float = 0.05) -> tuple[list[Document], dict[str, dict]]:
    try:
        raw = read_jsonl(spec.path)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read dataset {spec.name!r} from {spec.path}: {e}") from e
    docs: list[Document] = []
    bad = 0
    for rec in raw:
        try:
            docs.append(Document(
                doc_id=str(rec["doc_id"]), dataset=spec.name,
                text=str(rec["text"]), title=rec.get("title"),
            ))
        except (KeyError, TypeError):
            bad += 1
    stats.malformed_records += bad
    if raw and bad > max(5, int(len(raw) * max_bad_fraction)):
        raise DataError(f"dataset {spec.name!r}: {bad}/{len(raw)} malformed records")
    anno: dict[str, dict] = {}
    if spec.annotations:
        for rec in read_jsonl(spec.annotations):
            anno[str(rec["doc_id"])] = rec
    return docs, anno


def load_kg(path: str | Path | None) -> list[KnowledgeTriple]:
    if path is None:
        return []
    return [KnowledgeTriple(r["head"], r["relation"], r["tail"]) for r in read_jsonl(path)]


def _find_token_spans(tokens: list[int], needle: list[int]) -> list[tuple[int, int]]:
    if not needle or len(needle) > len(tokens):
        return []
    out = []
    i = 0
    while i <= len(tokens) - len(needle):
        if tokens[i:i + len(needle)] == needle:
            out.append((i, i + len(needle)))
            i += len(needle)
        else:
            i += 1
    return out


def mention_spans(tokens: list[int], tok: Tokenizer, anno: dict | None) -> list[Span]:
    """Token spans of annotated entity/phrase mention strings, longest
    mentions first, non-overlapping."""
    if not anno:
        return []
    wanted = [(m, "entity") for m in anno.get("entities", [])]
    wanted += [(m, "phrase") for m in anno.get("phrases", [])]
    wanted.sort(key=lambda x: (-len(x[0]), x[0]))
    taken = np.zeros(len(tokens), dtype=bool)
    spans: list[Span] = []
    for mention, kind in wanted:
        needle = tok.encode(mention)
        for a, b in _find_token_spans(tokens, needle):
            if taken[a:b].any():
                continue
            taken[a:b] = True
            spans.append(Span(a, b, kind))
    spans.sort(key=lambda s: s.start)
    return spans


def _fit(tokens: list[int], budget: int) -> list[int]:
    return tokens[:budget] if len(tokens) > budget else tokens


def build_samples_for_doc(
    doc: Document,
    tok: Tokenizer,
    anno: dict | None,
    kg: list[KnowledgeTriple],
    cfg: PreprocessConfig,
    rng: np.random.Generator,
) -> list[dict]:
    """All per-document samples (cross-document distance pairs are drawn
    separately). Sample rngs derive from the caller's per-doc stream."""
    out: list[dict] = []
    meta = {"dataset": doc.dataset, "doc_id": doc.doc_id}
    doc_text = "\n".join("".join(para) for para in doc.paragraphs)
    doc_tokens = tok.encode(doc_text)
    if not doc_tokens:
        return out

    out.append({"task": "doc_lm", **meta, "tokens": doc_tokens})

    content_len = cfg.sample_len - 1  # room for [CLS]
    for start in range(0, len(doc_tokens), content_len):
        chunk = doc_tokens[start:start + content_len]
        if len(chunk) < 2:
            continue
        spans = mention_spans(chunk, tok, anno)
        sample = build_knowledge_masked_sample(chunk, spans, cfg.mask_rate, rng, tok.mask_id)
        if not sample.mask_positions:
            continue
        out.append({
            "task": "span_mlm", **meta,
            "input": [tok.cls_id] + sample.input_ids,
            "positions": [p + 1 for p in sample.mask_positions],
            "targets": sample.target_ids,
        })

    for para in doc.paragraphs:
        sent_tokens = [tok.encode(s) for s in para]
        sent_tokens = [s for s in sent_tokens if s]
        if not sent_tokens:
            continue
        sample = build_reorder_sample(sent_tokens, cfg.reorder_max_segments, rng)
        budget = (cfg.sample_len - 1 - sample.n) // max(sample.n, 1)
        ids = [tok.cls_id]
        for seg in sample.segments:
            ids.extend(_fit(seg, budget))
            ids.append(tok.sep_id)
        out.append({"task": "reorder", **meta, "input": ids, "label": sample.label})

    if kg and doc.title:
        pairs = pair_triples_with_sentences(doc.sentences(), doc.title, kg)
        for triple, sentence in pairs:
            s = build_uktp_sample(triple, sentence, rng, tok.encode, tok.special_id,
                                  tok.relation_id, cfg.mask_rate)
            if len(s.input_ids) > cfg.sample_len:
                continue
            out.append({
                "task": "triple_mlm", **meta,
                "input": s.input_ids,
                "positions": s.mask_positions,
                "targets": s.target_ids,
                "markers": list(s.marker_positions),
                "mode": s.mode,
            })
    return out


def build_distance_samples(
    docs: list[Document],
    tok: Tokenizer,
    cfg: PreprocessConfig,
    rng: np.random.Generator,
) -> list[dict]:
    corpus = [[tok.encode(s) for s in d.sentences()] for d in docs]
    keep = [i for i, sents in enumerate(corpus) if sents]
    corpus = [corpus[i] for i in keep]
    kept_docs = [docs[i] for i in keep]
    if not corpus:
        return []
    out = []
    budget = (cfg.sample_len - 3) // 2
    for _ in range(cfg.distance_per_doc * len(corpus)):
        try:
            s = build_distance_sample(corpus, rng, cfg.distance_ratio)
        except ValueError:
            break
        first_doc = s.meta.get("doc", s.meta.get("docs", (0,))[0])
        out.append({
            "task": "sent_dist",
            "dataset": kept_docs[first_doc].dataset,
            "doc_id": kept_docs[first_doc].doc_id,
            "input": [tok.cls_id] + _fit(s.first, budget) + [tok.sep_id] + _fit(s.second, budget) + [tok.sep_id],
            "label": s.label,
        })
    return out


def run_preprocess(
    datasets: list[DatasetSpec],
    kg_path: str | None,
    out_dir: str | Path,
    cfg: PreprocessConfig,
    seed: int,
) -> PreprocessStats:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats = PreprocessStats()
    kg = load_kg(kg_path)

    cleaned: list[Document] = []
    annotations: dict[tuple[str, str], dict] = {}
    for spec in datasets:
        docs, anno = load_documents(spec, stats, cfg.max_bad_record_fraction)
        stats.docs_in += len(docs)
        for doc in docs:
            text = dedup_chars(doc.text)
            paragraphs = [segment_sentences(p) for p in split_paragraphs(text)]
            deduped = dedup_paragraphs(paragraphs)
            stats.paragraphs_deduped += len(paragraphs) - len(deduped)
            c = Document(doc.doc_id, spec.name, text, doc.title, deduped)
            if not c.sentences():
                stats.docs_empty_dropped += 1
                continue
            cleaned.append(c)
            if doc.doc_id in anno:
                annotations[(spec.name, doc.doc_id)] = anno[doc.doc_id]

    seen: set[int] = set()
    surviving: list[Document] = []
    for doc in cleaned:
        fp = doc_fingerprint(doc.sentences())
        if fp in seen:
            stats.docs_md5_dropped += 1
            continue
        seen.add(fp)
        surviving.append(doc)

    filtered: list[Document] = []
    for doc in surviving:
        n_before = len(doc.sentences())
        paragraphs = filter_short_sentences(doc.paragraphs, cfg.min_words)
        kept = Document(doc.doc_id, doc.dataset, doc.text, doc.title, paragraphs)
        stats.sentences_filtered += n_before - len(kept.sentences())
        if kept.sentences():
            filtered.append(kept)
        else:
            stats.docs_empty_dropped += 1

    tok = build_vocab(
        ("".join(s for s in d.sentences()) for d in filtered),
        cfg.vocab_size,
        relations=[t.relation for t in kg],
    )
    stats.vocab_size = tok.vocab_size

    records: list[dict] = []
    for i, doc in enumerate(filtered):
        rng = np.random.default_rng([seed, 1, i])
        anno = annotations.get((doc.dataset, doc.doc_id))
        records.extend(build_samples_for_doc(doc, tok, anno, kg, cfg, rng))
    records.extend(build_distance_samples(filtered, tok, cfg, np.random.default_rng([seed, 2])))

    for rec in records:
        stats.samples[rec["task"]] += 1

    with open(out_dir / "archive.jsonl", "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True, separators=(",", ":"), ensure_ascii=True) + "\n")
    (out_dir / "vocab.json").write_text(tok.to_json(), encoding="utf-8")
    (out_dir / "stats.json").write_text(
        json.dumps(stats.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return stats
