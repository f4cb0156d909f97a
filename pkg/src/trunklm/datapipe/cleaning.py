"""Corpus cleaning: run-collapse, paragraph/document dedup, length filter,
sentence segmentation.

Stage order in the pipeline is: character run-collapse, paragraph split +
sentence segmentation, consecutive-paragraph dedup, corpus-level digest
dedup, short-sentence filter. Every per-document transform is idempotent.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

# Characters whose runs collapse to a single occurrence. Newlines are kept
# out so paragraph boundaries survive.
DEFAULT_REPEATABLE = frozenset(" \t!?！？。…")

_TERMINALS = "。！？!?.…"
_CLOSERS = "\"'”’」』)]"

_WORD_RE = re.compile(r"\w+", re.UNICODE)


@dataclass
class Document:
    doc_id: str
    dataset: str
    text: str
    title: str | None = None
    paragraphs: list[list[str]] = field(default_factory=list)

    def sentences(self) -> list[str]:
        return [s for para in self.paragraphs for s in para]


def dedup_chars(text: str, repeatable: frozenset[str] = DEFAULT_REPEATABLE) -> str:
    out = []
    prev = None
    for ch in text:
        if ch == prev and ch in repeatable:
            continue
        out.append(ch)
        prev = ch
    return "".join(out)


def segment_sentences(text: str) -> list[str]:
    """Split after runs of terminal punctuation plus trailing closing
    quotes/brackets. The concatenation of the result is exactly the input."""
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] in _TERMINALS:
            j = i + 1
            while j < n and text[j] in _TERMINALS:
                j += 1
            while j < n and text[j] in _CLOSERS:
                j += 1
            sentences.append(text[start:j])
            start = j
            i = j
        else:
            i += 1
    if start < n:
        sentences.append(text[start:])
    return sentences


def split_paragraphs(text: str) -> list[str]:
    return [p for p in text.split("\n") if p.strip()]


def dedup_paragraphs(paragraphs: list[list[str]]) -> list[list[str]]:
    """Collapse runs of identical consecutive paragraphs of 1..99 sentences
    to a single occurrence (the fixpoint of the pairwise rule)."""
    out: list[list[str]] = []
    for para in paragraphs:
        if out and out[-1] == para and 0 < len(para) < 100:
            continue
        out.append(para)
    return out


def word_count(sentence: str) -> int:
    return len(_WORD_RE.findall(sentence))


def filter_short_sentences(paragraphs: list[list[str]], min_words: int = 10) -> list[list[str]]:
    kept = [[s for s in para if word_count(s) >= min_words] for para in paragraphs]
    return [para for para in kept if para]


def doc_fingerprint(sentences: list[str]) -> int:
    """128-bit digest: the wraparound sum of the MD5s of the top-3 longest
    sentences (ties broken by first occurrence; fewer than 3 uses all)."""
    if not sentences:
        raise ValueError("cannot fingerprint a document with no sentences")
    ranked = sorted(range(len(sentences)), key=lambda i: (-len(sentences[i]), i))[:3]
    total = 0
    for i in ranked:
        digest = hashlib.md5(sentences[i].encode("utf-8")).digest()
        total = (total + int.from_bytes(digest, "big")) % (1 << 128)
    return total


def clean_document(doc: Document, min_words: int = 10,
                   repeatable: frozenset[str] = DEFAULT_REPEATABLE,
                   apply_filter: bool = True) -> Document:
    """Per-document stages: char run-collapse, paragraph/sentence split,
    paragraph dedup, then (optionally deferred) the short-sentence filter."""
    text = dedup_chars(doc.text, repeatable)
    paragraphs = [segment_sentences(p) for p in split_paragraphs(text)]
    paragraphs = dedup_paragraphs(paragraphs)
    if apply_filter:
        paragraphs = filter_short_sentences(paragraphs, min_words)
    return Document(doc.doc_id, doc.dataset, text, doc.title, paragraphs)
