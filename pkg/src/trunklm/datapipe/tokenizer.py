"""Greedy longest-match subword tokenizer with byte fallback.

The vocabulary is: fixed special tokens, relation tokens from the knowledge
graph, 256 byte tokens, then learned pieces (the most frequent word and
separator units of the corpus). Encoding splits text into units (word runs,
whitespace runs, punctuation runs), greedily matches the longest known
piece inside each unit, and falls back to UTF-8 byte tokens, so
decode(encode(text)) == text for any string.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from typing import Iterable

SPECIALS = ("[PAD]", "[BOS]", "[SEP]", "[CLS]", "[MASK]", "[HD]", "[/HD]", "[TL]", "[/TL]")

_UNIT_RE = re.compile(r"\w+|\s+|[^\w\s]+", re.UNICODE)


def text_units(text: str) -> list[str]:
    return _UNIT_RE.findall(text)


class Tokenizer:
    def __init__(self, relations: list[str], pieces: list[str]):
        self.relations = list(relations)
        self.pieces = list(pieces)
        self._tokens: list[str] = list(SPECIALS)
        self._rel_offset = len(self._tokens)
        self._tokens += [f"[REL:{r}]" for r in self.relations]
        self._byte_offset = len(self._tokens)
        self._tokens += [f"<0x{b:02X}>" for b in range(256)]
        self._piece_offset = len(self._tokens)
        self._tokens += self.pieces
        if len(set(self._tokens)) != len(self._tokens):
            raise ValueError("duplicate entries in vocabulary")
        self._ids = {tok: i for i, tok in enumerate(self._tokens)}
        self._rel_ids = {r: self._rel_offset + i for i, r in enumerate(self.relations)}
        self._trie: dict = {}
        for pid, piece in enumerate(self.pieces, start=self._piece_offset):
            node = self._trie
            for ch in piece:
                node = node.setdefault(ch, {})
            node[None] = pid

    # ------------------------------------------------------------- sizes

    @property
    def vocab_size(self) -> int:
        return len(self._tokens)

    def special_id(self, token: str) -> int:
        if token not in SPECIALS:
            raise KeyError(f"not a special token: {token!r}")
        return self._ids[token]

    @property
    def pad_id(self) -> int:
        return self._ids["[PAD]"]

    @property
    def bos_id(self) -> int:
        return self._ids["[BOS]"]

    @property
    def sep_id(self) -> int:
        return self._ids["[SEP]"]

    @property
    def cls_id(self) -> int:
        return self._ids["[CLS]"]

    @property
    def mask_id(self) -> int:
        return self._ids["[MASK]"]

    def relation_id(self, relation: str) -> int:
        if relation not in self._rel_ids:
            raise KeyError(f"relation not in vocabulary: {relation!r}")
        return self._rel_ids[relation]

    def token_string(self, token_id: int) -> str:
        return self._tokens[token_id]

    def is_byte(self, token_id: int) -> bool:
        return self._byte_offset <= token_id < self._byte_offset + 256

    # ------------------------------------------------------------- codec

    def _encode_unit(self, unit: str, out: list[int]) -> None:
        i = 0
        n = len(unit)
        while i < n:
            node = self._trie
            best = None
            best_len = 0
            j = i
            while j < n and unit[j] in node:
                node = node[unit[j]]
                j += 1
                if None in node:
                    best, best_len = node[None], j - i
            if best is not None:
                out.append(best)
                i += best_len
            else:
                for b in unit[i].encode("utf-8"):
                    out.append(self._byte_offset + b)
                i += 1

    def encode(self, text: str) -> list[int]:
        out: list[int] = []
        for unit in text_units(text):
            self._encode_unit(unit, out)
        return out

    def decode(self, ids: Iterable[int]) -> str:
        parts: list[str] = []
        pending = bytearray()

        def flush():
            if pending:
                parts.append(pending.decode("utf-8", errors="replace"))
                pending.clear()

        for tid in ids:
            if self.is_byte(tid):
                pending.append(tid - self._byte_offset)
            else:
                flush()
                parts.append(self._tokens[tid])
        flush()
        return "".join(parts)

    # --------------------------------------------------------- persistence

    def to_json(self) -> str:
        return json.dumps({"relations": self.relations, "pieces": self.pieces},
                          sort_keys=True, separators=(",", ":"), ensure_ascii=True)

    @classmethod
    def from_json(cls, payload: str) -> "Tokenizer":
        obj = json.loads(payload)
        return cls(obj["relations"], obj["pieces"])

    def digest(self) -> bytes:
        return hashlib.md5(self.to_json().encode("utf-8")).digest()


def build_vocab(texts: Iterable[str], vocab_size: int, relations: list[str] | None = None) -> Tokenizer:
    """Learn the piece list: the most frequent units, by (count desc, unit).
    `vocab_size` caps the total vocabulary including specials, relations and
    byte tokens."""
    relations = sorted(set(relations or []))
    counts: Counter[str] = Counter()
    for text in texts:
        counts.update(text_units(text))
    budget = vocab_size - len(SPECIALS) - len(relations) - 256
    if budget < 0:
        raise ValueError(f"vocab_size {vocab_size} too small for fixed tokens")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    pieces = [unit for unit, _ in ranked[:budget]]
    return Tokenizer(relations, pieces)
