"""Trie over the contiguous token spans of a source text, used to restrain
beam-search generation to spans that occur in the source."""

from __future__ import annotations


class TrieNode:
    __slots__ = ("children", "terminal")

    def __init__(self):
        self.children: dict[int, TrieNode] = {}
        self.terminal = False


class SpanTrie:
    def __init__(self):
        self.root = TrieNode()
        self.size = 0  # number of distinct spans

    def insert(self, span: list[int]) -> None:
        node = self.root
        for t in span:
            if t not in node.children:
                node.children[t] = TrieNode()
            node = node.children[t]
        if not node.terminal:
            node.terminal = True
            self.size += 1

    def contains(self, span: list[int]) -> bool:
        node = self.root
        for t in span:
            node = node.children.get(t)
            if node is None:
                return False
        return node.terminal

    @property
    def empty(self) -> bool:
        return not self.root.children


def build_span_trie(source: list[int], max_span: int) -> SpanTrie:
    """Every contiguous span of the source with length in [1, max_span].
    All prefixes of a span are spans, so every inserted node is terminal."""
    if max_span < 1:
        raise ValueError("max_span must be >= 1")
    trie = SpanTrie()
    n = len(source)
    for i in range(n):
        node = trie.root
        for j in range(i, min(i + max_span, n)):
            t = source[j]
            if t not in node.children:
                node.children[t] = TrieNode()
            node = node.children[t]
            if not node.terminal:
                node.terminal = True
                trie.size += 1
    return trie
