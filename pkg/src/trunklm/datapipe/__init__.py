from .cleaning import (
    Document,
    clean_document,
    dedup_chars,
    dedup_paragraphs,
    doc_fingerprint,
    filter_short_sentences,
    segment_sentences,
    split_paragraphs,
    word_count,
)
from .mixing import DatasetSpec, mix_datasets
from .pipeline import DataError, PreprocessConfig, PreprocessStats, run_preprocess
from .tokenizer import SPECIALS, Tokenizer, build_vocab

__all__ = [
    "Document", "clean_document", "dedup_chars", "dedup_paragraphs",
    "doc_fingerprint", "filter_short_sentences", "segment_sentences",
    "split_paragraphs", "word_count", "DatasetSpec", "mix_datasets",
    "DataError", "PreprocessConfig", "PreprocessStats", "run_preprocess",
    "SPECIALS", "Tokenizer", "build_vocab",
]
