from .knowledge import (
    MASK_RELATION,
    MASK_WORDS,
    KnowledgeTriple,
    UKTPSample,
    build_uktp_sample,
    pair_triples_with_sentences,
)
from .losses import compute_task_loss
from .permcode import decode_class, encode_permutation, total_classes
from .samples import (
    ADJACENT,
    DIFFERENT_DOCS,
    SAME_DOC,
    DistanceSample,
    MaskedSample,
    ReorderSample,
    Span,
    build_distance_sample,
    build_knowledge_masked_sample,
    build_reorder_sample,
    segment_document_lm,
)

__all__ = [
    "MASK_RELATION", "MASK_WORDS", "KnowledgeTriple", "UKTPSample",
    "build_uktp_sample", "pair_triples_with_sentences", "compute_task_loss",
    "decode_class", "encode_permutation", "total_classes",
    "ADJACENT", "DIFFERENT_DOCS", "SAME_DOC", "DistanceSample",
    "MaskedSample", "ReorderSample", "Span", "build_distance_sample",
    "build_knowledge_masked_sample", "build_reorder_sample",
    "segment_document_lm",
]
