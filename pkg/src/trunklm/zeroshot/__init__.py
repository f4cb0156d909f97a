from .beam import BeamHypothesis, beam_search
from .harness import EvalSummary, read_items, run_eval, write_results
from .metrics import exact_match, max_gen_len, normalize, rouge_1, sample_negatives, token_f1
from .prompts import BUILTIN_TEMPLATES, TEMPLATE_CANDIDATES, apply_prompt, split_on_blank
from .scoring import ChoiceScore, ModelScorer, per_token_ppl, score_choices
from .trie import SpanTrie, build_span_trie

__all__ = [
    "BeamHypothesis", "beam_search", "EvalSummary", "read_items", "run_eval",
    "write_results", "exact_match", "max_gen_len", "normalize", "rouge_1",
    "sample_negatives", "token_f1", "BUILTIN_TEMPLATES", "TEMPLATE_CANDIDATES",
    "apply_prompt", "split_on_blank", "ChoiceScore", "ModelScorer",
    "per_token_ppl", "score_choices", "SpanTrie", "build_span_trie",
]
