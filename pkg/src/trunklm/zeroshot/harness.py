"""Zero-shot evaluation driver.

Items come as newline-delimited JSON: multichoice items are scored by
per-token perplexity over the filled prompt; generation items run beam
search (trie-restrained when a source text is given) and score EM / token
F1 / Rouge-1 against the gold answer.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from ..datapipe.tokenizer import Tokenizer
from ..model import UnifiedModel
from .beam import beam_search
from .metrics import exact_match, max_gen_len, rouge_1, token_f1
from .prompts import TEMPLATE_CANDIDATES, resolve_template, split_on_blank
from .scoring import ModelScorer, score_choices
from .trie import build_span_trie

log = logging.getLogger(__name__)

DEFAULT_BEAM_WIDTH = 8
DEFAULT_MAX_SPAN = 16


@dataclass
class EvalSummary:
    total: int = 0
    multichoice_total: int = 0
    multichoice_correct: int = 0
    generation_total: int = 0
    em: float = 0.0
    f1: float = 0.0
    rouge1: float = 0.0
    records: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {"total": self.total}
        if self.multichoice_total:
            out["multichoice"] = {
                "n": self.multichoice_total,
                "accuracy": self.multichoice_correct / self.multichoice_total,
            }
        if self.generation_total:
            out["generation"] = {
                "n": self.generation_total,
                "em": self.em / self.generation_total,
                "f1": self.f1 / self.generation_total,
                "rouge1": self.rouge1 / self.generation_total,
            }
        return out


def read_items(path: str | Path) -> list[dict]:
    items = []
    with open(path, encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                items.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{ln}: bad item: {e}") from e
    return items


def run_eval(
    model: UnifiedModel,
    tokenizer: Tokenizer,
    items: list[dict],
    beam_width: int = DEFAULT_BEAM_WIDTH,
    span_only: bool = False,
    max_span: int = DEFAULT_MAX_SPAN,
) -> EvalSummary:
    scorer = ModelScorer(model, tokenizer.bos_id)
    summary = EvalSummary()

    gen_items = [it for it in items if it.get("type") == "generation"]
    gen_max_len = None
    if gen_items:
        lengths = [len(tokenizer.encode(str(it["gold"]))) for it in gen_items]
        gen_max_len = max_gen_len(lengths)

    for it in items:
        kind = it.get("type")
        item_id = it.get("id", f"item{summary.total}")
        if kind == "multichoice":
            rec = _eval_multichoice(scorer, tokenizer, it, item_id, span_only)
            summary.multichoice_total += 1
            summary.multichoice_correct += rec["correct"]
        elif kind == "generation":
            rec = _eval_generation(scorer, tokenizer, it, item_id, beam_width, gen_max_len, max_span)
            summary.generation_total += 1
            summary.em += rec["em"]
            summary.f1 += rec["f1"]
            summary.rouge1 += rec["rouge1"]
        else:
            raise ValueError(f"item {item_id}: unknown type {kind!r}")
        summary.total += 1
        summary.records.append(rec)
    return summary


def _eval_multichoice(scorer, tokenizer, it, item_id, span_only) -> dict:
    template = resolve_template(it.get("template_id"), it.get("template"))
    candidates = it.get("candidates") or TEMPLATE_CANDIDATES.get(it.get("template_id", ""))
    if not candidates:
        raise ValueError(f"item {item_id}: no candidates")
    gold = int(it["gold"])
    if not 0 <= gold < len(candidates):
        raise ValueError(f"item {item_id}: gold index out of range")
    prefix, suffix = split_on_blank(template, it.get("fields", {}))
    result = score_choices(scorer, tokenizer.encode, prefix, list(map(str, candidates)),
                           suffix, span_only=span_only)
    return {
        "id": item_id, "type": "multichoice", "predicted": result.predicted,
        "gold": gold, "correct": int(result.predicted == gold),
        "ppls": result.ppls, "tied": result.tied,
    }


def _eval_generation(scorer, tokenizer, it, item_id, beam_width, gen_max_len, max_span) -> dict:
    template = resolve_template(it.get("template_id"), it.get("template"))
    prompt_text, _ = split_on_blank(template, it.get("fields", {}))
    prompt = tokenizer.encode(prompt_text)
    trie = None
    if it.get("source"):
        trie = build_span_trie(tokenizer.encode(str(it["source"])), max_span)
    best = beam_search(scorer, prompt, beam_width, gen_max_len or 1,
                       trie=trie, end_id=tokenizer.sep_id)
    pred = tokenizer.decode(best.tokens)
    gold = str(it["gold"])
    return {
        "id": item_id, "type": "generation", "prediction": pred, "gold": gold,
        "logprob": best.logprob, "restrained": trie is not None,
        "em": exact_match(pred, gold), "f1": token_f1(pred, gold),
        "rouge1": rouge_1(pred, gold),
    }


def write_results(summary: EvalSummary, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "eval_items.jsonl", "w", encoding="utf-8") as f:
        for rec in summary.records:
            f.write(json.dumps(rec, sort_keys=True, ensure_ascii=True) + "\n")
    (out_dir / "eval_summary.json").write_text(
        json.dumps(summary.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
