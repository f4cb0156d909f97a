"""Prompt templates: literal $FIELD substitution with a reserved $BLANK slot
for multi-choice candidates."""

from __future__ import annotations

import logging
import re

log = logging.getLogger(__name__)

BLANK = "BLANK"
_PLACEHOLDER_RE = re.compile(r"\$([A-Z_][A-Z0-9_]*)")

# Built-in prompt shapes for QA, NLI and semantic similarity. The NLI and
# similarity templates carry the label words that fill their blank.
BUILTIN_TEMPLATES: dict[str, str] = {
    "qa": "QUESTION: $QUESTION? ANSWER:$BLANK",
    "nli": "$SENT_A?$BLANK, $SENT_B",
    "similarity": "The following two sentences have$BLANK semantics: $SENT_A. $SENT_B.",
}
TEMPLATE_CANDIDATES: dict[str, list[str]] = {
    "nli": [" No", " Yes", " Maybe"],
    "similarity": [" the same", " different"],
}


def apply_prompt(template: str, fields: dict[str, str]) -> str:
    """Substitute $FIELD placeholders. $BLANK, if present and unbound,
    renders empty (it is the candidate slot). Any other unbound placeholder
    is an error; empty field values substitute with a warning."""

    def sub(match: re.Match) -> str:
        name = match.group(1)
        if name in fields:
            value = str(fields[name])
            if value == "":
                log.warning("prompt field %s is empty", name)
            return value
        if name == BLANK:
            return ""
        raise ValueError(f"unbound placeholder ${name}")

    return _PLACEHOLDER_RE.sub(sub, template)


def split_on_blank(template: str, fields: dict[str, str]) -> tuple[str, str]:
    """(prefix, suffix) around the candidate slot; templates without $BLANK
    put candidates at the end."""
    m = re.search(r"\$BLANK\b", template)
    if m is None:
        return apply_prompt(template, fields), ""
    return (apply_prompt(template[:m.start()], fields),
            apply_prompt(template[m.end():], fields))


def resolve_template(template_id: str | None, template: str | None) -> str:
    if template is not None:
        return template
    if template_id is None:
        raise ValueError("item needs a template or template_id")
    if template_id not in BUILTIN_TEMPLATES:
        raise ValueError(f"unknown template_id {template_id!r}")
    return BUILTIN_TEMPLATES[template_id]
