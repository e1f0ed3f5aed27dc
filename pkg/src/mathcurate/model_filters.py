"""LLM-backed question-type classifiers and the dual rule+model combination.

The combination is recall-first: a record drops when either the regular
expression or the model flags it, and the verdict detail records which side
fired so disagreement reports can mirror the per-filter statistics table.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .clients import ModelClient, TransportError
from .prompts import filter_template_fingerprint, render_filter_prompt
from .records import (
    Decision,
    FilterId,
    FilterVerdict,
    Method,
    ProblemRecord,
    ProvenanceLedger,
    TYPE_FILTER_FAMILIES,
)
from .rules import RuleMatch

FILTER_KIND_OF = {
    FilterId.MULTIPLE_CHOICE: "multiple_choice",
    FilterId.TRUE_FALSE: "true_false",
    FilterId.YES_NO: "yes_no",
    FilterId.MULTI_PART: "multi_part",
    FilterId.PROOF: "proof",
}
_FILTER_OF_KIND = {kind: fid for fid, kind in FILTER_KIND_OF.items()}

# Reply token pairs per prompt: (positive, negative).
_TOKENS = {
    "multiple_choice": ("yes", "no"),
    "proof": ("yes", "no"),
    "yes_no": ("yes", "no"),
    "multi_part": ("yes", "no"),
    "true_false": ("true", "false"),
}


class Parsed(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNPARSEABLE = "unparseable"


@dataclass(frozen=True)
class ClassificationOutcome:
    filter_id: FilterId
    raw_reply: str
    parsed: Parsed


def parse_reply(kind: str, reply: str) -> Parsed:
    """Tolerant parse: lowercase, ignore punctuation, accept the leading token."""
    tokens = re.findall(r"[a-z]+", reply.lower())
    if not tokens:
        return Parsed.UNPARSEABLE
    positive, negative = _TOKENS[kind]
    if tokens[0] == positive:
        return Parsed.POSITIVE
    if tokens[0] == negative:
        return Parsed.NEGATIVE
    return Parsed.UNPARSEABLE


def render_prompt(filter_kind: str, record: ProblemRecord) -> str:
    """Interpolate the record's problem into the registered template."""
    return render_filter_prompt(filter_kind, record.problem)


def classify(record: ProblemRecord, filter_kind: str, client: ModelClient) -> ClassificationOutcome:
    """One classification call with a single reparse retry.

    The call key carries (filter kind, record id, template fingerprint), so
    cached replies survive resumption but template edits invalidate them.
    Transport failure yields an unparseable (flagged) outcome, never a drop.
    """
    if filter_kind not in _FILTER_OF_KIND:
        raise KeyError(f"unknown filter kind: {filter_kind}")
    filter_id = _FILTER_OF_KIND[filter_kind]
    prompt = render_prompt(filter_kind, record)
    fingerprint = filter_template_fingerprint(filter_kind)
    base_key = f"classify:{filter_kind}:{record.id}:{fingerprint}"
    reply = ""
    for attempt in range(2):
        key = base_key if attempt == 0 else f"{base_key}:retry{attempt}"
        try:
            reply = client.complete(prompt, key=key)
        except TransportError as exc:
            return ClassificationOutcome(filter_id, f"<transport failure: {exc}>", Parsed.UNPARSEABLE)
        parsed = parse_reply(filter_kind, reply)
        if parsed is not Parsed.UNPARSEABLE:
            return ClassificationOutcome(filter_id, reply, parsed)
    return ClassificationOutcome(filter_id, reply, Parsed.UNPARSEABLE)


def combine(rule: RuleMatch | None, model: ClassificationOutcome) -> FilterVerdict:
    """Union semantics: either side firing drops the record.

    A flagged (unparseable) model outcome leaves the decision to the rule
    side alone, with a note so no record silently escapes review.
    """
    filter_id = model.filter_id
    if rule is not None and rule.filter_id is not filter_id:
        raise ValueError(f"rule {rule.filter_id} combined with model {filter_id}")
    rule_fired = rule is not None
    flagged = model.parsed is Parsed.UNPARSEABLE
    model_fired = model.parsed is Parsed.POSITIVE

    if rule_fired and model_fired:
        detail = f"rule+model: {rule.pattern_name}"
        return FilterVerdict(filter_id, Method.RULE, Decision.DROP, detail=detail)
    if rule_fired:
        detail = f"rule-only: {rule.pattern_name}"
        if flagged:
            detail += "; model-flagged"
        return FilterVerdict(filter_id, Method.RULE, Decision.DROP, detail=detail)
    if model_fired:
        return FilterVerdict(filter_id, Method.MODEL, Decision.DROP, detail="model-only")
    if flagged:
        return FilterVerdict(filter_id, Method.MODEL, Decision.FLAG, detail="model-flagged")
    return FilterVerdict(filter_id, Method.MODEL, Decision.KEEP)


def verdict_sides(verdict: FilterVerdict) -> str:
    """Which side(s) fired for a type-filter verdict: rule, model, both, or none."""
    head = verdict.detail.split(";")[0].strip()
    if head.startswith("rule+model"):
        return "both"
    if head.startswith("rule-only"):
        return "rule"
    if head.startswith("model-only"):
        return "model"
    return "none"


def supersede(verdict: FilterVerdict, dropped_by: FilterId) -> FilterVerdict:
    """Demote a drop verdict to a flag when another family already dropped the
    record, preserving the match information for statistics."""
    return FilterVerdict(
        verdict.filter_id,
        verdict.method,
        Decision.FLAG,
        detail=f"{verdict.detail}; superseded by {dropped_by.value}",
    )


def _family_matches(ledger: ProvenanceLedger) -> Iterable[tuple[FilterId, str]]:
    for verdict in ledger.verdicts:
        if verdict.filter_id in TYPE_FILTER_FAMILIES:
            sides = verdict_sides(verdict)
            if sides != "none":
                yield verdict.filter_id, sides


def disagreement_report(ledgers: Sequence[ProvenanceLedger]) -> dict[str, dict]:
    """Per filter family: rule-only vs model-only match counts and record ids.

    Counts include matches whose drop was attributed to another family, so
    the table reflects every classifier firing, not just attributed drops.
    """
    table: dict[str, dict] = {
        fid.value: {"rule_only": 0, "model_only": 0, "rule_only_ids": [], "model_only_ids": []}
        for fid in TYPE_FILTER_FAMILIES
    }
    for ledger in ledgers:
        for filter_id, sides in _family_matches(ledger):
            row = table[filter_id.value]
            if sides == "rule":
                row["rule_only"] += 1
                row["rule_only_ids"].append(ledger.record_id)
            elif sides == "model":
                row["model_only"] += 1
                row["model_only_ids"].append(ledger.record_id)
    return table


def disagreement_tsv(table: dict[str, dict]) -> str:
    lines = ["filter\trule_only\tmodel_only\trule_only_ids\tmodel_only_ids"]
    for family, row in table.items():
        lines.append(
            f"{family}\t{row['rule_only']}\t{row['model_only']}\t"
            f"{','.join(row['rule_only_ids'])}\t{','.join(row['model_only_ids'])}"
        )
    return "\n".join(lines) + "\n"


def sample_labeled(
    records: Sequence[ProblemRecord],
    ledgers: Sequence[ProvenanceLedger],
    family: FilterId,
    per_side: int = 100,
) -> list[dict]:
    """Export classified samples for manual review: up to per_side positives
    and negatives for one filter family."""
    positives: list[dict] = []
    negatives: list[dict] = []
    for record, ledger in zip(records, ledgers):
        for verdict in ledger.verdicts:
            if verdict.filter_id is not family:
                continue
            entry = {
                "id": record.id,
                "problem": record.problem,
                "classified": "positive" if verdict_sides(verdict) != "none" else "negative",
                "detail": verdict.detail,
            }
            bucket = positives if entry["classified"] == "positive" else negatives
            if len(bucket) < per_side:
                bucket.append(entry)
    return positives + negatives
