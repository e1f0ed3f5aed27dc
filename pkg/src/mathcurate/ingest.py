"""Corpus loading, source-specific cleaners, and boxed-answer extraction."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .records import (
    Decision,
    FilterId,
    FilterVerdict,
    Method,
    ProblemRecord,
    RecordError,
    Source,
    make_record,
)

OMNIMATH_NO_SOLUTION_SENTINEL = (
    "The problem provided does not contain a solution. "
    "Therefore, no final answer can be extracted."
)

# "final_answer" is accepted as an alias for "answer" so emitted datasets
# re-ingest cleanly; "source" comes from the caller, not the line.
_RESERVED_FIELDS = ("problem", "solution", "answer", "final_answer", "source")

# Omni-MATH cleanup: forum-style italic attributions, parenthesized proposer
# names (a name-shaped phrase at the start or end of the problem), and
# competition-scoring sentences.
_OMNI_ITALIC_ATTRIBUTION = re.compile(r"\[i\].*?\[/i\]", re.DOTALL)
_NAME_PARENS = r"\(\s*(?:[A-Z][a-z]*\.?[ ]+){1,3}[A-Z][A-Za-z'-]+\s*\)"
_OMNI_PROPOSER_PARENS = re.compile(rf"\A\s*{_NAME_PARENS}|{_NAME_PARENS}\s*\Z")
_OMNI_SCORING_SENTENCE = re.compile(
    r"[^.?!\n]*[Ii]f\s+the\s+correct\s+answer\s+is\b[^.?!\n]*(?:and\s+your\s+answer\s+is)[^.?!\n]*[.?!]?"
)

# aops cleanup: attribution phrases, point annotations, trailing year tags.
# The attribution match runs to the end of the sentence or line, skipping
# periods that belong to name initials ("A. Person").
_AOPS_PROPOSED_BY = re.compile(r"(?im)proposed by[^\n]*?(?:(?<![A-Z])\.(?=\s|$)|$)")
_AOPS_POINTS = re.compile(r"\(\s*\d+\s*points?\s*\)")
_AOPS_TRAILING_YEAR = re.compile(r"\s*[\[(]\s*(?:19|20)\d{2}\s*[\])]\s*$")


@dataclass
class RejectSink:
    """Collects malformed input lines; optionally mirrors them to a JSONL file."""

    path: str | Path | None = None
    entries: list[dict] = field(default_factory=list)

    def add(self, line: int, reason: str) -> None:
        entry = {"line": line, "reason": reason}
        self.entries.append(entry)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")

    def __len__(self) -> int:
        return len(self.entries)


def _stringify(value) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, ensure_ascii=False, sort_keys=True)


def load_jsonl(
    path: str | Path,
    source: Source | str,
    reject_sink: RejectSink | None = None,
) -> Iterator[ProblemRecord]:
    """Yield one record per input line, in input order.

    Malformed lines (bad JSON, missing or empty problem) go to the reject sink
    with their 1-based line number; they are never silently skipped. Extra
    fields are preserved into record meta as strings.
    """
    src = Source(source)
    sink = reject_sink if reject_sink is not None else RejectSink()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                sink.add(line_no, f"invalid json: {exc.msg}")
                continue
            if not isinstance(obj, dict) or "problem" not in obj:
                sink.add(line_no, "missing field: problem")
                continue
            try:
                record = make_record(src, obj["problem"], obj.get("solution"))
            except RecordError as exc:
                sink.add(line_no, str(exc))
                continue
            answer = obj.get("answer", obj.get("final_answer"))
            if isinstance(answer, (int, float)):
                answer = _stringify(answer)
            if isinstance(answer, str) and answer.strip():
                record = record.replace(final_answer=answer.strip())
            extras = {k: _stringify(v) for k, v in obj.items() if k not in _RESERVED_FIELDS}
            if extras:
                record = record.with_meta(**extras)
            yield record


def filter_asymptote(record: ProblemRecord) -> FilterVerdict:
    """Drop problems embedding vector-graphics figure code, detected by the
    literal (case-sensitive) "[asy]" tag."""
    offset = record.problem.find("[asy]")
    if offset >= 0:
        return FilterVerdict(
            FilterId.ASYMPTOTE, Method.RULE, Decision.DROP, detail=f"[asy] at offset {offset}"
        )
    return FilterVerdict(FilterId.ASYMPTOTE, Method.RULE, Decision.KEEP)


def _collapse_gaps(text: str) -> str:
    text = re.sub(r"[ \t]{2,}", " ", text)
    text = re.sub(r" ([,.;:!?])", r"\1", text)
    return text.strip()


def clean_omnimath(record: ProblemRecord) -> tuple[ProblemRecord, FilterVerdict]:
    """Strip author attributions and competition-scoring text; drop records
    whose solution is the known no-solution scrape artifact."""
    if record.solution is not None and record.solution.strip() == OMNIMATH_NO_SOLUTION_SENTINEL:
        verdict = FilterVerdict(
            FilterId.OMNIMATH_CLEAN, Method.RULE, Decision.DROP, detail="no-solution sentinel"
        )
        return record, verdict

    cleaned = record.problem
    removed = []
    for name, pattern in (
        ("italic_attribution", _OMNI_ITALIC_ATTRIBUTION),
        ("proposer_parens", _OMNI_PROPOSER_PARENS),
        ("scoring_sentence", _OMNI_SCORING_SENTENCE),
    ):
        cleaned, n = pattern.subn("", cleaned)
        if n:
            removed.append(f"{name}×{n}")
    if removed:
        record = record.replace(problem=_collapse_gaps(cleaned))
    detail = "removed " + ", ".join(removed) if removed else "unchanged"
    return record, FilterVerdict(FilterId.OMNIMATH_CLEAN, Method.RULE, Decision.KEEP, detail=detail)


def clean_aops(record: ProblemRecord) -> ProblemRecord:
    """Strip attribution phrases, point annotations, and trailing year tags
    from forum-scraped problems; text is otherwise untouched."""
    cleaned = record.problem
    cleaned = _AOPS_PROPOSED_BY.sub("", cleaned)
    cleaned = _AOPS_POINTS.sub("", cleaned)
    cleaned = _AOPS_TRAILING_YEAR.sub("", cleaned)
    if cleaned != record.problem:
        return record.replace(problem=_collapse_gaps(cleaned))
    return record


@dataclass(frozen=True)
class BoxedExtraction:
    """All \\boxed{...} contents found in a solution, with their spans.

    Spans index the content region, so reinserting contents at spans
    reproduces the original text byte for byte. Occurrences whose braces
    never balance are listed in `malformed` (offset of the opening tag) and
    contribute no extraction.
    """

    contents: tuple[str, ...] = ()
    spans: tuple[tuple[int, int], ...] = ()
    malformed: tuple[int, ...] = ()


_BOXED_TAG = "\\boxed{"


def extract_boxed(solution: str) -> BoxedExtraction:
    """Scan for \\boxed{ regions and extract their brace-balanced contents.

    Escaped braces (\\{ and \\}) are treated as literal characters, not
    depth changes. Scanning resumes after each region, so extractions are
    non-overlapping and in document order.
    """
    contents: list[str] = []
    spans: list[tuple[int, int]] = []
    malformed: list[int] = []
    pos = 0
    while True:
        start = solution.find(_BOXED_TAG, pos)
        if start < 0:
            break
        content_start = start + len(_BOXED_TAG)
        depth = 1
        i = content_start
        end = -1
        while i < len(solution):
            ch = solution[i]
            if ch == "\\" and i + 1 < len(solution) and solution[i + 1] in "{}\\":
                i += 2
                continue
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    end = i
                    break
            i += 1
        if end < 0:
            malformed.append(start)
            pos = content_start
            continue
        contents.append(solution[content_start:end])
        spans.append((content_start, end))
        pos = end + 1
    return BoxedExtraction(tuple(contents), tuple(spans), tuple(malformed))


def answer_filter(
    record: ProblemRecord, extraction: BoxedExtraction
) -> tuple[ProblemRecord, FilterVerdict]:
    """Keep records with a usable final answer.

    Records arriving with a pre-parsed answer pass through with it. For the
    rest the solution must contain exactly one boxed region, which becomes
    the final answer.
    """
    if record.final_answer:
        verdict = FilterVerdict(FilterId.ANSWER, Method.RULE, Decision.KEEP, detail="pre-parsed answer")
        return record, verdict
    n = len(extraction.contents)
    if n == 1:
        answer = extraction.contents[0].strip()
        if not answer:
            return record, FilterVerdict(
                FilterId.ANSWER, Method.RULE, Decision.DROP, detail="empty boxed answer"
            )
        record = record.replace(final_answer=answer)
        return record, FilterVerdict(FilterId.ANSWER, Method.RULE, Decision.KEEP, detail="boxed answer")
    detail = "no boxed answer" if n == 0 else f"{n} boxed answers"
    if extraction.malformed:
        detail += f" ({len(extraction.malformed)} malformed)"
    return record, FilterVerdict(FilterId.ANSWER, Method.RULE, Decision.DROP, detail=detail)


def write_jsonl(records: Iterable[dict], path: str | Path) -> int:
    """Write dicts as one JSON object per line; returns the line count."""
    count = 0
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for obj in records:
            f.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")
            count += 1
    return count
