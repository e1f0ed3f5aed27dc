"""Rollout-based solvability filtering and difficulty quintiles."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .clients import ModelClient, TransportError
from .ingest import extract_boxed
from .prompts import render_rollout_prompt
from .records import Decision, FilterId, FilterVerdict, Method, ProblemRecord

DEFAULT_QUINTILE_BOUNDARIES = (0.2, 0.4, 0.6, 0.8)

_FRAC = re.compile(r"^\\[dt]?frac\{(-?\d+)\}\{(-?\d+)\}$")
_LEFT_RIGHT = re.compile(r"\\left\b|\\right\b")


@dataclass
class RolloutBatch:
    """Completions for one record and tier; flagged when the endpoint gave out."""

    texts: list[str] = field(default_factory=list)
    flagged: bool = False

    @property
    def completed(self) -> int:
        return len(self.texts)


@dataclass
class SolveProfile:
    """Per-tier rollout outcomes; the solve rate is defined by the small tier."""

    small_rollouts: int = 0
    small_correct: int = 0
    large_rollouts: int = 0
    large_correct: int = 0
    flagged: bool = False

    @property
    def total_correct(self) -> int:
        return self.small_correct + self.large_correct

    @property
    def solve_rate(self) -> float | None:
        if self.small_rollouts == 0:
            return None
        return self.small_correct / self.small_rollouts


def run_rollouts(record: ProblemRecord, client: ModelClient, tier: str, n: int) -> RolloutBatch:
    """Issue n generations with the tier's rollout prompt.

    Individual empty completions stay in the list (they grade as wrong);
    endpoint exhaustion ends the batch early with the flag set, and profiles
    are computed over completed rollouts only.
    """
    if n < 1:
        raise ValueError(f"rollout count must be >= 1, got {n}")
    if not record.final_answer:
        raise ValueError(f"record {record.id} has no final_answer to grade against")
    prompt = render_rollout_prompt(tier, record.problem)
    batch = RolloutBatch()
    for i in range(n):
        try:
            batch.texts.append(client.complete(prompt, key=f"rollout:{tier}:{record.id}:{i}"))
        except TransportError:
            batch.flagged = True
            break
    return batch


def normalize_answer(text: str) -> str:
    """Minimal answer-equality contract: trim, strip outer $ pairs, drop
    \\left/\\right, strip trailing periods, collapse whitespace runs."""
    out = text.strip()
    while len(out) >= 2 and out.startswith("$") and out.endswith("$"):
        out = out[1:-1].strip()
    out = _LEFT_RIGHT.sub("", out)
    out = out.rstrip(".").strip()
    out = re.sub(r"\s+", " ", out)
    return out


def _as_number(text: str) -> Fraction | None:
    m = _FRAC.match(text)
    if m:
        try:
            return Fraction(int(m.group(1)), int(m.group(2)))
        except ZeroDivisionError:
            return None
    try:
        return Fraction(text.replace(",", ""))
    except (ValueError, ZeroDivisionError):
        return None


def grade(solution_text: str, gold: str, numeric_equivalence: bool = False) -> bool:
    """A rollout is correct when its single boxed answer equals the gold
    answer under normalization (optionally exact numeric equivalence)."""
    extraction = extract_boxed(solution_text)
    if len(extraction.contents) != 1:
        return False
    candidate = normalize_answer(extraction.contents[0])
    target = normalize_answer(gold)
    if candidate == target:
        return True
    if numeric_equivalence:
        a, b = _as_number(candidate), _as_number(target)
        if a is not None and b is not None:
            return a == b
    return False


def score_batch(batch: RolloutBatch, gold: str, numeric_equivalence: bool = False) -> int:
    return sum(1 for text in batch.texts if grade(text, gold, numeric_equivalence))


def solvability_filter(
    profile: SolveProfile | None,
    record: ProblemRecord,
    exempt_sources: tuple[str, ...] = (),
) -> FilterVerdict:
    """Keep when any tier solved the problem at least once, or the source
    ships pre-parsed answers (exempt set)."""
    if record.source.value in exempt_sources:
        return FilterVerdict(FilterId.SOLVABILITY, Method.MODEL, Decision.KEEP, detail="exempt source")
    if profile is None:
        raise ValueError(f"no solve profile for non-exempt record {record.id}")
    attempted = profile.small_rollouts + profile.large_rollouts
    if attempted == 0:
        # nothing completed at all: transport trouble must never drop a record
        return FilterVerdict(
            FilterId.SOLVABILITY, Method.MODEL, Decision.FLAG, detail="no completed rollouts"
        )
    if profile.total_correct >= 1:
        detail = f"{profile.total_correct} correct of {attempted}"
        return FilterVerdict(FilterId.SOLVABILITY, Method.MODEL, Decision.KEEP, detail=detail)
    detail = f"0 correct of {attempted}"
    if profile.flagged:
        detail += " (partial)"
    return FilterVerdict(FilterId.SOLVABILITY, Method.MODEL, Decision.DROP, detail=detail)


def quintile(solve_rate: float, boundaries: tuple[float, ...] = DEFAULT_QUINTILE_BOUNDARIES) -> int:
    """Half-open buckets [0,b1) -> 1 ... [b4,1] -> 5; 1 is hardest."""
    if not 0.0 <= solve_rate <= 1.0:
        raise ValueError(f"solve rate out of range: {solve_rate}")
    return 1 + sum(solve_rate >= b for b in boundaries)
