"""Canonical record, verdict, and ledger types shared by every pipeline stage."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from enum import Enum


class Source(str, Enum):
    ORCA_MATH = "orca_math"
    CN_K12 = "cn_k12"
    OLYMPIADS = "olympiads"
    MATH = "math"
    AOPS_FORUM = "aops_forum"
    GSM8K = "gsm8k"
    HARP = "harp"
    OMNI_MATH = "omni_math"
    AMC_AIME = "amc_aime"
    REFORMULATED = "reformulated"


class FilterId(str, Enum):
    # source-specific cleaners
    ASYMPTOTE = "asymptote"
    OMNIMATH_CLEAN = "omnimath_clean"
    AOPS_CLEAN = "aops_clean"
    SOURCE_CLEAN = "source_clean"
    # verifiability
    ANSWER = "answer"
    # deduplication family
    EXACT_DEDUP = "exact_dedup"
    MINHASH_DEDUP = "minhash_dedup"
    SEMANTIC_DEDUP = "semantic_dedup"
    DECONTAMINATION = "decontamination"
    # solvability
    LANGUAGE = "language"
    HYPERLINK = "hyperlink"
    SOLVABILITY = "solvability"
    # open-endedness / question-type filters (dual rule+model)
    MULTIPLE_CHOICE = "multiple_choice"
    TRUE_FALSE = "true_false"
    YES_NO = "yes_no"
    MULTI_PART = "multi_part"
    PROOF = "proof"
    # annotation stages
    DIFFICULTY = "difficulty"
    DOMAIN = "domain"
    # reformulation lifecycle
    REFORMULATION = "reformulation"


class Method(str, Enum):
    RULE = "rule"
    MODEL = "model"
    DEDUP = "dedup"
    PLUMBING = "plumbing"


class Decision(str, Enum):
    KEEP = "keep"
    DROP = "drop"
    FLAG = "flag"


class Status(str, Enum):
    ACTIVE = "active"
    DROPPED = "dropped"


# The five question-type families that run the combined rule+model path.
TYPE_FILTER_FAMILIES = (
    FilterId.MULTIPLE_CHOICE,
    FilterId.TRUE_FALSE,
    FilterId.YES_NO,
    FilterId.MULTI_PART,
    FilterId.PROOF,
)


class RecordError(ValueError):
    """Raised on record construction or ledger contract violations."""


@dataclass(frozen=True)
class ProblemRecord:
    """One question/solution/answer with source tag, metadata, and lifecycle status.

    Records are immutable values; stage edits produce new instances via
    `dataclasses.replace`. The id is assigned at construction and survives
    cleaning so it can serve as a stable join key across resumed runs.
    """

    id: str
    source: Source
    problem: str
    solution: str | None = None
    final_answer: str | None = None
    status: Status = Status.ACTIVE
    meta: dict[str, str] = field(default_factory=dict)

    def replace(self, **changes) -> "ProblemRecord":
        return dataclasses.replace(self, **changes)

    def with_meta(self, **entries: str) -> "ProblemRecord":
        merged = dict(self.meta)
        merged.update(entries)
        return self.replace(meta=merged)


@dataclass(frozen=True)
class FilterVerdict:
    """One stage's keep/drop/flag decision for one record."""

    filter_id: FilterId
    method: Method
    decision: Decision
    detail: str = ""
    sequence: int = -1

    def __post_init__(self):
        if self.decision is Decision.DROP and not self.detail:
            raise RecordError("drop verdict requires a non-empty detail")


@dataclass
class ProvenanceLedger:
    """Append-only audit trail of every stage's decision for one record."""

    record_id: str
    verdicts: list[FilterVerdict] = field(default_factory=list)

    @property
    def status(self) -> Status:
        if self.verdicts and self.verdicts[-1].decision is Decision.DROP:
            return Status.DROPPED
        return Status.ACTIVE

    def replay_status(self) -> Status:
        """Status reconstructed from the full verdict history."""
        for v in self.verdicts:
            if v.decision is Decision.DROP:
                return Status.DROPPED
        return Status.ACTIVE


def record_id(source: Source, problem: str, solution: str | None) -> str:
    """Content hash of (source, problem, solution), stable across runs."""
    h = hashlib.sha256()
    h.update(source.value.encode("utf-8"))
    h.update(b"\x1f")
    h.update(problem.encode("utf-8"))
    h.update(b"\x1f")
    h.update((solution or "").encode("utf-8"))
    return h.hexdigest()


def make_record(source: Source | str, problem: str, solution: str | None = None) -> ProblemRecord:
    """Build an active record with a deterministic content id.

    Raises RecordError on an empty problem, naming the offending source.
    """
    src = Source(source)
    if not problem or not problem.strip():
        raise RecordError(f"empty problem (source={src.value})")
    if solution is not None and not solution.strip():
        solution = None
    return ProblemRecord(id=record_id(src, problem, solution), source=src, problem=problem, solution=solution)


def append_verdict(ledger: ProvenanceLedger, verdict: FilterVerdict) -> ProvenanceLedger:
    """Extend a ledger by one verdict, enforcing the append-only contract.

    A verdict with sequence < 0 is assigned the next stage index; explicit
    sequences must be strictly increasing. Appending after a drop is an error.
    """
    if ledger.verdicts and ledger.verdicts[-1].decision is Decision.DROP:
        raise RecordError(f"record already dropped: {ledger.record_id}")
    last_seq = ledger.verdicts[-1].sequence if ledger.verdicts else -1
    if verdict.sequence < 0:
        verdict = dataclasses.replace(verdict, sequence=last_seq + 1)
    elif verdict.sequence <= last_seq:
        raise RecordError(
            f"sequence must be strictly increasing (got {verdict.sequence} after {last_seq})"
        )
    ledger.verdicts.append(verdict)
    return ledger
