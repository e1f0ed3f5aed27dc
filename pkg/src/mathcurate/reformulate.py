"""Four-stage multiple-choice to open-ended reformulation with post-filtering.

Stages run in order (extract -> reformulate -> judge -> verify -> rollouts);
a rejection at any stage is terminal and statuses only move forward.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .clients import ModelClient
from .difficulty import run_rollouts, score_batch
from .prompts import render_judge_prompt, render_reformulation_prompt
from .records import ProblemRecord, Source, make_record
from .rules import detect_multiple_choice

NOT_APPLICABLE = "N/A"

KEY_INFO_FIELDS = (
    "core_mathematical_concept",
    "key_information_extraction",
    "problem_structure_analysis",
    "multiple_choice_removal_strategy",
    "rephrasing_approach",
    "problem_integrity_preservation",
    "answer_format_specification",
    "is_multiple_choice",
)

_SENTINEL_PREFIXES = ("n/a", "not applicable", "not needed", "no modifications", "none")


class ReformulationError(RuntimeError):
    pass


class ArtifactStatus(str, Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"
    REJECTED_JUDGE = "rejected_judge"
    REJECTED_VERIFY = "rejected_verify"
    REJECTED_ROLLOUT = "rejected_rollout"


@dataclass(frozen=True)
class KeyInfo:
    core_mathematical_concept: str
    key_information_extraction: list | str
    problem_structure_analysis: str
    multiple_choice_removal_strategy: list | str
    rephrasing_approach: list | str
    problem_integrity_preservation: list | str
    answer_format_specification: list | str
    is_multiple_choice: bool

    @classmethod
    def from_dict(cls, data: dict) -> "KeyInfo":
        missing = [key for key in KEY_INFO_FIELDS if key not in data]
        if missing:
            raise ReformulationError(f"key info missing fields: {missing}")
        values = {key: data[key] for key in KEY_INFO_FIELDS}
        flag = values["is_multiple_choice"]
        if isinstance(flag, str):
            flag = flag.strip().lower() in ("true", "yes", "1")
        values["is_multiple_choice"] = bool(flag)
        return cls(**values)

    def to_dict(self) -> dict:
        return {key: getattr(self, key) for key in KEY_INFO_FIELDS}


def is_sentinel(value) -> bool:
    if isinstance(value, str):
        return value.strip().lower().startswith(_SENTINEL_PREFIXES) or not value.strip()
    if isinstance(value, list):
        return not value
    return value is None


@dataclass
class ReformulationArtifact:
    source_id: str
    original_problem: str
    final_answer: str
    key_info: KeyInfo | None = None
    reformulated: str = ""
    judgement_decision: str = ""
    judgement_rationale: str = ""
    verified: bool = False
    status: ArtifactStatus = ArtifactStatus.PENDING
    note: str = ""
    manual_review: bool = False
    small_rollouts: int = 0
    small_correct: int = 0
    large_rollouts: int = 0
    large_correct: int = 0
    rollout_flagged: bool = False

    def to_dict(self) -> dict:
        out = {
            "source_id": self.source_id,
            "original_problem": self.original_problem,
            "final_answer": self.final_answer,
            "key_info": self.key_info.to_dict() if self.key_info else None,
            "reformulated": self.reformulated,
            "judgement_decision": self.judgement_decision,
            "judgement_rationale": self.judgement_rationale,
            "verified": self.verified,
            "status": self.status.value,
            "note": self.note,
            "manual_review": self.manual_review,
            "small_rollouts": self.small_rollouts,
            "small_correct": self.small_correct,
            "large_rollouts": self.large_rollouts,
            "large_correct": self.large_correct,
            "rollout_flagged": self.rollout_flagged,
        }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ReformulationArtifact":
        art = cls(
            source_id=data["source_id"],
            original_problem=data["original_problem"],
            final_answer=data["final_answer"],
        )
        if data.get("key_info"):
            art.key_info = KeyInfo.from_dict(data["key_info"])
        art.reformulated = data.get("reformulated", "")
        art.judgement_decision = data.get("judgement_decision", "")
        art.judgement_rationale = data.get("judgement_rationale", "")
        art.verified = data.get("verified", False)
        art.status = ArtifactStatus(data.get("status", "pending"))
        art.note = data.get("note", "")
        art.manual_review = data.get("manual_review", False)
        for key in ("small_rollouts", "small_correct", "large_rollouts", "large_correct"):
            setattr(art, key, data.get(key, 0))
        art.rollout_flagged = data.get("rollout_flagged", False)
        return art


# --- transcript parsing -------------------------------------------------------

_PROCESS_BLOCK = re.compile(
    r"<reformulation_process>(.*?)</reformulation_process>", re.DOTALL
)
_REFORMULATED_BLOCK = re.compile(
    r"<reformulated_problem>(.*?)</reformulated_problem>", re.DOTALL
)
_TRAILING_COMMA = re.compile(r",(\s*[}\]])")


def _parse_json_block(block: str) -> dict | None:
    block = block.strip()
    start, end = block.find("{"), block.rfind("}")
    if start < 0 or end <= start:
        return None
    candidate = _TRAILING_COMMA.sub(r"\1", block[start : end + 1])
    try:
        data = json.loads(candidate)
    except json.JSONDecodeError:
        return None
    return data if isinstance(data, dict) else None


def _parse_labeled_sections(text: str) -> dict | None:
    """Fallback for replies that list the fields as labeled sections instead
    of one JSON object."""
    positions = []
    for key in KEY_INFO_FIELDS:
        m = re.search(rf"[\"'*]*{key}[\"'*]*\s*:", text)
        if m is None:
            return None
        positions.append((m.start(), m.end(), key))
    positions.sort()
    data = {}
    for (start, end, key), nxt in zip(positions, positions[1:] + [(len(text), None, None)]):
        fragment = text[end : nxt[0]].strip().rstrip(",").strip()
        parsed = _parse_fragment(fragment)
        data[key] = parsed
    return data


def _parse_fragment(fragment: str):
    try:
        return json.loads(_TRAILING_COMMA.sub(r"\1", fragment))
    except json.JSONDecodeError:
        return fragment.strip().strip('"')


def parse_key_info(reply: str) -> KeyInfo:
    """Extract the structured key-information block from a model transcript."""
    m = _PROCESS_BLOCK.search(reply)
    body = m.group(1) if m else reply
    data = _parse_json_block(body)
    if data is None:
        data = _parse_labeled_sections(body)
    if data is None:
        raise ReformulationError("no parseable key-information block in reply")
    return KeyInfo.from_dict(data)


def parse_reformulated(reply: str) -> str:
    m = _REFORMULATED_BLOCK.search(reply)
    if m is not None:
        return m.group(1).strip()
    if reply.strip() == NOT_APPLICABLE:
        return NOT_APPLICABLE
    raise ReformulationError("no reformulated-problem block in reply")


# --- stages ---------------------------------------------------------------------


def _transcript(record: ProblemRecord, client: ModelClient, attempt: int = 0) -> str:
    prompt = render_reformulation_prompt(record.problem)
    key = f"reformulate:{record.id}" + (f":retry{attempt}" if attempt else "")
    return client.complete(prompt, key=key)


def stage_extract(record: ProblemRecord, client: ModelClient) -> KeyInfo:
    """Parse the key-information dictionary, retrying the call once on an
    unparseable or incomplete block."""
    last_error: ReformulationError | None = None
    for attempt in range(2):
        reply = _transcript(record, client, attempt)
        try:
            return parse_key_info(reply)
        except ReformulationError as exc:
            last_error = exc
    raise ReformulationError(f"key information unparseable after retry: {last_error}")


def stage_reformulate(record: ProblemRecord, key_info: KeyInfo, client: ModelClient) -> str:
    """Return the reformulated problem text, or "N/A" (without a model call)
    for problems that turned out not to be multiple choice."""
    if not key_info.is_multiple_choice:
        return NOT_APPLICABLE
    last_error: ReformulationError | None = None
    for attempt in range(2):
        reply = _transcript(record, client, attempt)
        try:
            text = parse_reformulated(reply)
        except ReformulationError as exc:
            last_error = exc
            continue
        if text == NOT_APPLICABLE:
            raise ReformulationError("model returned N/A for a multiple-choice problem")
        if not text:
            raise ReformulationError("empty reformulation")
        if text.strip() == record.problem.strip():
            raise ReformulationError("reformulation identical to source")
        return text
    raise ReformulationError(f"reformulated problem unparseable after retry: {last_error}")


_VERDICT_LINE = re.compile(r"(?im)^\s*(?:final\s+)?verdict\s*:\s*(accept|reject)\b")
_REJECT_CUES = (
    "still implies",
    "disguised multiple choice",
    "is flawed",
    "fails to",
    "does not stand alone",
    "cannot stand alone",
    "information distortion was found",
    "becomes unbounded",
    "reject",
)
_ACCEPT_CUES = (
    "well-posed",
    "mathematically sound",
    "meets all the criteria",
    "reformulation succeeded",
    "no issues",
    "accept",
)


def parse_judgement(reply: str) -> str:
    """accept / reject / flag, tolerating free-text evaluations."""
    m = _VERDICT_LINE.search(reply)
    if m:
        return m.group(1).lower()
    tokens = re.findall(r"[a-z]+", reply.lower())
    if tokens and tokens[0] in ("accept", "reject"):
        return tokens[0]
    lowered = reply.lower()
    if any(cue in lowered for cue in _REJECT_CUES):
        return "reject"
    if any(cue in lowered for cue in _ACCEPT_CUES):
        return "accept"
    return "flag"


def stage_judge(original: str, reformulated: str, client: ModelClient) -> tuple[str, str]:
    """Critical evaluation of the reformulation; unparseable verdicts flag
    for the manual-review queue instead of auto-deciding."""
    prompt = render_judge_prompt(original, reformulated)
    key_digest = hashlib.blake2b(
        (original + "\x1f" + reformulated).encode("utf-8"), digest_size=8
    ).hexdigest()
    reply = client.complete(prompt, key=f"judge:{key_digest}")
    return parse_judgement(reply), reply


def stage_verify(artifact: ReformulationArtifact) -> bool:
    """Deterministic final checks, no model call: complete key info, a real
    answer-format specification, no lingering option labels, and an answer."""
    if artifact.key_info is None:
        return False
    if is_sentinel(artifact.key_info.answer_format_specification):
        return False
    if artifact.reformulated in ("", NOT_APPLICABLE):
        return False
    if detect_multiple_choice(artifact.reformulated) is not None:
        return False
    if not artifact.final_answer.strip():
        return False
    return True


def rollout_post_filter(
    artifact: ReformulationArtifact,
    client: ModelClient,
    small_n: int = 8,
    large_n: int = 3,
    numeric_equivalence: bool = False,
) -> ArtifactStatus:
    """Accept a verified artifact iff some rollout solved it but the small
    tier did not solve it every time; thresholds use completed counts."""
    probe = ProblemRecord(
        id=f"reformulated:{artifact.source_id}",
        source=Source.REFORMULATED,
        problem=artifact.reformulated,
        final_answer=artifact.final_answer,
    )
    small = run_rollouts(probe, client, "small", small_n)
    large = run_rollouts(probe, client, "large", large_n)
    artifact.small_rollouts = small.completed
    artifact.small_correct = score_batch(small, artifact.final_answer, numeric_equivalence)
    artifact.large_rollouts = large.completed
    artifact.large_correct = score_batch(large, artifact.final_answer, numeric_equivalence)
    artifact.rollout_flagged = small.flagged or large.flagged
    solved_once = artifact.small_correct + artifact.large_correct >= 1
    saturated = artifact.small_rollouts > 0 and artifact.small_correct == artifact.small_rollouts
    artifact.status = (
        ArtifactStatus.ACCEPTED if solved_once and not saturated else ArtifactStatus.REJECTED_ROLLOUT
    )
    return artifact.status


# --- driver ---------------------------------------------------------------------


def reformulate_record(
    record: ProblemRecord,
    client: ModelClient,
    small_n: int = 8,
    large_n: int = 3,
    numeric_equivalence: bool = False,
) -> ReformulationArtifact:
    """Run the full protocol for one multiple-choice-flagged record."""
    artifact = ReformulationArtifact(
        source_id=record.id,
        original_problem=record.problem,
        final_answer=(record.final_answer or "").strip(),
    )
    try:
        artifact.key_info = stage_extract(record, client)
    except ReformulationError as exc:
        artifact.status = ArtifactStatus.REJECTED_VERIFY
        artifact.note = str(exc)
        return artifact

    try:
        artifact.reformulated = stage_reformulate(record, artifact.key_info, client)
    except ReformulationError as exc:
        artifact.status = ArtifactStatus.REJECTED_VERIFY
        artifact.note = str(exc)
        return artifact
    if artifact.reformulated == NOT_APPLICABLE:
        artifact.status = ArtifactStatus.REJECTED_VERIFY
        artifact.note = "not multiple choice"
        return artifact

    decision, rationale = stage_judge(record.problem, artifact.reformulated, client)
    artifact.judgement_decision = decision
    artifact.judgement_rationale = rationale
    if decision == "flag":
        artifact.manual_review = True
        artifact.status = ArtifactStatus.REJECTED_JUDGE
        artifact.note = "judge verdict unparseable; queued for manual review"
        return artifact
    if decision == "reject":
        artifact.status = ArtifactStatus.REJECTED_JUDGE
        return artifact

    artifact.verified = stage_verify(artifact)
    if not artifact.verified:
        artifact.status = ArtifactStatus.REJECTED_VERIFY
        artifact.note = "verification checks failed"
        return artifact

    rollout_post_filter(artifact, client, small_n, large_n, numeric_equivalence)
    return artifact


def make_reformulated_record(artifact: ReformulationArtifact) -> ProblemRecord:
    """Fresh record for an accepted artifact; meta keeps the source lineage."""
    if artifact.status is not ArtifactStatus.ACCEPTED:
        raise ValueError("only accepted artifacts become records")
    record = make_record(Source.REFORMULATED, artifact.reformulated)
    record = record.replace(final_answer=artifact.final_answer)
    return record.with_meta(source_id=artifact.source_id)


def write_artifacts(artifacts: Iterable[ReformulationArtifact], path) -> int:
    from .ingest import write_jsonl

    return write_jsonl((a.to_dict() for a in artifacts), path)


def manual_review_queue(artifacts: Iterable[ReformulationArtifact]) -> list[ReformulationArtifact]:
    return [a for a in artifacts if a.manual_review]
