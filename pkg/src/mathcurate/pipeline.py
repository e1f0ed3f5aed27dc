"""Config-driven orchestration: stage plan, checkpointed execution, statistics
reports, and the dataset emitter."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import dedup as dedup_mod
from .clients import CachedModelClient, ReplyCache, parallel_map
from .config import ConfigError, PipelineConfig
from .dedup import EmbeddingVector, SignatureCache, lane_keys, minhash_signature
from .difficulty import SolveProfile, quintile, run_rollouts, score_batch, solvability_filter
from .ingest import (
    RejectSink,
    answer_filter,
    clean_aops,
    clean_omnimath,
    extract_boxed,
    filter_asymptote,
    load_jsonl,
    write_jsonl,
)
from .model_filters import (
    FILTER_KIND_OF,
    classify,
    combine,
    disagreement_report,
    disagreement_tsv,
    supersede,
    verdict_sides,
)
from .records import (
    Decision,
    FilterId,
    FilterVerdict,
    Method,
    ProblemRecord,
    ProvenanceLedger,
    Source,
    Status,
    TYPE_FILTER_FAMILIES,
    append_verdict,
)
from .rules import RULE_DETECTORS, detect_hyperlink, language_gate
from .taxonomy import ONTOLOGIES, classify_domain, domain_report, domain_report_tsv

logger = logging.getLogger(__name__)


class StageFailure(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class Clients:
    model: object
    embedding: object
    language: object


def build_clients(cfg: PipelineConfig) -> Clients:
    if cfg.model.mode == "mock":
        from .mocks import build_mock_embedder, build_mock_language, build_mock_model

        model = build_mock_model(seed=cfg.model.mock_seed or cfg.seed)
        embedding = build_mock_embedder(seed=cfg.seed)
        language = build_mock_language()
    else:
        from .clients import HeuristicLanguageClassifier, HttpEmbeddingClient, HttpModelClient

        model = HttpModelClient(
            endpoint=cfg.model.endpoint,
            model_name=cfg.model.model_name,
            auth_env=cfg.model.auth_env,
            temperature=cfg.model.temperature,
            top_p=cfg.model.top_p,
            retries=cfg.model.retries,
            min_request_interval=cfg.model.min_request_interval,
        )
        embedding = HttpEmbeddingClient(
            endpoint=cfg.model.endpoint, model_name=cfg.model.model_name, auth_env=cfg.model.auth_env
        )
        language = HeuristicLanguageClassifier()
    if cfg.model.cache_dir:
        cache = ReplyCache(Path(cfg.model.cache_dir) / "replies.jsonl")
        model = CachedModelClient(model, cache)
    return Clients(model=model, embedding=embedding, language=language)


@dataclass
class PipelineState:
    records: list[ProblemRecord] = field(default_factory=list)
    ledgers: list[ProvenanceLedger] = field(default_factory=list)
    rejects: list[dict] = field(default_factory=list)

    def active_indices(self) -> list[int]:
        return [i for i, r in enumerate(self.records) if r.status is Status.ACTIVE]

    def apply(self, idx: int, verdict: FilterVerdict, record: ProblemRecord | None = None) -> None:
        if record is not None:
            self.records[idx] = record
        append_verdict(self.ledgers[idx], verdict)
        if self.ledgers[idx].status is Status.DROPPED:
            self.records[idx] = self.records[idx].replace(status=Status.DROPPED)


@dataclass
class RunResult:
    records: list[ProblemRecord]
    ledgers: list[ProvenanceLedger]
    rejects: list[dict]
    reports: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    partial: bool = False


# --- stages -------------------------------------------------------------------


def _stage_source_clean(state: PipelineState, cfg: PipelineConfig, clients: Clients) -> None:
    for idx in state.active_indices():
        record = state.records[idx]
        if record.source is Source.HARP:
            state.apply(idx, filter_asymptote(record))
        elif record.source is Source.OMNI_MATH:
            cleaned, verdict = clean_omnimath(record)
            state.apply(idx, verdict, record=cleaned)
        elif record.source is Source.AOPS_FORUM:
            cleaned = clean_aops(record)
            detail = "cleaned" if cleaned.problem != record.problem else "unchanged"
            verdict = FilterVerdict(FilterId.AOPS_CLEAN, Method.RULE, Decision.KEEP, detail=detail)
            state.apply(idx, verdict, record=cleaned)
        else:
            state.apply(
                idx, FilterVerdict(FilterId.SOURCE_CLEAN, Method.PLUMBING, Decision.KEEP)
            )


def _stage_answer(state: PipelineState, cfg: PipelineConfig, clients: Clients) -> None:
    for idx in state.active_indices():
        record = state.records[idx]
        extraction = extract_boxed(record.solution or "")
        updated, verdict = answer_filter(record, extraction)
        state.apply(idx, verdict, record=updated)


def _stage_exact_dedup(state: PipelineState, cfg: PipelineConfig, clients: Clients) -> None:
    indices = state.active_indices()
    verdicts = dedup_mod.exact_dedup([state.records[i] for i in indices])
    for idx, verdict in zip(indices, verdicts):
        state.apply(idx, verdict)


def _stage_language(state: PipelineState, cfg: PipelineConfig, clients: Clients) -> None:
    for idx in state.active_indices():
        state.apply(idx, language_gate(state.records[idx].problem, clients.language))


def _stage_hyperlink(state: PipelineState, cfg: PipelineConfig, clients: Clients) -> None:
    for idx in state.active_indices():
        match = detect_hyperlink(state.records[idx].problem)
        if match is None:
            verdict = FilterVerdict(FilterId.HYPERLINK, Method.RULE, Decision.KEEP)
        else:
            verdict = FilterVerdict(
                FilterId.HYPERLINK,
                Method.RULE,
                Decision.DROP,
                detail=f"{match.pattern_name} at {match.span[0]}..{match.span[1]}",
            )
        state.apply(idx, verdict)


def _stage_type_filters(state: PipelineState, cfg: PipelineConfig, clients: Clients) -> None:
    indices = state.active_indices()

    def work(idx: int) -> list[FilterVerdict]:
        record = state.records[idx]
        verdicts = []
        for family in TYPE_FILTER_FAMILIES:
            rule = RULE_DETECTORS[family](record)
            outcome = classify(record, FILTER_KIND_OF[family], clients.model)
            verdicts.append(combine(rule, outcome))
        return verdicts

    all_verdicts = parallel_map(work, indices, workers=cfg.model.max_in_flight)
    for idx, verdicts in zip(indices, all_verdicts):
        drops = [v for v in verdicts if v.decision is Decision.DROP]
        if drops:
            primary = drops[0]
            ordered = [
                v if v.decision is not Decision.DROP else supersede(v, primary.filter_id)
                for v in verdicts
                if v is not primary
            ] + [primary]
        else:
            ordered = verdicts
        for verdict in ordered:
            state.apply(idx, verdict)


def _stage_minhash_dedup(state: PipelineState, cfg: PipelineConfig, clients: Clients) -> None:
    cache = None
    if cfg.signature_cache_dir:
        cache = SignatureCache(Path(cfg.signature_cache_dir) / "signatures.jsonl")
    fingerprint = f"{cfg.seed}:{cfg.shingle_size}"
    keys = lane_keys(cfg.seed)

    by_source: dict[str, list[int]] = {}
    for idx in state.active_indices():
        by_source.setdefault(state.records[idx].source.value, []).append(idx)

    verdict_of: dict[int, FilterVerdict] = {}
    for source in sorted(by_source):
        indices = by_source[source]
        subset = [state.records[i] for i in indices]
        signatures = []
        for record in subset:
            lanes = cache.get(record.id, fingerprint) if cache else None
            if lanes is not None:
                signatures.append(dedup_mod.MinHashSignature(lanes, cfg.shingle_size))
                continue
            sig = minhash_signature(record.problem, cfg.shingle_size, keys=keys)
            if cache:
                cache.put(record.id, fingerprint, sig.lanes)
            signatures.append(sig)
        for idx, verdict in zip(indices, dedup_mod.lsh_dedup(subset, signatures, cfg.minhash_threshold(source))):
            verdict_of[idx] = verdict
    for idx in sorted(verdict_of):
        state.apply(idx, verdict_of[idx])


def _stage_semantic_dedup(state: PipelineState, cfg: PipelineConfig, clients: Clients) -> None:
    indices = state.active_indices()
    if not indices:
        return
    raw = clients.embedding.embed([state.records[i].problem for i in indices])
    vectors = [EmbeddingVector.from_raw(v) for v in raw]
    verdicts = dedup_mod.semantic_dedup([state.records[i] for i in indices], vectors, cfg.semantic_threshold)
    for idx, verdict in zip(indices, verdicts):
        state.apply(idx, verdict)


def _load_test_problems(cfg: PipelineConfig) -> list[str]:
    problems = []
    for path in cfg.test_set_paths:
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    problems.append(json.loads(line)["problem"])
    return problems


def _stage_decontaminate(state: PipelineState, cfg: PipelineConfig, clients: Clients) -> None:
    indices = state.active_indices()
    verdicts = dedup_mod.decontaminate([state.records[i] for i in indices], _load_test_problems(cfg))
    for idx, verdict in zip(indices, verdicts):
        state.apply(idx, verdict)


def _stage_solvability(state: PipelineState, cfg: PipelineConfig, clients: Clients) -> None:
    indices = state.active_indices()
    exempt = tuple(cfg.solvability_exempt_sources)

    def work(idx: int) -> SolveProfile | None:
        record = state.records[idx]
        if not record.final_answer:
            return None
        gold = record.final_answer
        small = run_rollouts(record, clients.model, "small", cfg.small_rollouts)
        profile = SolveProfile(
            small_rollouts=small.completed,
            small_correct=score_batch(small, gold, cfg.numeric_answer_equivalence),
            flagged=small.flagged,
        )
        # The large tier only changes the outcome when the small tier failed
        # on a non-exempt record, so spend its budget there alone.
        if profile.small_correct == 0 and record.source.value not in exempt:
            large = run_rollouts(record, clients.model, "large", cfg.large_rollouts)
            profile.large_rollouts = large.completed
            profile.large_correct = score_batch(large, gold, cfg.numeric_answer_equivalence)
            profile.flagged = profile.flagged or large.flagged
        return profile

    profiles = parallel_map(work, indices, workers=cfg.model.max_in_flight)
    for idx, profile in zip(indices, profiles):
        record = state.records[idx]
        if profile is None:
            verdict = FilterVerdict(
                FilterId.SOLVABILITY, Method.MODEL, Decision.FLAG, detail="no final answer to grade"
            )
            state.apply(idx, verdict)
            continue
        entries = {
            "small_rollouts": str(profile.small_rollouts),
            "small_correct": str(profile.small_correct),
        }
        if profile.large_rollouts:
            entries["large_rollouts"] = str(profile.large_rollouts)
            entries["large_correct"] = str(profile.large_correct)
        if profile.solve_rate is not None:
            entries["solve_rate"] = str(profile.solve_rate)
        record = record.with_meta(**entries)
        state.apply(idx, solvability_filter(profile, record, exempt), record=record)


def _stage_quintiles(state: PipelineState, cfg: PipelineConfig, clients: Clients) -> None:
    for idx in state.active_indices():
        record = state.records[idx]
        rate_text = record.meta.get("solve_rate")
        if rate_text is None:
            verdict = FilterVerdict(
                FilterId.DIFFICULTY, Method.PLUMBING, Decision.KEEP, detail="no solve profile"
            )
            state.apply(idx, verdict)
            continue
        rate = float(rate_text)
        bucket = quintile(rate, cfg.quintile_boundaries)
        record = record.with_meta(quintile=str(bucket))
        verdict = FilterVerdict(
            FilterId.DIFFICULTY,
            Method.PLUMBING,
            Decision.KEEP,
            detail=f"solve_rate={rate_text};quintile={bucket}",
        )
        state.apply(idx, verdict, record=record)


def _stage_taxonomy(state: PipelineState, cfg: PipelineConfig, clients: Clients) -> None:
    indices = state.active_indices()

    def work(idx: int) -> list[tuple[str, str, bool]]:
        record = state.records[idx]
        out = []
        for ontology in ONTOLOGIES:
            label, flagged = classify_domain(record, ontology, clients.model)
            out.append((ontology.meta_key(), label, flagged))
        return out

    results = parallel_map(work, indices, workers=cfg.model.max_in_flight)
    for idx, labels in zip(indices, results):
        record = state.records[idx]
        record = record.with_meta(**{key: label for key, label, _ in labels})
        detail = ";".join(
            f"{key.removeprefix('domain_')}={label}" + ("(fallback)" if flagged else "")
            for key, label, flagged in labels
        )
        verdict = FilterVerdict(FilterId.DOMAIN, Method.MODEL, Decision.KEEP, detail=detail)
        state.apply(idx, verdict, record=record)


_STAGE_FNS = {
    "source_clean": _stage_source_clean,
    "answer": _stage_answer,
    "exact_dedup": _stage_exact_dedup,
    "language": _stage_language,
    "hyperlink": _stage_hyperlink,
    "type_filters": _stage_type_filters,
    "minhash_dedup": _stage_minhash_dedup,
    "semantic_dedup": _stage_semantic_dedup,
    "decontaminate": _stage_decontaminate,
    "solvability": _stage_solvability,
    "quintiles": _stage_quintiles,
    "taxonomy": _stage_taxonomy,
}


# --- serialization / checkpoints -------------------------------------------------


def record_to_dict(record: ProblemRecord) -> dict:
    return {
        "id": record.id,
        "source": record.source.value,
        "problem": record.problem,
        "solution": record.solution,
        "final_answer": record.final_answer,
        "status": record.status.value,
        "meta": record.meta,
    }


def record_from_dict(data: dict) -> ProblemRecord:
    return ProblemRecord(
        id=data["id"],
        source=Source(data["source"]),
        problem=data["problem"],
        solution=data.get("solution"),
        final_answer=data.get("final_answer"),
        status=Status(data.get("status", "active")),
        meta=dict(data.get("meta", {})),
    )


def ledger_to_dict(ledger: ProvenanceLedger) -> dict:
    return {
        "record_id": ledger.record_id,
        "verdicts": [
            {
                "filter_id": v.filter_id.value,
                "method": v.method.value,
                "decision": v.decision.value,
                "detail": v.detail,
                "sequence": v.sequence,
            }
            for v in ledger.verdicts
        ],
    }


def ledger_from_dict(data: dict) -> ProvenanceLedger:
    ledger = ProvenanceLedger(record_id=data["record_id"])
    ledger.verdicts = [
        FilterVerdict(
            filter_id=FilterId(v["filter_id"]),
            method=Method(v["method"]),
            decision=Decision(v["decision"]),
            detail=v["detail"],
            sequence=v["sequence"],
        )
        for v in data["verdicts"]
    ]
    return ledger


class Checkpointer:
    """Per-stage JSONL snapshots plus a manifest keyed by config fingerprint."""

    def __init__(self, directory: str | Path, cfg: PipelineConfig):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.cfg_fingerprint = cfg.fingerprint()

    @property
    def manifest_path(self) -> Path:
        return self.dir / "manifest.json"

    def load_manifest(self) -> dict | None:
        if not self.manifest_path.exists():
            return None
        return json.loads(self.manifest_path.read_text(encoding="utf-8"))

    def save_stage(self, stage: str, state: PipelineState) -> None:
        write_jsonl((record_to_dict(r) for r in state.records), self.dir / f"records_{stage}.jsonl")
        write_jsonl((ledger_to_dict(l) for l in state.ledgers), self.dir / f"ledgers_{stage}.jsonl")
        if stage == "ingest":
            write_jsonl(state.rejects, self.dir / "rejects.jsonl")
        manifest = self.load_manifest() or {
            "config_fingerprint": self.cfg_fingerprint,
            "completed": [],
        }
        if manifest["config_fingerprint"] != self.cfg_fingerprint:
            raise ConfigError("checkpoint directory belongs to a different config")
        if stage not in manifest["completed"]:
            manifest["completed"].append(stage)
        self.manifest_path.write_text(
            json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
        )

    def load_stage(self, stage: str) -> PipelineState:
        state = PipelineState()
        with open(self.dir / f"records_{stage}.jsonl", "r", encoding="utf-8") as f:
            state.records = [record_from_dict(json.loads(line)) for line in f if line.strip()]
        with open(self.dir / f"ledgers_{stage}.jsonl", "r", encoding="utf-8") as f:
            state.ledgers = [ledger_from_dict(json.loads(line)) for line in f if line.strip()]
        rejects_path = self.dir / "rejects.jsonl"
        if rejects_path.exists():
            with open(rejects_path, "r", encoding="utf-8") as f:
                state.rejects = [json.loads(line) for line in f if line.strip()]
        return state


# --- reports ---------------------------------------------------------------------

_SINGLE_COLUMNS = (
    FilterId.ASYMPTOTE,
    FilterId.OMNIMATH_CLEAN,
    FilterId.ANSWER,
    FilterId.EXACT_DEDUP,
    FilterId.MINHASH_DEDUP,
    FilterId.SEMANTIC_DEDUP,
    FilterId.DECONTAMINATION,
    FilterId.LANGUAGE,
    FilterId.HYPERLINK,
    FilterId.SOLVABILITY,
)


def stats_report(records: list[ProblemRecord], ledgers: list[ProvenanceLedger]) -> str:
    """Per-source filter-match table as TSV.

    Type-filter families get (R)/(L) sub-columns counting every match by
    side (a record can appear in several columns), single-method filters
    count drops, and the per-source total counts records dropped by at least
    one filter, so column sums generally exceed row totals.
    """
    sources = sorted({r.source.value for r in records})
    header = ["source"]
    for family in TYPE_FILTER_FAMILIES:
        header += [f"{family.value}_R", f"{family.value}_L"]
    header += [f.value for f in _SINGLE_COLUMNS] + ["total_dropped"]

    zero_row = lambda: {column: 0 for column in header[1:]}  # noqa: E731
    table = {source: zero_row() for source in sources}
    totals = zero_row()

    for record, ledger in zip(records, ledgers):
        row = table[record.source.value]
        for verdict in ledger.verdicts:
            if verdict.filter_id in TYPE_FILTER_FAMILIES:
                sides = verdict_sides(verdict)
                if sides in ("rule", "both"):
                    row[f"{verdict.filter_id.value}_R"] += 1
                if sides in ("model", "both"):
                    row[f"{verdict.filter_id.value}_L"] += 1
            elif verdict.filter_id in _SINGLE_COLUMNS and verdict.decision is Decision.DROP:
                row[verdict.filter_id.value] += 1
        if record.status is Status.DROPPED:
            row["total_dropped"] += 1
    for row in table.values():
        for column, value in row.items():
            totals[column] += value

    lines = ["\t".join(header)]
    for source in sources:
        lines.append("\t".join([source] + [str(table[source][c]) for c in header[1:]]))
    lines.append("\t".join(["TOTAL"] + [str(totals[c]) for c in header[1:]]))
    return "\n".join(lines) + "\n"


# --- emit -------------------------------------------------------------------------


def emit_record(record: ProblemRecord) -> dict:
    """Output schema for one active record; absent stats are omitted, never null."""
    obj = {"problem": record.problem, "source": record.source.value}
    if record.final_answer:
        obj["final_answer"] = record.final_answer
    meta = record.meta
    if "solve_rate" in meta:
        obj["solve_rate"] = float(meta["solve_rate"])
    if "quintile" in meta:
        obj["quintile"] = int(meta["quintile"])
    domains = {}
    for ontology in ONTOLOGIES:
        label = meta.get(ontology.meta_key())
        if label is not None:
            domains[ontology.name.lower()] = label
    if domains:
        obj["domains"] = domains
    if "source_id" in meta:
        obj["source_id"] = meta["source_id"]
    return obj


def emit(
    records: list[ProblemRecord],
    ledgers: list[ProvenanceLedger],
    output_dir: str | Path,
    write_quarantine: bool = True,
) -> dict[str, str]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset_path = out / "dataset.jsonl"
    write_jsonl(
        (emit_record(r) for r in records if r.status is Status.ACTIVE), dataset_path
    )
    paths = {"dataset": str(dataset_path)}
    if write_quarantine:
        quarantine_path = out / "quarantine.jsonl"
        rows = []
        for record, ledger in zip(records, ledgers):
            if record.status is not Status.DROPPED:
                continue
            last = ledger.verdicts[-1]
            rows.append(
                {
                    "id": record.id,
                    "source": record.source.value,
                    "problem": record.problem,
                    "dropped_by": last.filter_id.value,
                    "detail": last.detail,
                }
            )
        write_jsonl(rows, quarantine_path)
        paths["quarantine"] = str(quarantine_path)
    return paths


# --- run / resume -------------------------------------------------------------------


def ingest_inputs(cfg: PipelineConfig) -> PipelineState:
    state = PipelineState()
    sink = RejectSink()
    for spec in cfg.inputs:
        for record in load_jsonl(spec["path"], spec["source"], reject_sink=sink):
            state.records.append(record)
            state.ledgers.append(ProvenanceLedger(record_id=record.id))
    state.rejects = sink.entries
    return state


def state_from_records(records: list[ProblemRecord]) -> PipelineState:
    state = PipelineState()
    state.records = list(records)
    state.ledgers = [ProvenanceLedger(record_id=r.id) for r in records]
    return state


def _finalize(
    state: PipelineState, cfg: PipelineConfig, output_dir: str | Path | None
) -> RunResult:
    reports = {
        "stats.tsv": stats_report(state.records, state.ledgers),
        "disagreements.tsv": disagreement_tsv(disagreement_report(state.ledgers)),
    }
    for ontology in ONTOLOGIES:
        rows = domain_report(
            [r for r in state.records if r.status is Status.ACTIVE], ontology
        )
        reports[f"domains_{ontology.name.lower()}.tsv"] = domain_report_tsv(rows)

    active = sum(1 for r in state.records if r.status is Status.ACTIVE)
    dropped = sum(1 for r in state.records if r.status is Status.DROPPED)
    counts = {
        "input": len(state.records) + len(state.rejects),
        "loaded": len(state.records),
        "active": active,
        "quarantined": dropped,
        "rejected": len(state.rejects),
    }
    if counts["input"] != counts["active"] + counts["quarantined"] + counts["rejected"]:
        raise RuntimeError(f"conservation violated: {counts}")

    result = RunResult(
        records=state.records,
        ledgers=state.ledgers,
        rejects=state.rejects,
        reports=reports,
        counts=counts,
    )
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.outputs = emit(state.records, state.ledgers, out, cfg.write_quarantine)
        write_jsonl(state.rejects, out / "rejects.jsonl")
        result.outputs["rejects"] = str(out / "rejects.jsonl")
        write_jsonl((ledger_to_dict(l) for l in state.ledgers), out / "ledgers.jsonl")
        result.outputs["ledgers"] = str(out / "ledgers.jsonl")
        for name, content in reports.items():
            (out / name).write_text(content, encoding="utf-8")
            result.outputs[name] = str(out / name)
        (out / "summary.json").write_text(
            json.dumps(counts, indent=2, sort_keys=True), encoding="utf-8"
        )
        result.outputs["summary"] = str(out / "summary.json")
    return result


def _write_partial_reports(state: PipelineState, output_dir: str | Path | None) -> None:
    if output_dir is None:
        return
    try:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "stats.tsv").write_text(stats_report(state.records, state.ledgers), encoding="utf-8")
        (out / "disagreements.tsv").write_text(
            disagreement_tsv(disagreement_report(state.ledgers)), encoding="utf-8"
        )
    except Exception:  # best effort; the original failure matters more
        logger.exception("failed writing partial reports")


def _execute(
    state: PipelineState,
    cfg: PipelineConfig,
    clients: Clients,
    remaining: list[str],
    checkpointer: Checkpointer | None,
    output_dir: str | Path | None,
    stop_after: str | None,
) -> RunResult:
    for stage in remaining:
        try:
            _STAGE_FNS[stage](state, cfg, clients)
        except Exception as exc:
            _write_partial_reports(state, output_dir)
            raise StageFailure(stage, exc) from exc
        if checkpointer is not None:
            checkpointer.save_stage(stage, state)
        if stop_after == stage:
            return RunResult(
                records=state.records,
                ledgers=state.ledgers,
                rejects=state.rejects,
                partial=True,
            )
    return _finalize(state, cfg, output_dir)


def _enabled_stages(cfg: PipelineConfig) -> list[str]:
    return [s for s in cfg.stages if cfg.stage_enabled(s)]


def run(
    cfg: PipelineConfig,
    records: list[ProblemRecord] | None = None,
    clients: Clients | None = None,
    checkpoint_dir: str | Path | None = None,
    output_dir: str | Path | None = None,
    stop_after: str | None = None,
) -> RunResult:
    """Execute the full stage plan from scratch.

    With mock clients and a fixed seed the entire run is a pure function of
    (config, inputs). `stop_after` ends the run at a stage boundary (used to
    exercise checkpoint resumption).
    """
    cfg.validate()
    clients = clients or build_clients(cfg)
    checkpointer = Checkpointer(checkpoint_dir, cfg) if checkpoint_dir else None
    state = ingest_inputs(cfg) if records is None else state_from_records(records)
    if checkpointer is not None:
        checkpointer.save_stage("ingest", state)
    if stop_after == "ingest":
        return RunResult(state.records, state.ledgers, state.rejects, partial=True)
    return _execute(
        state, cfg, clients, _enabled_stages(cfg), checkpointer, output_dir, stop_after
    )


def resume(
    cfg: PipelineConfig,
    checkpoint_dir: str | Path,
    clients: Clients | None = None,
    output_dir: str | Path | None = None,
) -> RunResult:
    """Continue an interrupted run from its last completed stage boundary."""
    cfg.validate()
    checkpointer = Checkpointer(checkpoint_dir, cfg)
    manifest = checkpointer.load_manifest()
    if manifest is None:
        raise ConfigError(f"no checkpoint manifest in {checkpoint_dir}")
    if manifest["config_fingerprint"] != cfg.fingerprint():
        raise ConfigError("checkpoint was created with a different config")
    completed = [s for s in manifest["completed"]]
    if "ingest" not in completed:
        raise ConfigError("checkpoint has no ingest snapshot")
    stages = _enabled_stages(cfg)
    done = [s for s in stages if s in completed]
    last = done[-1] if done else "ingest"
    state = checkpointer.load_stage(last)
    remaining = stages[stages.index(last) + 1 :] if done else stages
    clients = clients or build_clients(cfg)
    return _execute(state, cfg, clients, remaining, checkpointer, output_dir, None)
