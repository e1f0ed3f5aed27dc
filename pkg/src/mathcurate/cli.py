"""Command-line surface: run / resume / report / reformulate / validate-config.

Exit codes: 0 success, 2 config error, 3 stage failure.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .config import ConfigError, load_config
from .ingest import load_jsonl, write_jsonl
from .model_filters import FILTER_KIND_OF, classify, combine
from .pipeline import (
    Checkpointer,
    StageFailure,
    build_clients,
    disagreement_report,
    disagreement_tsv,
    resume as resume_run,
    run as run_pipeline,
    stats_report,
)
from .records import Decision, FilterId
from .reformulate import make_reformulated_record, reformulate_record
from .rules import detect_multiple_choice

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_STAGE = 3


def _load_config_or_exit(path: str):
    try:
        return load_config(path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _apply_overrides(cfg, seed, output_dir):
    if seed is not None:
        cfg.seed = seed
    if output_dir is not None:
        cfg.output_dir = output_dir
    return cfg


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )


@main.command("validate-config")
@click.argument("config_path", type=click.Path(exists=True))
def validate_config_cmd(config_path):
    """Schema-validate a config file."""
    _load_config_or_exit(config_path)
    click.echo("config ok")


@main.command("run")
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--output-dir", default=None, help="Override the configured output directory.")
@click.option("--checkpoint-dir", default=None, help="Write per-stage snapshots here.")
@click.option("--seed", type=int, default=None, help="Override the configured seed.")
@click.option("--stop-after", default=None, help="Stop at a stage boundary (for testing resume).")
def run_cmd(config_path, output_dir, checkpoint_dir, seed, stop_after):
    """Execute the full pipeline over the configured inputs."""
    cfg = _apply_overrides(_load_config_or_exit(config_path), seed, output_dir)
    try:
        result = run_pipeline(
            cfg,
            checkpoint_dir=checkpoint_dir,
            output_dir=cfg.output_dir,
            stop_after=stop_after,
        )
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except StageFailure as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_STAGE)
    if result.partial:
        click.echo(f"stopped after stage '{stop_after}'; resume to continue")
        return
    for key, value in sorted(result.counts.items()):
        click.echo(f"{key}: {value}")


@main.command("resume")
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--checkpoint-dir", required=True)
@click.option("--output-dir", default=None)
def resume_cmd(config_path, checkpoint_dir, output_dir):
    """Continue an interrupted run from its last checkpoint."""
    cfg = _apply_overrides(_load_config_or_exit(config_path), None, output_dir)
    try:
        result = resume_run(cfg, checkpoint_dir, output_dir=cfg.output_dir)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except StageFailure as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_STAGE)
    for key, value in sorted(result.counts.items()):
        click.echo(f"{key}: {value}")


@main.command("report")
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--checkpoint-dir", required=True)
@click.option("--output-dir", required=True)
@click.option(
    "--sample-family",
    default=None,
    type=click.Choice(["multiple_choice", "true_false", "yes_no", "multi_part", "proof"]),
    help="Also export classified samples of this filter family for manual review.",
)
@click.option("--sample-count", default=100, show_default=True, help="Samples per side.")
def report_cmd(config_path, checkpoint_dir, output_dir, sample_family, sample_count):
    """Regenerate statistics reports from the latest checkpoint."""
    from .model_filters import sample_labeled
    from .records import Status
    from .taxonomy import ONTOLOGIES, domain_report, domain_report_tsv

    cfg = _load_config_or_exit(config_path)
    checkpointer = Checkpointer(checkpoint_dir, cfg)
    manifest = checkpointer.load_manifest()
    if manifest is None or not manifest.get("completed"):
        click.echo("no completed stages in checkpoint", err=True)
        sys.exit(EXIT_CONFIG)
    state = checkpointer.load_stage(manifest["completed"][-1])
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "stats.tsv").write_text(stats_report(state.records, state.ledgers), encoding="utf-8")
    (out / "disagreements.tsv").write_text(
        disagreement_tsv(disagreement_report(state.ledgers)), encoding="utf-8"
    )
    active = [r for r in state.records if r.status is Status.ACTIVE]
    for ontology in ONTOLOGIES:
        rows = domain_report(active, ontology)
        (out / f"domains_{ontology.name.lower()}.tsv").write_text(
            domain_report_tsv(rows), encoding="utf-8"
        )
    if sample_family is not None:
        rows = sample_labeled(
            state.records, state.ledgers, FilterId(sample_family), per_side=sample_count
        )
        write_jsonl(rows, out / f"labeled_samples_{sample_family}.jsonl")
    click.echo(f"reports written to {out}")


@main.command("patterns")
def patterns_cmd():
    """Dump the rule-filter pattern catalog (filter -> pattern -> expression)."""
    import json as json_mod

    from .rules import pattern_catalog

    click.echo(json_mod.dumps(pattern_catalog(), indent=2, sort_keys=True))


@main.command("reformulate")
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--source", default="cn_k12", help="Source tag for the input records.")
@click.option("--output-dir", required=True)
@click.option(
    "--all-records/--flagged-only",
    default=False,
    help="Reformulate every record instead of only those the multiple-choice filter flags.",
)
def reformulate_cmd(config_path, input_path, source, output_dir, all_records):
    """Run the multiple-choice reformulation protocol over a JSONL corpus."""
    cfg = _load_config_or_exit(config_path)
    clients = build_clients(cfg)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    records = list(load_jsonl(input_path, source))
    selected = []
    for record in records:
        if all_records:
            selected.append(record)
            continue
        rule = detect_multiple_choice(record.problem)
        outcome = classify(record, FILTER_KIND_OF[FilterId.MULTIPLE_CHOICE], clients.model)
        if combine(rule, outcome).decision is Decision.DROP:
            selected.append(record)

    artifacts = [
        reformulate_record(
            record,
            clients.model,
            small_n=cfg.reformulation_small_rollouts,
            large_n=cfg.reformulation_large_rollouts,
            numeric_equivalence=cfg.numeric_answer_equivalence,
        )
        for record in selected
    ]
    write_jsonl((a.to_dict() for a in artifacts), out / "artifacts.jsonl")
    write_jsonl(
        (a.to_dict() for a in artifacts if a.manual_review), out / "manual_review.jsonl"
    )
    accepted = [a for a in artifacts if a.status.value == "accepted"]
    rows = []
    for artifact in accepted:
        record = make_reformulated_record(artifact)
        rows.append(
            {
                "problem": record.problem,
                "final_answer": record.final_answer,
                "source": record.source.value,
                "source_id": record.meta["source_id"],
            }
        )
    write_jsonl(rows, out / "reformulated.jsonl")
    click.echo(
        f"candidates: {len(selected)}; accepted: {len(accepted)}; "
        f"manual review: {sum(1 for a in artifacts if a.manual_review)}"
    )


if __name__ == "__main__":
    main()
