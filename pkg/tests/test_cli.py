import json
from pathlib import Path

from click.testing import CliRunner

from corpus_factory import make_corpus
from mathcurate.cli import main


def write_config(tmp_path, built, extra="") -> Path:
    inputs = ", ".join(
        "{path = %s, source = %s}" % (json.dumps(spec["path"]), json.dumps(spec["source"]))
        for spec in built["inputs"]
    )
    text = f"""
seed = 5
small_rollouts = 4
large_rollouts = 2
inputs = [{inputs}]
test_set_paths = [{json.dumps(built["test_set"])}]
{extra}
[model]
mode = "mock"
"""
    path = tmp_path / "pipeline.toml"
    path.write_text(text, encoding="utf-8")
    return path


def test_validate_config_ok(tmp_path):
    built = make_corpus(50, seed=2, out_dir=tmp_path / "corpus")
    config = write_config(tmp_path, built)
    result = CliRunner().invoke(main, ["validate-config", str(config)])
    assert result.exit_code == 0
    assert "config ok" in result.output


def test_validate_config_error_exit_2(tmp_path):
    config = tmp_path / "bad.toml"
    config.write_text("semantic_threshold = 2.0\n", encoding="utf-8")
    result = CliRunner().invoke(main, ["validate-config", str(config)])
    assert result.exit_code == 2
    assert "config error" in result.output


def test_run_and_report(tmp_path):
    built = make_corpus(120, seed=4, out_dir=tmp_path / "corpus")
    config = write_config(tmp_path, built)
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "run",
            str(config),
            "--output-dir",
            str(tmp_path / "out"),
            "--checkpoint-dir",
            str(tmp_path / "ck"),
        ],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "out" / "dataset.jsonl").exists()
    assert (tmp_path / "out" / "stats.tsv").exists()

    report = runner.invoke(
        main,
        [
            "report",
            str(config),
            "--checkpoint-dir",
            str(tmp_path / "ck"),
            "--output-dir",
            str(tmp_path / "reports"),
        ],
    )
    assert report.exit_code == 0, report.output
    assert (tmp_path / "reports" / "stats.tsv").exists()
    assert (tmp_path / "reports" / "domains_omni.tsv").exists()

    sampled = runner.invoke(
        main,
        [
            "report",
            str(config),
            "--checkpoint-dir",
            str(tmp_path / "ck"),
            "--output-dir",
            str(tmp_path / "reports"),
            "--sample-family",
            "multi_part",
            "--sample-count",
            "5",
        ],
    )
    assert sampled.exit_code == 0, sampled.output
    assert (tmp_path / "reports" / "labeled_samples_multi_part.jsonl").exists()


def test_run_stop_after_then_resume(tmp_path):
    built = make_corpus(100, seed=6, out_dir=tmp_path / "corpus")
    config = write_config(tmp_path, built)
    runner = CliRunner()
    first = runner.invoke(
        main,
        [
            "run",
            str(config),
            "--output-dir",
            str(tmp_path / "out"),
            "--checkpoint-dir",
            str(tmp_path / "ck"),
            "--stop-after",
            "exact_dedup",
        ],
    )
    assert first.exit_code == 0, first.output
    assert "resume to continue" in first.output
    second = runner.invoke(
        main,
        [
            "resume",
            str(config),
            "--checkpoint-dir",
            str(tmp_path / "ck"),
            "--output-dir",
            str(tmp_path / "out"),
        ],
    )
    assert second.exit_code == 0, second.output
    assert (tmp_path / "out" / "dataset.jsonl").exists()


def test_stage_failure_exit_3(tmp_path):
    built = make_corpus(60, seed=7, out_dir=tmp_path / "corpus")
    built["test_set"] = str(tmp_path / "does_not_exist.jsonl")
    config = write_config(tmp_path, built)
    result = CliRunner().invoke(
        main, ["run", str(config), "--output-dir", str(tmp_path / "out")]
    )
    assert result.exit_code == 3
    assert "decontaminate" in result.output


def test_patterns_catalog_dump():
    result = CliRunner().invoke(main, ["patterns"])
    assert result.exit_code == 0
    catalog = json.loads(result.output)
    assert "multiple_choice" in catalog
    assert "prove_that" in catalog["proof"]


def test_reformulate_command(tmp_path):
    rows = [
        {"problem": "What is 2+2? (A) 3 (B) 4 (C) 5 (D) 6", "answer": "4"},
        {"problem": "Compute the square of 5.", "answer": "25"},
    ]
    data = tmp_path / "mc.jsonl"
    data.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    config = tmp_path / "pipeline.toml"
    config.write_text('[model]\nmode = "mock"\n', encoding="utf-8")
    result = CliRunner().invoke(
        main,
        [
            "reformulate",
            str(config),
            "--input",
            str(data),
            "--output-dir",
            str(tmp_path / "reform"),
        ],
    )
    assert result.exit_code == 0, result.output
    artifacts = [
        json.loads(line)
        for line in (tmp_path / "reform" / "artifacts.jsonl").read_text().splitlines()
    ]
    assert len(artifacts) >= 1
    assert (tmp_path / "reform" / "reformulated.jsonl").exists()
    assert (tmp_path / "reform" / "manual_review.jsonl").exists()


def test_reformulated_output_reenters_pipeline(tmp_path):
    """Accepted reformulations feed back through the full filter chain."""
    rows = [
        {"problem": "How many primes divide 30? (A) 1 (B) 2 (C) 3 (D) 4", "answer": "3"},
        {"problem": "What is 10-3? (A) 6 (B) 7 (C) 8 (D) 9", "answer": "7"},
    ]
    data = tmp_path / "mc.jsonl"
    data.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    config = tmp_path / "pipeline.toml"
    config.write_text(
        'small_rollouts = 4\nlarge_rollouts = 2\n[model]\nmode = "mock"\n', encoding="utf-8"
    )
    runner = CliRunner()
    first = runner.invoke(
        main,
        ["reformulate", str(config), "--input", str(data), "--output-dir", str(tmp_path / "reform")],
    )
    assert first.exit_code == 0, first.output
    reformulated = tmp_path / "reform" / "reformulated.jsonl"
    lines = [l for l in reformulated.read_text().splitlines() if l.strip()]
    if not lines:  # mock rollouts may reject every candidate; nothing to re-run
        return
    rerun_config = tmp_path / "rerun.toml"
    rerun_config.write_text(
        "small_rollouts = 4\nlarge_rollouts = 2\n"
        f'inputs = [{{path = {json.dumps(str(reformulated))}, source = "reformulated"}}]\n'
        '[model]\nmode = "mock"\n',
        encoding="utf-8",
    )
    second = runner.invoke(
        main, ["run", str(rerun_config), "--output-dir", str(tmp_path / "out2")]
    )
    assert second.exit_code == 0, second.output
    emitted = [
        json.loads(l)
        for l in (tmp_path / "out2" / "dataset.jsonl").read_text().splitlines()
        if l.strip()
    ]
    for row in emitted:
        assert row["source"] == "reformulated"
        assert "source_id" in row
