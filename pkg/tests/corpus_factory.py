"""Synthetic corpus generator for end-to-end pipeline tests.

Plants every phenomenon the stages act on: whitespace duplicates, lexical
near-duplicates, figure markup, attributions, missing/multiple boxed answers,
question-type positives, hyperlinks, non-English text, and test-set
contamination. Deterministic for a given seed.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

WORDS = (
    "integer triangle sequence prime ratio angle polynomial circle sum product "
    "digit fraction square root measure area length modulo divisor lattice grid "
    "median average speed distance time count probability arrangement path vertex"
).split()


def _sentence(rng: random.Random, n: int) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(n))


def make_corpus(n: int, seed: int, out_dir: Path) -> dict:
    """Write per-source JSONL inputs plus a held-out test set; returns paths
    and planted-count bookkeeping."""
    rng = random.Random(seed)
    rows_by_source: dict[str, list[dict]] = {
        "cn_k12": [],
        "olympiads": [],
        "orca_math": [],
        "harp": [],
        "omni_math": [],
        "aops_forum": [],
    }
    test_problems: list[str] = []
    planted = {"duplicates": 0, "near_duplicates": 0, "contaminated": 0, "malformed": 0}

    for i in range(n):
        digit = rng.randrange(10)
        flavor = rng.random()
        problem = (
            f"Problem {i}: given {_sentence(rng, 10)}, find the value of the target quantity "
            f"for case {i}."
        )
        solution = f"We compute step by step and conclude \\boxed{{{digit}}}."
        row = {"problem": problem, "solution": solution}

        if flavor < 0.04:  # whitespace duplicate of itself, appended later
            dup = {"problem": problem.replace(" ", "  "), "solution": solution}
            rows_by_source["cn_k12"].append(row)
            rows_by_source["cn_k12"].append(dup)
            planted["duplicates"] += 1
            continue
        if flavor < 0.08:  # lexical near-duplicate pair (same subset)
            words = problem.split()
            words[-1] = "variant."
            near = {"problem": " ".join(words), "solution": solution}
            rows_by_source["olympiads"].append(row)
            rows_by_source["olympiads"].append(near)
            planted["near_duplicates"] += 1
            continue
        if flavor < 0.10:  # multiple choice
            row["problem"] += " (A) 1 (B) 2 (C) 3 (D) 4"
            rows_by_source["cn_k12"].append(row)
            continue
        if flavor < 0.12:  # multi-part
            row["problem"] += " 1. Find the first value. 2. Find the second value."
            rows_by_source["cn_k12"].append(row)
            continue
        if flavor < 0.14:  # proof
            row["problem"] += " Prove that the bound is tight."
            rows_by_source["olympiads"].append(row)
            continue
        if flavor < 0.16:  # hyperlink
            row["problem"] += " See https://forum.example.org/thread for discussion."
            rows_by_source["olympiads"].append(row)
            continue
        if flavor < 0.18:  # non-English (heuristic classifier says non-English)
            row["problem"] = (
                f"Задача {i}: найдите значение суммы всех целых чисел от одного до ста "
                f"и докажите единственность ответа."
            )
            rows_by_source["cn_k12"].append(row)
            continue
        if flavor < 0.20:  # figure markup in the competition subset
            row["problem"] += " [asy] draw((0,0)--(1,1)); [/asy]"
            rows_by_source["harp"].append(row)
            continue
        if flavor < 0.22:  # attribution cleanup fodder
            row["problem"] += " [i] A. Setter [/i]"
            rows_by_source["omni_math"].append({**row, "answer": str(digit)})
            continue
        if flavor < 0.24:
            row["problem"] += " Proposed by A. Person."
            rows_by_source["aops_forum"].append(row)
            continue
        if flavor < 0.26:  # no boxed answer -> answer filter drop
            row["solution"] = "The reasoning never lands on a final value."
            rows_by_source["olympiads"].append(row)
            continue
        if flavor < 0.27:  # malformed line (reject sink)
            rows_by_source["orca_math"].append({"solution": "missing problem field"})
            planted["malformed"] += 1
            continue
        if flavor < 0.30:  # contamination: also goes into the test set
            test_problems.append(row["problem"])
            row = {"problem": row["problem"].replace(" ", "   "), "solution": solution}
            rows_by_source["orca_math"].append(row)
            planted["contaminated"] += 1
            continue
        if flavor < 0.65:
            rows_by_source["orca_math"].append(row)
        else:
            rows_by_source["cn_k12"].append(row)

    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = []
    total_lines = 0
    for source, rows in rows_by_source.items():
        path = out_dir / f"{source}.jsonl"
        with open(path, "w", encoding="utf-8") as f:
            for row in rows:
                f.write(json.dumps(row, ensure_ascii=False) + "\n")
        total_lines += len(rows)
        inputs.append({"path": str(path), "source": source})
    test_path = out_dir / "held_out.jsonl"
    with open(test_path, "w", encoding="utf-8") as f:
        for problem in test_problems:
            f.write(json.dumps({"problem": problem}, ensure_ascii=False) + "\n")
    return {
        "inputs": inputs,
        "test_set": str(test_path),
        "total_lines": total_lines,
        "planted": planted,
    }
