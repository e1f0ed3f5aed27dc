"""Deterministic mock clients for offline runs and tests.

The mock model answers every call-site family the pipeline uses: type-filter
classification, rollouts, domain classification, reformulation transcripts,
and judging. Replies are pure functions of (seed, call key, prompt), so whole
pipeline runs are reproducible.
"""

from __future__ import annotations

import json
import re

from .clients import HeuristicLanguageClassifier, MockEmbeddingClient, MockModelClient
from .prompts import ontology_labels
from .rules import detect_multiple_choice

_PROBLEM_BLOCKS = re.compile(r"<problem>\n(.*?)\n</problem>", re.DOTALL)


def _rollout_handler(client: MockModelClient):
    def handler(prompt: str, key: str) -> str:
        digit = int(client.uniform(key) * 10) % 10
        return (
            "I work through the problem one step at a time.\n\n"
            f"The final answer is \\boxed{{{digit}}}."
        )

    return handler


def _domain_handler(client: MockModelClient, ontology_name: str):
    labels = ontology_labels(ontology_name)

    def handler(prompt: str, key: str) -> str:
        return labels[int(client.uniform(key) * len(labels)) % len(labels)]

    return handler


def _reformulate_handler(client: MockModelClient):
    def handler(prompt: str, key: str) -> str:
        blocks = _PROBLEM_BLOCKS.findall(prompt)
        problem = blocks[-1].strip() if blocks else ""
        match = detect_multiple_choice(problem)
        if match is None:
            key_info = {
                "core_mathematical_concept": "General mathematics",
                "key_information_extraction": "Not applicable as this is not a multiple choice question",
                "problem_structure_analysis": "Open-ended problem",
                "multiple_choice_removal_strategy": "Not applicable as this is not a multiple choice question",
                "rephrasing_approach": "Not needed as problem is already in appropriate format",
                "problem_integrity_preservation": "No modifications needed",
                "answer_format_specification": "Not applicable",
                "is_multiple_choice": False,
            }
            reformulated = "N/A"
        else:
            stem = problem[: match.span[0]].strip()
            if not stem:
                stem = "Compute the quantity requested below."
            reformulated = f"{stem} Express your answer as a single value."
            key_info = {
                "core_mathematical_concept": "General mathematics",
                "key_information_extraction": ["Values and conditions stated in the problem"],
                "problem_structure_analysis": "Direct question",
                "multiple_choice_removal_strategy": ["Remove all answer choices and their labels"],
                "rephrasing_approach": ["Ask for the quantity directly"],
                "problem_integrity_preservation": ["Keep all original values"],
                "answer_format_specification": ["Answer should be a single value"],
                "is_multiple_choice": True,
            }
        return (
            "<reformulation_process>\n"
            + json.dumps(key_info, indent=2)
            + "\n</reformulation_process>\n\n"
            + "<reasoning>\nMock reformulation transcript.\n</reasoning>\n\n"
            + f"<reformulated_problem>\n{reformulated}\n</reformulated_problem>"
        )

    return handler


def build_mock_model(seed: int = 0, positive_rate: float = 0.05) -> MockModelClient:
    client = MockModelClient(seed=seed, positive_rate=positive_rate)
    client.handlers = {
        "rollout:": _rollout_handler(client),
        "domain:OMNI:": _domain_handler(client, "OMNI"),
        "domain:MSC2020:": _domain_handler(client, "MSC2020"),
        "reformulate:": _reformulate_handler(client),
        "judge:": lambda prompt, key: "VERDICT: accept",
    }
    return client


def build_mock_embedder(seed: int = 0, dim: int = 64) -> MockEmbeddingClient:
    return MockEmbeddingClient(dim=dim, seed=seed)


def build_mock_language() -> HeuristicLanguageClassifier:
    return HeuristicLanguageClassifier()
