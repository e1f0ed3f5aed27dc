"""Versioned prompt assets and their renderers.

Substitution is plain text interpolation (str.replace), never str.format:
the templates are full of literal braces.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache
from importlib import resources

FILTER_KINDS = ("multiple_choice", "proof", "yes_no", "true_false", "multi_part")
ROLLOUT_TIERS = ("small", "large")


class UnknownTemplateError(KeyError):
    pass


@lru_cache(maxsize=None)
def load_asset(name: str) -> str:
    return resources.files("mathcurate.assets").joinpath(name).read_text(encoding="utf-8")


def template_fingerprint(name: str) -> str:
    return hashlib.blake2b(load_asset(name).encode("utf-8"), digest_size=8).hexdigest()


def _filter_asset(kind: str) -> str:
    if kind not in FILTER_KINDS:
        raise UnknownTemplateError(f"unknown filter kind: {kind}")
    return f"filter_{kind}.txt"


def render_filter_prompt(kind: str, problem: str) -> str:
    return load_asset(_filter_asset(kind)).replace("{problem}", problem)


def filter_template_fingerprint(kind: str) -> str:
    return template_fingerprint(_filter_asset(kind))


def render_rollout_prompt(tier: str, problem: str) -> str:
    if tier not in ROLLOUT_TIERS:
        raise UnknownTemplateError(f"unknown rollout tier: {tier}")
    return load_asset(f"rollout_{tier}.txt").replace("{problem}", problem)


def render_reformulation_prompt(problem: str) -> str:
    return load_asset("reformulate.txt").replace("{problem}", problem)


def render_judge_prompt(original: str, reformulated: str) -> str:
    return (
        load_asset("reformulate_judge.txt")
        .replace("{original}", original)
        .replace("{reformulated}", reformulated)
    )


def render_domain_prompt(labels: tuple[str, ...], problem: str) -> str:
    return (
        load_asset("domain_classify.txt")
        .replace("{labels}", "\n".join(f"- {label}" for label in labels))
        .replace("{problem}", problem)
    )


def ontology_labels(name: str) -> tuple[str, ...]:
    asset = {"OMNI": "omni_labels.txt", "MSC2020": "msc2020_labels.txt"}.get(name)
    if asset is None:
        raise UnknownTemplateError(f"unknown ontology: {name}")
    return tuple(line.strip() for line in load_asset(asset).splitlines() if line.strip())
