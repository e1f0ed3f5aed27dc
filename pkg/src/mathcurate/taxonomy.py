"""Domain classification under two ontologies and the per-domain reports."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .clients import ModelClient, TransportError
from .prompts import ontology_labels, render_domain_prompt
from .records import ProblemRecord


@dataclass(frozen=True)
class Ontology:
    name: str
    labels: tuple[str, ...]
    fallback: str

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate labels in ontology {self.name}")

    def meta_key(self) -> str:
        return f"domain_{self.name.lower()}"


OMNI = Ontology("OMNI", ontology_labels("OMNI"), fallback="Other")
MSC2020 = Ontology("MSC2020", ontology_labels("MSC2020"), fallback="Unclassified")
ONTOLOGIES = (OMNI, MSC2020)


def _normalize_label(text: str) -> str:
    return re.sub(r"\s+", " ", text.strip().strip("\"'.` ")).lower()


def match_label(reply: str, ontology: Ontology) -> str | None:
    wanted = _normalize_label(reply)
    for label in ontology.labels:
        if _normalize_label(label) == wanted:
            return label
    return None


def classify_domain(
    record: ProblemRecord, ontology: Ontology, client: ModelClient
) -> tuple[str, bool]:
    """Classify one record; returns (label, flagged).

    Non-member replies get one retry, then the ontology's fallback with the
    flag set. Transport failures fall back the same way (never terminal).
    """
    prompt = render_domain_prompt(ontology.labels, record.problem)
    base_key = f"domain:{ontology.name}:{record.id}"
    for attempt in range(2):
        key = base_key if attempt == 0 else f"{base_key}:retry{attempt}"
        try:
            reply = client.complete(prompt, key=key)
        except TransportError:
            break
        label = match_label(reply, ontology)
        if label is not None:
            return label, False
    return ontology.fallback, True


def domain_report(
    records: Sequence[ProblemRecord],
    ontology: Ontology,
    per_source: bool = False,
) -> list[tuple]:
    """Exact label counts, sorted descending (ties broken by label).

    With per_source=True the rows are (source, label, count).
    """
    key = ontology.meta_key()
    counts: dict = {}
    for record in records:
        label = record.meta.get(key)
        if label is None:
            continue
        bucket = (record.source.value, label) if per_source else label
        counts[bucket] = counts.get(bucket, 0) + 1
    if per_source:
        rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return [(source, label, n) for (source, label), n in rows]
    rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(label, n) for label, n in rows]


def domain_report_tsv(rows: list[tuple]) -> str:
    if rows and len(rows[0]) == 3:
        lines = ["source\tdomain\tcount"]
        lines += [f"{source}\t{label}\t{n}" for source, label, n in rows]
    else:
        lines = ["domain\tcount"]
        lines += [f"{label}\t{n}" for label, n in rows]
    return "\n".join(lines) + "\n"
