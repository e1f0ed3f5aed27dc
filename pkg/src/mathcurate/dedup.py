"""Exact, lexical-near, and semantic deduplication plus test-set decontamination."""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .records import Decision, FilterId, FilterVerdict, Method, ProblemRecord

logger = logging.getLogger(__name__)

NUM_LANES = 128

_WORD = re.compile(r"\w+")


def normalize_exact(text: str) -> str:
    """Remove all whitespace code points; no other transformation."""
    return "".join(text.split())


class UnionFind:
    """Disjoint sets keyed by index; the component root is its minimal member."""

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra

    def components(self) -> list[list[int]]:
        groups: dict[int, list[int]] = {}
        for i in range(len(self.parent)):
            groups.setdefault(self.find(i), []).append(i)
        return [groups[root] for root in sorted(groups)]


def _dedup_verdicts(
    records: Sequence[ProblemRecord],
    keep_of: dict[int, int],
    filter_id: FilterId,
    keep_detail: str = "",
) -> list[FilterVerdict]:
    """Build per-record verdicts from a {dropped index -> kept index} map."""
    verdicts = []
    for i, record in enumerate(records):
        if i in keep_of:
            partner = records[keep_of[i]]
            verdicts.append(
                FilterVerdict(filter_id, Method.DEDUP, Decision.DROP, detail=f"duplicate of {partner.id}")
            )
        else:
            verdicts.append(FilterVerdict(filter_id, Method.DEDUP, Decision.KEEP, detail=keep_detail))
    return verdicts


def exact_dedup(records: Sequence[ProblemRecord]) -> list[FilterVerdict]:
    """Group records by whitespace-insensitive problem text; the first record
    of each group (input order) keeps, the rest drop."""
    first_seen: dict[str, int] = {}
    keep_of: dict[int, int] = {}
    for i, record in enumerate(records):
        key = normalize_exact(record.problem)
        if key in first_seen:
            keep_of[i] = first_seen[key]
        else:
            first_seen[key] = i
    return _dedup_verdicts(records, keep_of, FilterId.EXACT_DEDUP)


def decontaminate(
    records: Sequence[ProblemRecord], test_problems: Iterable[str]
) -> list[FilterVerdict]:
    """Drop records whose problem matches any held-out test problem up to whitespace."""
    test_keys = {normalize_exact(p) for p in test_problems}
    test_keys.discard("")
    if not test_keys:
        logger.warning("decontamination called with an empty test set; no-op")
    verdicts = []
    for record in records:
        if normalize_exact(record.problem) in test_keys:
            verdicts.append(
                FilterVerdict(
                    FilterId.DECONTAMINATION, Method.DEDUP, Decision.DROP, detail="matches test-set problem"
                )
            )
        else:
            verdicts.append(FilterVerdict(FilterId.DECONTAMINATION, Method.DEDUP, Decision.KEEP))
    return verdicts


# --- MinHash ---------------------------------------------------------------

_SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SPLITMIX_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SPLITMIX_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = x + _SPLITMIX_GAMMA
    x = (x ^ (x >> np.uint64(30))) * _SPLITMIX_M1
    x = (x ^ (x >> np.uint64(27))) * _SPLITMIX_M2
    return x ^ (x >> np.uint64(31))


def lane_keys(seed: int, num_lanes: int = NUM_LANES) -> np.ndarray:
    """Per-lane 64-bit keys derived from one master seed."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2**64, size=num_lanes, dtype=np.uint64)


def shingles(text: str, shingle_size: int) -> set[str]:
    """Lowercase word shingles; texts shorter than one shingle hash whole."""
    words = _WORD.findall(text.lower())
    if len(words) < shingle_size:
        return {" ".join(words) if words else text.lower()}
    return {" ".join(words[i : i + shingle_size]) for i in range(len(words) - shingle_size + 1)}


def _shingle_hash(shingle: str) -> int:
    return int.from_bytes(hashlib.blake2b(shingle.encode("utf-8"), digest_size=8).digest(), "big")


@dataclass(frozen=True)
class MinHashSignature:
    """128 per-lane hash minima over a text's shingle set."""

    lanes: tuple[int, ...]
    shingle_size: int

    def agreement(self, other: "MinHashSignature") -> float:
        """Fraction of matching lanes; an unbiased Jaccard estimate."""
        if len(self.lanes) != len(other.lanes):
            raise ValueError("signatures have different lane counts")
        same = sum(1 for a, b in zip(self.lanes, other.lanes) if a == b)
        return same / len(self.lanes)


def minhash_signature(
    text: str,
    shingle_size: int = 3,
    seed: int = 0,
    keys: np.ndarray | None = None,
) -> MinHashSignature:
    """Signature whose lane i holds the minimum of seeded hash i over the shingle set."""
    if not text:
        raise ValueError("cannot sign empty text")
    if keys is None:
        keys = lane_keys(seed)
    bases = np.array([_shingle_hash(s) for s in shingles(text, shingle_size)], dtype=np.uint64)
    # (n_shingles, n_lanes) lane values; each lane key selects an independent mix
    values = _splitmix64(bases[:, None] ^ keys[None, :])
    mins = values.min(axis=0)
    return MinHashSignature(tuple(int(v) for v in mins), shingle_size)


def choose_bands(threshold: float, num_lanes: int = NUM_LANES) -> tuple[int, int]:
    """Banding (bands, rows) with bands*rows = num_lanes whose S-curve midpoint
    (1/b)^(1/r) lies closest to the threshold."""
    best = None
    for bands in range(1, num_lanes + 1):
        if num_lanes % bands:
            continue
        rows = num_lanes // bands
        midpoint = (1.0 / bands) ** (1.0 / rows)
        score = abs(midpoint - threshold)
        if best is None or score < best[0]:
            best = (score, bands, rows)
    return best[1], best[2]


def lsh_dedup(
    records: Sequence[ProblemRecord],
    signatures: Sequence[MinHashSignature],
    threshold: float,
) -> list[FilterVerdict]:
    """Near-duplicate removal within one source subset.

    Band collisions propose candidate pairs; pairs are confirmed when their
    lane agreement reaches the threshold. Confirmed duplicate groups keep
    their first member by input order.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0,1], got {threshold}")
    if len(records) != len(signatures):
        raise ValueError("records and signatures are misaligned")
    n = len(records)
    uf = UnionFind(n)
    if n:
        bands, rows = choose_bands(threshold, len(signatures[0].lanes))
        for band in range(bands):
            buckets: dict[tuple[int, ...], list[int]] = {}
            lo, hi = band * rows, (band + 1) * rows
            for i, sig in enumerate(signatures):
                buckets.setdefault(sig.lanes[lo:hi], []).append(i)
            for bucket in buckets.values():
                for a_pos, a in enumerate(bucket):
                    for b in bucket[a_pos + 1 :]:
                        if uf.find(a) == uf.find(b):
                            continue
                        if signatures[a].agreement(signatures[b]) >= threshold:
                            uf.union(a, b)
    keep_of: dict[int, int] = {}
    for i in range(n):
        root = uf.find(i)
        if root != i:
            keep_of[i] = root
    return _dedup_verdicts(records, keep_of, FilterId.MINHASH_DEDUP)


class SignatureCache:
    """On-disk MinHash signature cache keyed by record id + config fingerprint."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[str, tuple[int, ...]] = {}
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as f:
                for line in f:
                    obj = json.loads(line)
                    self._entries[obj["key"]] = tuple(obj["lanes"])

    def get(self, record_id: str, fingerprint: str) -> tuple[int, ...] | None:
        return self._entries.get(f"{record_id}:{fingerprint}")

    def put(self, record_id: str, fingerprint: str, lanes: tuple[int, ...]) -> None:
        key = f"{record_id}:{fingerprint}"
        if key in self._entries:
            return
        self._entries[key] = lanes
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps({"key": key, "lanes": list(lanes)}) + "\n")


# --- Semantic dedup --------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingVector:
    """Unit-normalized embedding; zero vectors are rejected at construction."""

    values: tuple[float, ...]

    @classmethod
    def from_raw(cls, raw: Sequence[float]) -> "EmbeddingVector":
        arr = np.asarray(raw, dtype=np.float64)
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise ValueError("zero embedding vector")
        return cls(tuple((arr / norm).tolist()))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(np.asarray(self.values)))


def _as_matrix(vectors: Sequence[EmbeddingVector] | np.ndarray) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        matrix = np.asarray(vectors, dtype=np.float64)
    else:
        dims = {len(v.values) for v in vectors}
        if len(dims) > 1:
            raise ValueError(f"embedding dimension mismatch: {sorted(dims)}")
        matrix = np.array([v.values for v in vectors], dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("expected a 2-d embedding matrix")
    return matrix


def threshold_clusters(
    vectors: Sequence[EmbeddingVector] | np.ndarray,
    threshold: float,
    block: int = 1024,
) -> list[list[int]]:
    """Connected components of the pairwise cosine-similarity > threshold graph.

    Similarities are computed in row blocks so the full n x n matrix never
    materializes. Components are returned sorted by their minimal member.
    """
    matrix = _as_matrix(vectors)
    n = matrix.shape[0]
    uf = UnionFind(n)
    for start in range(0, n, block):
        stop = min(start + block, n)
        sims = matrix[start:stop] @ matrix.T
        rows, cols = np.nonzero(sims > threshold)
        for r, c in zip(rows.tolist(), cols.tolist()):
            i = start + r
            if c > i:
                uf.union(i, c)
    return uf.components()


def semantic_dedup(
    records: Sequence[ProblemRecord],
    vectors: Sequence[EmbeddingVector] | np.ndarray,
    threshold: float,
) -> list[FilterVerdict]:
    """Drop all but the first record (input order) of each similarity cluster."""
    if len(records) != len(vectors):
        raise ValueError("records and vectors are misaligned")
    keep_of: dict[int, int] = {}
    for component in threshold_clusters(vectors, threshold):
        rep = component[0]
        for member in component[1:]:
            keep_of[member] = rep
    return _dedup_verdicts(records, keep_of, FilterId.SEMANTIC_DEDUP)
