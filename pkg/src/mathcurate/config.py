"""Pipeline configuration: defaults, TOML loading, and startup validation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .records import Source

# Stage names in default execution order. Cheap deterministic filters run
# before model-priced ones; exact dedup runs before anything model-priced.
DEFAULT_STAGE_ORDER = (
    "source_clean",
    "answer",
    "exact_dedup",
    "language",
    "hyperlink",
    "type_filters",
    "minhash_dedup",
    "semantic_dedup",
    "decontaminate",
    "solvability",
    "quintiles",
    "taxonomy",
)

# Subsets whose answers arrive pre-parsed; the solvability filter skips them.
DEFAULT_EXEMPT_SOURCES = ("harp", "omni_math", "math", "gsm8k")


class ConfigError(ValueError):
    """Raised when a config file fails schema validation."""


@dataclass
class ModelSettings:
    mode: str = "mock"  # mock | http
    endpoint: str = ""
    model_name: str = ""
    auth_env: str = "MATHCURATE_API_TOKEN"
    temperature: float | None = None  # no defaults mandated; endpoint decides
    top_p: float | None = None
    max_in_flight: int = 1
    retries: int = 2
    min_request_interval: float = 0.0
    cache_dir: str = ""
    mock_seed: int = 0


@dataclass
class PipelineConfig:
    seed: int = 0
    stages: tuple[str, ...] = DEFAULT_STAGE_ORDER
    enabled: dict[str, bool] = field(default_factory=dict)

    # dedup
    shingle_size: int = 3
    minhash_threshold_default: float = 0.7
    minhash_threshold_per_subset: dict[str, float] = field(
        default_factory=lambda: {"orca_math": 0.6, "cn_k12": 0.6}
    )
    semantic_threshold: float = 0.5
    signature_cache_dir: str = ""

    # difficulty
    small_rollouts: int = 64
    large_rollouts: int = 5
    quintile_boundaries: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8)
    solvability_exempt_sources: tuple[str, ...] = DEFAULT_EXEMPT_SOURCES
    numeric_answer_equivalence: bool = False

    # reformulation post-filter rollout budget
    reformulation_small_rollouts: int = 8
    reformulation_large_rollouts: int = 3

    model: ModelSettings = field(default_factory=ModelSettings)

    # io
    inputs: list[dict[str, str]] = field(default_factory=list)  # {path, source}
    test_set_paths: list[str] = field(default_factory=list)
    output_dir: str = "out"
    write_quarantine: bool = True

    def stage_enabled(self, name: str) -> bool:
        return self.enabled.get(name, True)

    def minhash_threshold(self, source: str) -> float:
        return self.minhash_threshold_per_subset.get(source, self.minhash_threshold_default)

    def fingerprint(self) -> str:
        """Hash of every behavior-affecting setting, used to key checkpoints and caches."""
        payload = {
            "seed": self.seed,
            "stages": list(self.stages),
            "enabled": dict(sorted(self.enabled.items())),
            "shingle_size": self.shingle_size,
            "minhash_threshold_default": self.minhash_threshold_default,
            "minhash_threshold_per_subset": dict(sorted(self.minhash_threshold_per_subset.items())),
            "semantic_threshold": self.semantic_threshold,
            "small_rollouts": self.small_rollouts,
            "large_rollouts": self.large_rollouts,
            "quintile_boundaries": list(self.quintile_boundaries),
            "solvability_exempt_sources": list(self.solvability_exempt_sources),
            "numeric_answer_equivalence": self.numeric_answer_equivalence,
            "model_mode": self.model.mode,
            "model_name": self.model.model_name,
            "mock_seed": self.model.mock_seed,
            "inputs": self.inputs,
            "test_set_paths": self.test_set_paths,
        }
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def validate(self) -> None:
        errors = validate_config(self)
        if errors:
            raise ConfigError("; ".join(errors))


def validate_config(cfg: PipelineConfig) -> list[str]:
    """Return every schema violation found (empty list means valid)."""
    errors: list[str] = []

    if not 0.0 < cfg.minhash_threshold_default <= 1.0:
        errors.append(f"minhash_threshold_default must be in (0,1], got {cfg.minhash_threshold_default}")
    for subset, thr in cfg.minhash_threshold_per_subset.items():
        if not 0.0 < thr <= 1.0:
            errors.append(f"minhash threshold for {subset} must be in (0,1], got {thr}")
    if not 0.0 < cfg.semantic_threshold <= 1.0:
        errors.append(f"semantic_threshold must be in (0,1], got {cfg.semantic_threshold}")

    bounds = cfg.quintile_boundaries
    if len(bounds) != 4:
        errors.append(f"quintile_boundaries needs exactly 4 values, got {len(bounds)}")
    if any(not 0.0 < b < 1.0 for b in bounds):
        errors.append("quintile boundaries must lie strictly inside (0,1)")
    if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
        errors.append("quintile boundaries must be strictly increasing")

    if cfg.shingle_size < 1:
        errors.append("shingle_size must be >= 1")
    for name, n in (("small_rollouts", cfg.small_rollouts), ("large_rollouts", cfg.large_rollouts)):
        if n < 1:
            errors.append(f"{name} must be >= 1")

    for src in cfg.solvability_exempt_sources:
        try:
            Source(src)
        except ValueError:
            errors.append(f"unknown source in solvability exemptions: {src}")

    unknown = [s for s in cfg.stages if s not in DEFAULT_STAGE_ORDER]
    if unknown:
        errors.append(f"unknown stages: {unknown}")
    errors.extend(_stage_order_errors(cfg))

    for spec in cfg.inputs:
        if "path" not in spec or "source" not in spec:
            errors.append(f"input spec needs path and source: {spec}")
        else:
            try:
                Source(spec["source"])
            except ValueError:
                errors.append(f"unknown input source: {spec['source']}")

    if cfg.model.mode not in ("mock", "http"):
        errors.append(f"model.mode must be mock or http, got {cfg.model.mode}")
    if cfg.model.mode == "http" and not cfg.model.endpoint:
        errors.append("model.mode=http requires model.endpoint")
    return errors


def _stage_order_errors(cfg: PipelineConfig) -> list[str]:
    """Ordering invariants: answer extraction before answer-reading filters,
    exact dedup before model-priced stages, solvability before quintiles."""
    errors = []
    order = {name: i for i, name in enumerate(cfg.stages) if cfg.stage_enabled(name)}

    def before(a: str, b: str, why: str):
        if a in order and b in order and order[a] >= order[b]:
            errors.append(f"stage '{a}' must run before '{b}' ({why})")

    before("answer", "type_filters", "true/false and yes/no read final_answer")
    before("answer", "solvability", "grading needs final_answer")
    before("exact_dedup", "type_filters", "dedup before model-priced stages")
    before("exact_dedup", "solvability", "dedup before model-priced stages")
    before("solvability", "quintiles", "quintiles derive from solve profiles")
    return errors


def _merge_section(obj, section: dict, path: str, errors: list[str]) -> None:
    for key, value in section.items():
        if not hasattr(obj, key):
            errors.append(f"unknown config key: {path}{key}")
            continue
        current = getattr(obj, key)
        if isinstance(current, tuple):
            value = tuple(value)
        setattr(obj, key, value)


def load_config(path: str | Path) -> PipelineConfig:
    """Parse a TOML config file and validate it, raising ConfigError on any problem."""
    raw_bytes = Path(path).read_bytes()
    try:
        data = tomllib.loads(raw_bytes.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    cfg = PipelineConfig()
    errors: list[str] = []
    model_section = data.pop("model", {})
    stage_flags = data.pop("stages_enabled", {})
    _merge_section(cfg, data, "", errors)
    _merge_section(cfg.model, model_section, "model.", errors)
    for name, flag in stage_flags.items():
        if name not in DEFAULT_STAGE_ORDER:
            errors.append(f"unknown stage in stages_enabled: {name}")
        cfg.enabled[name] = bool(flag)
    errors.extend(validate_config(cfg))
    if errors:
        raise ConfigError("; ".join(errors))
    return cfg
