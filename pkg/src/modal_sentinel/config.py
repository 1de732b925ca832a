"""Pipeline configuration: a single JSON document, strict on unknown keys."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .beam import BeamSpec, DamageSpec
from .errors import ConfigError, ValidationError
from .features import FEATURE_KINDS

_DEFAULT_BEAM = BeamSpec.square_section()
DEFAULT_INFLUENCE_WIDTH = 0.008
PIXEL_DEFAULT_RANK = 150


@dataclass(frozen=True)
class SimulationConfig:
    mode_count: int = 6
    grid_points: int = 41
    dt: float = 1e-3
    samples: int = 2700
    tip_displacement: float = 0.05
    quadrature_points: int = 2001
    sensitivity: float = 0.05
    noise_level: float = 0.0


@dataclass(frozen=True)
class IngestConfig:
    frames_dir: str | None = None
    fps: float = 1000.0
    roi: tuple[int, int, int, int] | None = None
    mean_subtract: bool = True
    pixel_pitch: float | None = None


@dataclass(frozen=True)
class DmdConfig:
    # None: 1 for frame data, 2 otherwise
    embedding_dimension: int | None = None
    # None: 150 for frame data, 2 * mode_count otherwise
    rank: int | None = None
    train_fraction: float = 0.6
    dominant_count: int = 4


@dataclass(frozen=True)
class FeatureConfig:
    kinds: tuple[str, ...] = FEATURE_KINDS
    scaling: float = 1.0
    regularization: float | None = None
    max_frequency_gap: float = 0.2
    min_similarity: float = 0.6
    candidate_pool: int | None = None


@dataclass(frozen=True)
class PathsConfig:
    snapshots: str | None = None
    model: str | None = None
    baseline: str | None = None


@dataclass(frozen=True)
class PipelineConfig:
    name: str = "healthy"
    beam: BeamSpec = _DEFAULT_BEAM
    damage: DamageSpec = field(default_factory=lambda: DamageSpec(influence_width=DEFAULT_INFLUENCE_WIDTH))
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    ingest: IngestConfig = field(default_factory=IngestConfig)
    dmd: DmdConfig = field(default_factory=DmdConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    seed: int = 0

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def resolved_embedding(self, source: str) -> int:
        if self.dmd.embedding_dimension is not None:
            return self.dmd.embedding_dimension
        return 1 if source == "frames" else 2

    def resolved_rank(self, source: str) -> int:
        if self.dmd.rank is not None:
            return self.dmd.rank
        return PIXEL_DEFAULT_RANK if source == "frames" else 2 * self.simulation.mode_count


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


_SECTIONS = {
    "beam": BeamSpec,
    "damage": DamageSpec,
    "simulation": SimulationConfig,
    "ingest": IngestConfig,
    "dmd": DmdConfig,
    "features": FeatureConfig,
    "paths": PathsConfig,
}


def _section(cls, name: str, doc: Any, defaults):
    if not isinstance(doc, dict):
        raise ConfigError(name, "expected an object")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in doc:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown field")
    values = dataclasses.asdict(defaults)
    values.update(doc)
    for key in ("locations", "severities", "kinds", "roi"):
        if key in values and isinstance(values[key], list):
            values[key] = tuple(values[key])
    return values


def _check_number(field_name: str, value, *, positive=False, nonneg=False, integer=False,
                  optional=False, upper: float | None = None, inclusive_upper=True):
    if value is None:
        if optional:
            return
        raise ConfigError(field_name, "required")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field_name, f"expected a number, got {value!r}")
    if integer and not float(value).is_integer():
        raise ConfigError(field_name, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(field_name, "must be finite")
    if positive and value <= 0:
        raise ConfigError(field_name, f"must be > 0, got {value}")
    if nonneg and value < 0:
        raise ConfigError(field_name, f"must be >= 0, got {value}")
    if upper is not None and (value > upper if inclusive_upper else value >= upper):
        raise ConfigError(field_name, f"must be {'<=' if inclusive_upper else '<'} {upper}, got {value}")


def from_dict(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    defaults = PipelineConfig()
    for key in doc:
        if key not in ("name", "seed", *_SECTIONS):
            raise ConfigError(key, "unknown field")
    sections = {name: _section(cls, name, doc.get(name, {}), getattr(defaults, name))
                for name, cls in _SECTIONS.items()}

    beam = sections["beam"]
    for key in ("length", "cross_section_area", "second_moment", "youngs_modulus", "density"):
        _check_number(f"beam.{key}", beam[key], positive=True)
    _check_number("beam.damping_coefficient", beam["damping_coefficient"], nonneg=True)

    sim = sections["simulation"]
    for key in ("mode_count", "grid_points", "samples", "quadrature_points"):
        _check_number(f"simulation.{key}", sim[key], positive=True, integer=True)
        sim[key] = int(sim[key])
    if sim["grid_points"] < 3:
        raise ConfigError("simulation.grid_points", "need at least 3 points")
    if sim["samples"] < 2:
        raise ConfigError("simulation.samples", "need at least 2 samples")
    _check_number("simulation.dt", sim["dt"], positive=True)
    _check_number("simulation.tip_displacement", sim["tip_displacement"], positive=True)
    _check_number("simulation.sensitivity", sim["sensitivity"], nonneg=True, upper=1.0,
                  inclusive_upper=False)
    _check_number("simulation.noise_level", sim["noise_level"], nonneg=True)

    ing = sections["ingest"]
    _check_number("ingest.fps", ing["fps"], positive=True)
    _check_number("ingest.pixel_pitch", ing["pixel_pitch"], positive=True, optional=True)
    if ing["roi"] is not None and len(ing["roi"]) != 4:
        raise ConfigError("ingest.roi", "expected [row, col, height, width]")
    if ing["roi"] is not None:
        ing["roi"] = tuple(int(v) for v in ing["roi"])

    dmd = sections["dmd"]
    _check_number("dmd.embedding_dimension", dmd["embedding_dimension"], positive=True,
                  integer=True, optional=True)
    _check_number("dmd.rank", dmd["rank"], positive=True, integer=True, optional=True)
    _check_number("dmd.dominant_count", dmd["dominant_count"], positive=True, integer=True)
    _check_number("dmd.train_fraction", dmd["train_fraction"], positive=True, upper=1.0,
                  inclusive_upper=False)
    for key in ("embedding_dimension", "rank", "dominant_count"):
        if dmd[key] is not None:
            dmd[key] = int(dmd[key])

    feat = sections["features"]
    for kind in feat["kinds"]:
        if kind not in FEATURE_KINDS:
            raise ConfigError("features.kinds", f"unknown kind {kind!r}")
    if not feat["kinds"]:
        raise ConfigError("features.kinds", "at least one kind required")
    _check_number("features.scaling", feat["scaling"], positive=True)
    _check_number("features.regularization", feat["regularization"], positive=True, optional=True)
    _check_number("features.max_frequency_gap", feat["max_frequency_gap"], nonneg=True)
    _check_number("features.min_similarity", feat["min_similarity"], nonneg=True, upper=1.0)
    _check_number("features.candidate_pool", feat["candidate_pool"], positive=True,
                  integer=True, optional=True)

    name = doc.get("name", defaults.name)
    if not isinstance(name, str) or not name:
        raise ConfigError("name", "expected a non-empty string")
    seed = doc.get("seed", defaults.seed)
    _check_number("seed", seed, nonneg=True, integer=True)

    built = {}
    for key, cls in _SECTIONS.items():
        try:
            built[key] = cls(**sections[key])
        except ValidationError as exc:
            raise ConfigError(key, str(exc)) from None
    for loc in built["damage"].locations:
        if not (0.0 < loc < built["beam"].length):
            raise ConfigError("damage.locations", f"{loc} outside (0, {built['beam'].length})")
    return PipelineConfig(name=name, seed=int(seed), **built)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    return from_dict(doc)


def damage_case_config(case: int, name: str | None = None, **overrides) -> PipelineConfig:
    """Config for one of the tabulated notch cases (0 = healthy)."""
    from .beam import notch_damage_case

    base = PipelineConfig(**overrides)
    damage = notch_damage_case(case, length=base.beam.length,
                           influence_width=base.damage.influence_width)
    label = name or ("healthy" if case == 0 else f"damage{case}")
    return dataclasses.replace(base, name=label, damage=damage)
