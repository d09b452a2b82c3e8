"""Run configuration: one YAML document with nested sections per subsystem.

Every field can be overridden from the command line with dotted keys
(for example ``--set exploration.alpha=0.5``). Seeds are split into a world
seed and per-episode policy seeds so policy variance can be studied on a
fixed world.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .association import AssociationConfig
from .explorer import ExplorationConfig
from .oracle import NoiseModel
from .world import SensorConfig, WorldSpec

POLICIES = ("disagreement", "frontier", "random")
ASSOCIATION_MODES = ("oracle", "heuristic")


class ConfigError(ValueError):
    """Invalid run configuration; the message lists the offending fields."""


@dataclass(frozen=True)
class AggregatorConfig:
    view_budget: int = 5
    vote_threshold: float = 0.5


@dataclass(frozen=True)
class RunConfig:
    world: WorldSpec = field(default_factory=WorldSpec)
    world_file: str | None = None
    sensor: SensorConfig = field(default_factory=SensorConfig)
    noise: NoiseModel = field(default_factory=lambda: DEFAULT_NOISE)
    association: AssociationConfig = field(default_factory=AssociationConfig)
    association_mode: str = "oracle"
    exploration: ExplorationConfig = field(default_factory=ExplorationConfig)
    aggregator: AggregatorConfig = field(default_factory=AggregatorConfig)
    policy: str = "disagreement"
    episode_cap: int = 400
    seeds: tuple[int, ...] = (1,)
    world_seed: int | None = None
    output_dir: str = "runs"
    workers: int = 1


# Shipped default captioner noise: near viewpoints caption almost cleanly,
# distant or oblique ones degrade, so revisiting up close pays off.
DEFAULT_NOISE = NoiseModel(p0=0.02, k_d=0.45, k_a=0.25, p_max=0.85,
                           p_cat=0.02, p_context=0.3)


def validate_config(cfg: RunConfig) -> None:
    problems = []
    if cfg.episode_cap < 1:
        problems.append("episode_cap must be >= 1")
    if not cfg.seeds:
        problems.append("seeds must contain at least one seed")
    if cfg.policy not in POLICIES:
        problems.append(f"policy must be one of {POLICIES}")
    if cfg.association_mode not in ASSOCIATION_MODES:
        problems.append(f"association_mode must be one of {ASSOCIATION_MODES}")
    if cfg.workers < 1:
        problems.append("workers must be >= 1")
    if problems:
        raise ConfigError("; ".join(problems))


def config_to_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["world"].pop("vocabulary", None)  # vocabulary travels with the world file
    return d


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _coerce_tuple(value):
    return tuple(value) if isinstance(value, list) else value


def _build_section(cls, data: dict, name: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {name} fields: {sorted(unknown)}")
    kwargs = {k: _coerce_tuple(v) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {name} section: {exc}") from exc


_SECTIONS = {
    "world": WorldSpec,
    "sensor": SensorConfig,
    "noise": NoiseModel,
    "association": AssociationConfig,
    "exploration": ExplorationConfig,
    "aggregator": AggregatorConfig,
}

_TOP_LEVEL = ("world_file", "association_mode", "policy", "episode_cap",
              "seeds", "world_seed", "output_dir", "workers")


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data or {})
    kwargs = {}
    for section, cls in _SECTIONS.items():
        if section in data:
            kwargs[section] = _build_section(cls, data.pop(section) or {}, section)
    for key in _TOP_LEVEL:
        if key in data:
            kwargs[key] = _coerce_tuple(data.pop(key))
    if data:
        raise ConfigError(f"unknown config keys: {sorted(data)}")
    cfg = RunConfig(**kwargs)
    validate_config(cfg)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data)


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    """Apply ``section.field=value`` (or ``field=value``) overrides."""
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        value = yaml.safe_load(raw)
        parts = key.split(".")
        if len(parts) == 1:
            if parts[0] not in _TOP_LEVEL:
                raise ConfigError(f"unknown config key {parts[0]!r}")
            cfg = replace(cfg, **{parts[0]: _coerce_tuple(value)})
        elif len(parts) == 2 and parts[0] in _SECTIONS:
            section = getattr(cfg, parts[0])
            if parts[1] not in {f.name for f in fields(section)}:
                raise ConfigError(f"unknown field {key!r}")
            try:
                section = replace(section, **{parts[1]: _coerce_tuple(value)})
            except ValueError as exc:
                raise ConfigError(f"bad override {item!r}: {exc}") from exc
            cfg = replace(cfg, **{parts[0]: section})
        else:
            raise ConfigError(f"unknown config key {key!r}")
    validate_config(cfg)
    return cfg


DEFAULT_CONFIG_TEXT = """\
# semgrid run configuration
world:
  width: 30
  height: 30
  obstacle_density: 0.15
  object_count: 12
  seed: 0
  cell_size: 0.5          # meters per cell
  object_height: 0.5
  footprint_radius: 0.5
  min_object_separation: 0.0
  unique_attributes: true

sensor:
  fov_degrees: 90.0
  max_range_cells: 8.0
  transient_id_range: [0, 99]
  position_noise_radius: 0.0

noise:                    # captioner corruption model
  p0: 0.02
  k_d: 0.45
  k_a: 0.25
  p_max: 0.85
  p_cat: 0.02
  p_context: 0.3

association:
  distance_gate: 1.0            # meters
  caption_similarity_gate: 0.3
  weight_spatial: 0.6

exploration:
  alpha: 0.7                    # alpha: disagreement weight vs travel cost (1 - alpha)
  area_min_cells: 3             # A_min, desk-scaled from the 100-pixel origin
  radii_m: [0.5, 1.0, 2.0]      # R: viewpoint sampling radii
  candidates_per_radius: 30     # N_r
  viewpoints_min: 5             # N_min
  viewpoints_max: 20            # N_max
  stuck_window: 5               # tau_s, steps
  displacement_eps: 0.15        # eps_p, meters
  recovery_attempts: 5          # N_rec
  disagreement_threshold: 0.5
  safety_margin_m: 0.5
  disagreement_radius_m: 0.5
  recovery_radius_cells: 2.0
  accumulate: max               # overlap rule: max | sum
  initial_scan_steps: 8

aggregator:
  view_budget: 5
  vote_threshold: 0.5

policy: disagreement            # disagreement | frontier | random
association_mode: oracle        # oracle | heuristic
episode_cap: 400
seeds: [1]
world_seed: null                # null: world seed follows the episode seed
output_dir: runs
workers: 1
"""


def write_default_config(path: str | Path) -> Path:
    path = Path(path)
    path.write_text(DEFAULT_CONFIG_TEXT)
    return path
