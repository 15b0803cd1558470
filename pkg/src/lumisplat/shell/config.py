"""Run configuration: one nested structure naming every tunable, JSON
(de)serialization with unknown-key rejection, dotted-path overrides, and a
canonical content hash echoed by every command.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from ..errors import ValidationError
from ..scene import DecoderConfig
from ..train import TrainConfig


@dataclass
class SynthConfig:
    """Tube scene, headlight, trajectory, and framing for `synth`."""

    radius: float = 0.35
    fold_amp: float = 0.08
    fold_freq: float = 1.3
    curve_amp: float = 0.25
    curve_freq: float = 0.3
    k1: float = 2.0
    k2: float = 4.0
    intensity: float = 1.0
    falloff: float = 1.0
    n_frames: int = 64
    width: int = 160
    height: int = 128
    fx: float = 110.0
    fy: float = 110.0
    z_start: float = 0.6
    z_end: float = 3.4
    pitch_jitter: float = 0.05
    roll_jitter: float = 0.3
    seed: int = 0
    t_max: float = 50.0
    max_steps: int = 20000

    def __post_init__(self):
        if self.n_frames < 2:
            raise ValidationError("synth.n_frames must be >= 2")
        if self.width < 1 or self.height < 1:
            raise ValidationError("synth image size must be positive")
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValidationError("synth focal lengths must be positive")


@dataclass
class ModelConfig:
    """Anchor decoder shape plus scene initialization parameters."""

    feature_dim: int = 32
    offsets_per_anchor: int = 5
    dir_embed_dim: int = 10
    angle_embed_dim: int = 5
    geometry_mode: str = "view_embed"
    appearance_mode: str = "attenuated"
    alpha_min: float = 0.005
    frustum_margin: float = 0.15
    voxel_size: float = 0.05
    init_seed: int = 0

    def __post_init__(self):
        if self.voxel_size <= 0.0:
            raise ValidationError("model.voxel_size must be positive")
        self.decoder()  # surface decoder-shape errors at load time

    def decoder(self) -> DecoderConfig:
        try:
            return DecoderConfig(
                feature_dim=self.feature_dim,
                offsets_per_anchor=self.offsets_per_anchor,
                dir_embed_dim=self.dir_embed_dim,
                angle_embed_dim=self.angle_embed_dim,
                geometry_mode=self.geometry_mode,
                appearance_mode=self.appearance_mode,
                alpha_min=self.alpha_min,
                frustum_margin=self.frustum_margin)
        except ValueError as exc:
            raise ValidationError(f"model config: {exc}") from exc


@dataclass
class RunConfig:
    """Everything a run can tune, grouped by pipeline stage."""

    synth: SynthConfig = field(default_factory=SynthConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    backend: str = None


def config_to_dict(config: RunConfig) -> dict:
    doc = dataclasses.asdict(config)
    return doc


def _section_from_dict(cls, doc: dict, prefix: str):
    names = {f.name for f in dataclasses.fields(cls)}
    for key in doc:
        if key not in names:
            raise ValidationError(f"unknown config key {prefix}{key!r}")
    try:
        return cls(**doc)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad config section {prefix[:-1]}: {exc}") from exc


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ValidationError("config root must be a JSON object")
    known = {"synth", "model", "train", "backend"}
    for key in doc:
        if key not in known:
            raise ValidationError(f"unknown config key {key!r}")
    sections = {}
    for name, cls in (("synth", SynthConfig), ("model", ModelConfig),
                      ("train", TrainConfig)):
        sub = doc.get(name, {})
        if not isinstance(sub, dict):
            raise ValidationError(f"config section {name!r} must be an object")
        sections[name] = _section_from_dict(cls, sub, f"{name}.")
    backend = doc.get("backend")
    if backend is not None and backend not in ("python", "compiled"):
        raise ValidationError(f"unknown backend {backend!r}")
    return RunConfig(backend=backend, **sections)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="ascii") as f:
            doc = json.load(f)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"{path}: unreadable config ({exc})") from exc
    return config_from_dict(doc)


def save_config(config: RunConfig, path: str) -> None:
    with open(path, "w", encoding="ascii") as f:
        json.dump(config_to_dict(config), f, indent=1, sort_keys=True)
        f.write("\n")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except ValueError:
        return text


def apply_overrides(doc: dict, assignments) -> dict:
    """Apply `--set section.key=value` assignments to a config dict."""
    for item in assignments:
        if "=" not in item:
            raise ValidationError(f"override {item!r} is not key=value")
        dotted, text = item.split("=", 1)
        parts = dotted.split(".")
        node = doc
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = _parse_value(text)
    return doc


def resolve_config(path=None, assignments=()) -> RunConfig:
    """Load `path` (or defaults), apply overrides, and validate."""
    if path is not None:
        try:
            with open(path, "r", encoding="ascii") as f:
                doc = json.load(f)
        except (OSError, ValueError) as exc:
            raise ValidationError(f"{path}: unreadable config ({exc})") from exc
    else:
        doc = {}
    if not isinstance(doc, dict):
        raise ValidationError("config root must be a JSON object")
    apply_overrides(doc, assignments)
    return config_from_dict(doc)


def config_hash(config: RunConfig) -> str:
    """sha256 over the canonical JSON form; identical configs hash equal."""
    canon = json.dumps(config_to_dict(config), sort_keys=True,
                       separators=(",", ":"))
    return hashlib.sha256(canon.encode("ascii")).hexdigest()
