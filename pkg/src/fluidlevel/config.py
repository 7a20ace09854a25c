"""JSON run configuration shared by the CLI subcommands.

Values come from the built-in defaults, then the ``--config`` file, then
command-line flags, each overriding the previous.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .optics import CameraModel, MediumPair, WellGeometry
from .simulate import MeniscusProfile, SceneConfig
from .stabilize import StabilizerConfig
from .vision import VisionParams


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    vision: VisionParams = field(default_factory=VisionParams)
    stabilizer: StabilizerConfig = field(default_factory=StabilizerConfig)
    model: str | None = None
    source: str | None = None
    frame_interval: float = 0.1
    outputs: dict = field(default_factory=dict)


def _build(cls, doc, where, nested=None):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = dict(doc)
    for key, sub in (nested or {}).items():
        if key in kwargs:
            kwargs[key] = _build(sub, kwargs[key], f"{where}.{key}")
    if cls is CameraModel and kwargs.get("principal_point") is not None:
        kwargs["principal_point"] = tuple(kwargs["principal_point"])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def scene_from_dict(doc: dict) -> SceneConfig:
    return _build(SceneConfig, doc, "scene", {
        "geometry": WellGeometry, "media": MediumPair,
        "camera": CameraModel, "meniscus": MeniscusProfile,
    })


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(doc) - {f.name for f in dataclasses.fields(RunConfig)})
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    cfg = RunConfig()
    if "scene" in doc:
        cfg.scene = scene_from_dict(doc["scene"])
    if "vision" in doc:
        cfg.vision = _build(VisionParams, doc["vision"], "vision")
    if "stabilizer" in doc:
        cfg.stabilizer = _build(StabilizerConfig, doc["stabilizer"], "stabilizer")
    for key in ("model", "source"):
        if key in doc:
            if doc[key] is not None and not isinstance(doc[key], str):
                raise ConfigError(f"{key} must be a string")
            setattr(cfg, key, doc[key])
    if "frame_interval" in doc:
        fi = doc["frame_interval"]
        if not isinstance(fi, (int, float)) or fi <= 0:
            raise ConfigError("frame_interval must be a positive number")
        cfg.frame_interval = float(fi)
    if "outputs" in doc:
        if not isinstance(doc["outputs"], dict):
            raise ConfigError("outputs must be an object")
        cfg.outputs = dict(doc["outputs"])
    if cfg.model is not None and not Path(cfg.model).is_file():
        raise ConfigError(f"model file {cfg.model} does not exist")
    return cfg


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(doc)
