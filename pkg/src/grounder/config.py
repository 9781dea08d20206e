"""Model and run configuration.

The default configuration is the desk-scale setup (small enough that
gradient checking and end-to-end training finish in minutes on a
laptop CPU). The named presets carry the published full-scale
hyperparameters and are selected with ``preset("tacos")`` etc.

Config files are flat ``key = value`` text; every key matches a field
below, and CLI ``--set key=value`` overrides win over the file.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    # architecture
    d_h: int = 64
    heads: int = 4
    d_emb: int = 64
    d_f: int = 16
    n_v: int = 32
    max_nq: int = 12
    ffn_multiple: int = 4
    kernel_sizes: tuple = (8, 16)
    stride_ratio: float = 0.125
    stride_frames: int = 0  # when > 0, absolute stride in frames for every scale
    attention: str = "gated"  # gated | multihead | soft
    fusion: str = "full"  # full | qv_only | vq_only | video_only | concat | matrix
    # training
    tau: float = 0.55
    alpha: float = 0.005
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 60
    patience: int = 10
    seed: int = 0
    dtype: str = "float32"
    # inference / evaluation
    nms_threshold: float = 0.5
    top_n: tuple = (1, 5)
    iou_thresholds: tuple = (0.3, 0.5, 0.7)


PRESETS = {
    "desk": {},
    "activitynet": dict(
        d_h=512,
        heads=8,
        d_emb=300,
        d_f=4096,
        n_v=200,
        max_nq=20,
        kernel_sizes=(16, 32, 64, 96, 128, 160, 192),
        stride_ratio=0.25,
        alpha=0.001,
        lr=8e-4,
        batch_size=128,
    ),
    "tacos": dict(
        d_h=512,
        heads=8,
        d_emb=300,
        d_f=4096,
        n_v=200,
        max_nq=20,
        kernel_sizes=(8, 16, 32, 64),
        stride_ratio=0.125,
        alpha=0.005,
        lr=4e-4,
        batch_size=64,
    ),
    "charades": dict(
        d_h=512,
        heads=4,
        d_emb=300,
        d_f=1024,
        n_v=64,
        max_nq=20,
        kernel_sizes=(16, 24, 32, 40),
        stride_ratio=0.125,
        alpha=0.005,
        lr=4e-4,
        batch_size=64,
    ),
}


def preset(name: str) -> ModelConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ModelConfig(**PRESETS[name])


_FIELDS = {f.name: f for f in dataclasses.fields(ModelConfig)}


def _parse_value(field_name: str, raw: str):
    if field_name not in _FIELDS:
        raise ConfigError(f"unknown config key {field_name!r}")
    default = getattr(ModelConfig(), field_name)
    raw = raw.strip()
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(Fraction(raw)) if "/" in raw else float(raw)
    if isinstance(default, tuple):
        parts = [p for p in raw.replace(",", " ").split() if p]
        elem = float if any("." in p for p in parts) else int
        return tuple(elem(p) for p in parts)
    return raw


def load_config(path) -> ModelConfig:
    """Parse a flat key=value file; a ``preset`` line selects the base."""
    pairs = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, val = (part.strip() for part in line.split("=", 1))
            pairs.append((key, val))
    base = ModelConfig()
    rest = []
    for key, val in pairs:
        if key == "preset":
            base = preset(val)
        else:
            rest.append((key, val))
    for key, val in rest:
        setattr(base, key, _parse_value(key, val))
    return base


def apply_overrides(cfg: ModelConfig, overrides) -> ModelConfig:
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, val = (part.strip() for part in item.split("=", 1))
        setattr(cfg, key, _parse_value(key, val))
    return cfg


def config_text(cfg: ModelConfig) -> str:
    lines = []
    for f in dataclasses.fields(ModelConfig):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            val = ",".join(str(v) for v in val)
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"


def validate(cfg: ModelConfig) -> list[str]:
    """Raise on hard errors; return soft warnings."""
    if cfg.d_h % cfg.heads != 0:
        raise ConfigError(f"d_h={cfg.d_h} must be divisible by heads={cfg.heads}")
    if cfg.d_h % 2 != 0:
        raise ConfigError(f"d_h={cfg.d_h} must be even (biGRU halves)")
    if not (0.0 < cfg.tau < 1.0):
        raise ConfigError(f"tau={cfg.tau} must lie in (0, 1)")
    if not cfg.kernel_sizes:
        raise ConfigError("kernel_sizes must not be empty")
    if cfg.batch_size < 1 or cfg.n_v < 2 or cfg.max_nq < 1:
        raise ConfigError("batch_size, n_v and max_nq must be positive")
    if cfg.attention not in ("gated", "multihead", "soft"):
        raise ConfigError(f"unknown attention kind {cfg.attention!r}")
    if cfg.fusion not in ("full", "qv_only", "vq_only", "video_only", "concat", "matrix"):
        raise ConfigError(f"unknown fusion mode {cfg.fusion!r}")
    if cfg.dtype not in ("float32", "float64"):
        raise ConfigError(f"dtype must be float32 or float64, got {cfg.dtype!r}")
    warnings = []
    for k in cfg.kernel_sizes:
        if k > cfg.n_v:
            warnings.append(f"kernel {k} exceeds n_v={cfg.n_v}; that scale will be skipped")
    if all(k > cfg.n_v for k in cfg.kernel_sizes):
        raise ConfigError("every kernel size exceeds n_v; no candidate windows")
    return warnings
