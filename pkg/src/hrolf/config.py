"""Plain-text run configuration.

Files are INI style (``key = value`` under ``[section]`` headers).  Known
sections: ``synth``, ``layer.<k>``, ``degrade``, ``model``, ``train``.
Command-line flags are applied on top of the file, so flags always win.
"""

from __future__ import annotations

import configparser
from dataclasses import MISSING, fields
from pathlib import Path

from .degrade import DegradationConfig
from .errors import ConfigError
from .model import ModelConfig, _coerce
from .synth import Layer, SynthConfig, two_layer_config
from .train import TrainConfig

SECTIONS = ("synth", "degrade", "model", "train")


def read_config(path=None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if path is None:
        return cp
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        cp.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for name in cp.sections():
        if name not in SECTIONS and not name.startswith("layer."):
            raise ConfigError(f"{path}: unknown section [{name}]")
    return cp


def section(cp: configparser.ConfigParser, name: str, overrides: dict | None = None) -> dict:
    """Section as a plain dict with non-None ``overrides`` applied last."""
    out = dict(cp[name]) if cp.has_section(name) else {}
    for k, v in (overrides or {}).items():
        if v is not None:
            out[k] = v
    return out


def _build(cls, values: dict, what: str):
    known = {f.name: f for f in fields(cls)}
    kw = {}
    for k, v in values.items():
        if k not in known:
            raise ConfigError(f"unknown {what} option {k!r}")
        default = known[k].default
        kw[k] = _coerce(v, 0.0 if default is MISSING else default)
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def model_config(cp, overrides: dict | None = None) -> ModelConfig:
    return ModelConfig.from_dict(section(cp, "model", overrides)).validate()


def train_config(cp, overrides: dict | None = None) -> TrainConfig:
    return TrainConfig.from_dict(section(cp, "train", overrides)).validate()


def degradation_config(cp, overrides: dict | None = None) -> DegradationConfig:
    values = section(cp, "degrade", overrides)
    values.pop("angular", None)
    cfg = _build(DegradationConfig, values, "degrade")
    cfg.validate()
    return cfg


def _layer(values: dict, name: str) -> Layer:
    values = dict(values)
    region = values.pop("region", None)
    layer = _build(Layer, values, name)
    if region is not None and str(region).strip().lower() not in ("", "none"):
        try:
            parts = tuple(float(p) for p in str(region).split(","))
        except ValueError:
            raise ConfigError(f"{name}: region must be x0,y0,x1,y1") from None
        if len(parts) != 4:
            raise ConfigError(f"{name}: region must be x0,y0,x1,y1")
        layer = Layer(layer.disparity, layer.depth_order, layer.texture_seed, layer.texture, parts)
    return layer


def synth_config(cp, overrides: dict | None = None) -> tuple[SynthConfig, int]:
    """Scene description plus seed.

    ``preset`` is ``two-layer`` (default) or ``custom``; a custom scene lists
    its planes in ``[layer.0]``, ``[layer.1]``, ... sections.
    """
    values = {k.lower(): v for k, v in section(cp, "synth", overrides).items()}
    preset = values.pop("preset", "two-layer")
    seed = int(values.pop("seed", 0))
    dims = {k.upper(): int(values.pop(k)) for k in ("s", "t", "x", "y", "c") if k in values}
    rest = {k: _coerce(v, getattr(SynthConfig(), k)) for k, v in values.items()
            if k in ("smoothness", "checker_period")}
    unknown = set(values) - set(rest)
    if unknown:
        raise ConfigError(f"unknown synth option(s) {sorted(unknown)}")
    layer_sections = sorted((s for s in cp.sections() if s.startswith("layer.")), key=lambda s: s.split(".", 1)[1])
    if preset == "two-layer":
        if layer_sections:
            raise ConfigError("layer sections need preset = custom")
        # the preset places its square relative to the spatial extent
        base = two_layer_config(**dims)
        layers = base.layers
        kw = dict(S=base.S, T=base.T, X=base.X, Y=base.Y, C=base.C)
    elif preset == "custom":
        if not layer_sections:
            raise ConfigError("preset = custom needs at least one [layer.<k>] section")
        layers = tuple(_layer(dict(cp[s]), s) for s in layer_sections)
        kw = dict(dims)
    else:
        raise ConfigError(f"unknown synth preset {preset!r}")
    cfg = SynthConfig(layers=layers, **kw, **rest)
    cfg.validate()
    return cfg, seed
