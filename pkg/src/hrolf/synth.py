"""Layered synthetic light fields with known disparity.

Each layer is a fronto-parallel textured plane.  View (s, t) samples the
layer texture at ``(x + d*(s - s0), y + d*(t - t0))`` with bilinear
interpolation, where (s0, t0) is the central view and ``d`` the layer
disparity in pixels per view step.  Layers may be restricted to a
rectangle (in central-view coordinates); the nearest covering layer wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigError
from .lightfield import LightField, center_index


@dataclass(frozen=True)
class Layer:
    disparity: float
    depth_order: int = 0  # 0 is nearest to the camera
    texture_seed: int = 0
    texture: str = "noise"  # "noise" or "checker"
    region: tuple[float, float, float, float] | None = None  # (x0, y0, x1, y1), half-open


@dataclass(frozen=True)
class SynthConfig:
    layers: tuple[Layer, ...] = field(default_factory=lambda: (Layer(0.0),))
    S: int = 9
    T: int = 9
    X: int = 64
    Y: int = 64
    C: int = 1
    smoothness: float = 1.5  # blur sigma of the noise texture, texels
    checker_period: int = 8

    def validate(self) -> None:
        if not self.layers:
            raise ConfigError("synth config needs at least one layer")
        if min(self.S, self.T, self.X, self.Y) < 1:
            raise ConfigError("synth extents must be >= 1")
        if self.C not in (1, 3):
            raise ConfigError("synth channel count must be 1 or 3")
        orders = [layer.depth_order for layer in self.layers]
        if len(set(orders)) != len(orders):
            raise ConfigError("layer depth orders must be distinct")
        for layer in self.layers:
            if not math.isfinite(layer.disparity):
                raise ConfigError("layer disparity must be finite")
            if layer.texture not in ("noise", "checker"):
                raise ConfigError(f"unknown texture kind {layer.texture!r}")
            if layer.region is not None:
                x0, y0, x1, y1 = layer.region
                if not (x1 > x0 and y1 > y0):
                    raise ConfigError(f"empty layer region {layer.region}")


def two_layer_config(S: int = 9, T: int = 9, X: int = 64, Y: int = 64, C: int = 1) -> SynthConfig:
    """Textured background with a nearer checkered square in front of it."""
    fg = (X * 0.3, Y * 0.3, X * 0.7, Y * 0.7)
    return SynthConfig(
        layers=(
            Layer(disparity=1.0, depth_order=0, texture_seed=1, texture="checker", region=fg),
            Layer(disparity=-0.5, depth_order=1, texture_seed=2, texture="noise"),
        ),
        S=S, T=T, X=X, Y=Y, C=C,
    )


def _margin(cfg: SynthConfig) -> int:
    reach = max(cfg.S, cfg.T)
    return int(math.ceil(max(abs(layer.disparity) for layer in cfg.layers) * reach)) + 2


def make_texture(layer: Layer, cfg: SynthConfig, seed: int, margin: int) -> np.ndarray:
    """Texture array of shape (X + 2m, Y + 2m, C); texel (m, m) is pixel (0, 0)."""
    shape = (cfg.X + 2 * margin, cfg.Y + 2 * margin)
    rng = np.random.default_rng([seed, layer.texture_seed])
    chans = []
    for _ in range(cfg.C):
        if layer.texture == "noise":
            tex = gaussian_filter(rng.standard_normal(shape), cfg.smoothness, mode="wrap")
            tex = 128.0 + 50.0 * tex / tex.std()
        else:
            u = np.arange(shape[0])[:, None] - margin
            v = np.arange(shape[1])[None, :] - margin
            lo, hi = rng.uniform(30, 90), rng.uniform(170, 230)
            tex = np.where(((u // cfg.checker_period) + (v // cfg.checker_period)) % 2 == 0, lo, hi)
        chans.append(np.clip(tex, 0.0, 255.0))
    return np.stack(chans, axis=-1)


def bilinear(tex: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample ``tex`` at real coordinates; integral coordinates return texels exactly."""
    u0 = np.floor(u).astype(int)
    v0 = np.floor(v).astype(int)
    fu = (u - u0)[..., None]
    fv = (v - v0)[..., None]
    u1 = np.minimum(u0 + 1, tex.shape[0] - 1)
    v1 = np.minimum(v0 + 1, tex.shape[1] - 1)
    a = tex[u0, v0] + fv * (tex[u0, v1] - tex[u0, v0])
    b = tex[u1, v0] + fv * (tex[u1, v1] - tex[u1, v0])
    return a + fu * (b - a)


def synth_scene(cfg: SynthConfig, seed: int = 0) -> tuple[LightField, np.ndarray]:
    """Render a layered scene.

    Returns the light field (float64, [0, 255]) and the ground-truth
    disparity of the visible layer at every sample, shape (S, T, X, Y).
    """
    cfg.validate()
    m = _margin(cfg)
    s0, t0 = center_index(cfg.S), center_index(cfg.T)
    ordered = sorted(cfg.layers, key=lambda layer: layer.depth_order)
    textures = [make_texture(layer, cfg, seed, m) for layer in ordered]

    out = np.zeros((cfg.S, cfg.T, cfg.X, cfg.Y, cfg.C))
    disp = np.zeros((cfg.S, cfg.T, cfg.X, cfg.Y))
    x = np.arange(cfg.X, dtype=float)[:, None]
    y = np.arange(cfg.Y, dtype=float)[None, :]
    for s in range(cfg.S):
        for t in range(cfg.T):
            filled = np.zeros((cfg.X, cfg.Y), bool)
            for layer, tex in zip(ordered, textures):
                u = np.broadcast_to(x + layer.disparity * (s - s0), (cfg.X, cfg.Y))
                v = np.broadcast_to(y + layer.disparity * (t - t0), (cfg.X, cfg.Y))
                if layer.region is None:
                    cover = np.ones((cfg.X, cfg.Y), bool)
                else:
                    x0, y0, x1, y1 = layer.region
                    cover = (u >= x0) & (u < x1) & (v >= y0) & (v < y1)
                take = cover & ~filled
                if take.any():
                    out[s, t][take] = bilinear(tex, u[take] + m, v[take] + m)
                    disp[s, t][take] = layer.disparity
                    filled |= take
    return LightField(out), disp
