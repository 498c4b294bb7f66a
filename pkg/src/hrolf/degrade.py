"""Spatial degradation (blur, decimate, add noise) and angular view decimation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, RangeError
from .lightfield import LightField


@dataclass(frozen=True)
class DegradationConfig:
    scale: int = 2
    blur_size: int = 7
    blur_sigma: float = 1.2
    noise_std: float = 1.0  # on the [0, 255] scale
    noise_seed: int = 0

    def validate(self) -> None:
        if self.scale < 1:
            raise ConfigError(f"scale must be >= 1, got {self.scale}")
        if self.blur_sigma <= 0:
            raise ConfigError(f"blur sigma must be positive, got {self.blur_sigma}")
        if self.blur_size < 1 or self.blur_size % 2 == 0:
            raise ConfigError(f"blur window must be odd, got {self.blur_size}")
        if self.noise_std < 0:
            raise ConfigError("noise std must be non-negative")


def gaussian_kernel(size: int = 7, sigma: float = 1.2) -> np.ndarray:
    """Normalized 2-D Gaussian on centered integer offsets."""
    if size < 1 or size % 2 == 0:
        raise ConfigError(f"Gaussian window must be odd, got {size}")
    if sigma <= 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    r = np.arange(size) - size // 2
    k = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * sigma * sigma))
    return k / k.sum()


def blur_views(views: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Correlate every view of ``(S, T, X, Y, C)`` with ``kernel``, reflect padding.

    Reflect means mirroring without repeating the edge sample (``d c b | a b c d``).
    """
    h = kernel.shape[0] // 2
    X, Y = views.shape[2:4]
    if h and (X <= h or Y <= h):
        raise ConfigError(f"views {X}x{Y} too small for reflect padding of {h}")
    padded = np.pad(views, ((0, 0), (0, 0), (h, h), (h, h), (0, 0)), mode="reflect")
    out = np.zeros(views.shape, dtype=np.result_type(views.dtype, kernel.dtype))
    for i in range(kernel.shape[0]):
        for j in range(kernel.shape[1]):
            out += kernel[i, j] * padded[:, :, i:i + X, j:j + Y, :]
    return out


def degrade_spatial(lf: LightField, cfg: DegradationConfig = DegradationConfig()) -> LightField:
    """Blur each view, keep every ``scale``-th sample from the top-left, add noise.

    Noise streams are independent per view and derived from ``cfg.noise_seed``.
    """
    cfg.validate()
    if lf.X % cfg.scale or lf.Y % cfg.scale:
        raise ConfigError(f"spatial extent {lf.X}x{lf.Y} not divisible by scale {cfg.scale}")
    views = lf.data
    if cfg.blur_size > 1:
        views = blur_views(views, gaussian_kernel(cfg.blur_size, cfg.blur_sigma))
    low = views[:, :, ::cfg.scale, ::cfg.scale, :]
    if cfg.noise_std > 0:
        low = low + view_noise(low.shape, cfg.noise_std, cfg.noise_seed)
    return LightField(low.astype(lf.data.dtype))


def view_noise(shape: tuple[int, ...], std: float, seed: int) -> np.ndarray:
    """Gaussian noise with one child RNG stream per (s, t) view."""
    S, T = shape[:2]
    children = np.random.SeedSequence(seed).spawn(S * T)
    noise = np.empty(shape)
    for k, child in enumerate(children):
        noise[k // T, k % T] = np.random.default_rng(child).normal(0.0, std, shape[2:])
    return noise


def task_indices(n_src: int, n_keep: int) -> list[int]:
    """Endpoint-inclusive uniform subset of ``range(n_src)`` of size ``n_keep``."""
    if n_keep == n_src:
        return list(range(n_src))
    if n_keep < 1 or n_keep > n_src:
        raise RangeError(f"cannot keep {n_keep} of {n_src} views")
    if n_keep == 1:
        return [(n_src - 1) // 2]
    step, rem = divmod(n_src - 1, n_keep - 1)
    if rem:
        raise RangeError(f"{n_keep} views do not form a uniform grid over {n_src}")
    return list(range(0, n_src, step))


def parse_angular_target(target: str) -> tuple[int, int]:
    try:
        a, b = target.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise ConfigError(f"angular target must look like '3x3', got {target!r}") from None


def decimate_angular(
    lf: LightField,
    target: str | tuple[int, int] | tuple[Sequence[int], Sequence[int]],
) -> LightField:
    """Keep a subset of views.

    ``target`` is either a grid size (``"3x3"`` or ``(3, 3)``), which selects
    an endpoint-inclusive uniform grid, or explicit ``(s_indices, t_indices)``.
    """
    if isinstance(target, str):
        target = parse_angular_target(target)
    ks, kt = target
    if isinstance(ks, (int, np.integer)):
        s_idx, t_idx = task_indices(lf.S, int(ks)), task_indices(lf.T, int(kt))
    else:
        s_idx, t_idx = list(ks), list(kt)
    for idx, n, axis in ((s_idx, lf.S, "s"), (t_idx, lf.T, "t")):
        if not idx or any(i < 0 or i >= n for i in idx):
            raise RangeError(f"{axis} indices {idx} outside [0, {n})")
    return LightField(lf.data[np.ix_(s_idx, t_idx)])
