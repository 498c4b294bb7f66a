"""PSNR / SSIM over sub-aperture images and light-field evaluation reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ShapeError
from .lightfield import LightField

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
_LUMA = np.array([0.299, 0.587, 0.114])


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give ``inf``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"psnr: shape mismatch {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ConfigError("psnr peak must be positive")
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gauss1d(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - size // 2
    g = np.exp(-(r ** 2) / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = g.size
    tmp = sliding_window_view(img, n, axis=0) @ g
    return sliding_window_view(tmp, n, axis=1) @ g


def ssim(a: np.ndarray, b: np.ndarray, peak: float = 255.0) -> float:
    """Mean SSIM over all fully-contained 11x11 Gaussian (sigma 1.5) windows."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 3 and a.shape[-1] == 1:
        a, b = a[..., 0], b[..., 0]
    if a.shape != b.shape:
        raise ShapeError(f"ssim: shape mismatch {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ShapeError("ssim expects single-channel 2-D images")
    if min(a.shape) < SSIM_WINDOW:
        raise ConfigError(f"image {a.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    g = _gauss1d(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a ** 2
    var_b = _filter_valid(b * b, g) - mu_b ** 2
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def to_luma(views: np.ndarray) -> np.ndarray:
    """Collapse a trailing channel axis to luma (BT.601 weights for RGB)."""
    if views.shape[-1] == 1:
        return views[..., 0]
    if views.shape[-1] == 3:
        return views @ _LUMA
    raise ShapeError(f"cannot convert {views.shape[-1]} channels to luma")


@dataclass
class ViewScore:
    s: int
    t: int
    psnr: float
    ssim: float


@dataclass
class EvalReport:
    views: list[ViewScore] = field(default_factory=list)
    mode: str = "all-views"

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([v.psnr for v in self.views])) if self.views else math.nan

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([v.ssim for v in self.views])) if self.views else math.nan

    def records(self) -> list[dict]:
        rows = [{"s": v.s, "t": v.t, "psnr": v.psnr, "ssim": v.ssim} for v in self.views]
        rows.append({"s": "mean", "t": "mean", "psnr": self.mean_psnr, "ssim": self.mean_ssim})
        return rows

    def to_text(self) -> str:
        lines = [f"mode {self.mode}", f"views {len(self.views)}"]
        for v in self.views:
            lines.append(f"view {v.s} {v.t} psnr {v.psnr:.4f} ssim {v.ssim:.6f}")
        lines.append(f"average psnr {self.mean_psnr:.4f} ssim {self.mean_ssim:.6f}")
        return "\n".join(lines) + "\n"

    def to_tsv(self) -> str:
        out = ["s\tt\tpsnr\tssim"]
        for r in self.records():
            out.append(f"{r['s']}\t{r['t']}\t{r['psnr']:.6f}\t{r['ssim']:.6f}")
        return "\n".join(out) + "\n"


def eval_lf(
    pred: LightField,
    truth: LightField,
    mode: str = "all-views",
    input_views: tuple[Sequence[int], Sequence[int]] | None = None,
    peak: float = 255.0,
) -> EvalReport:
    """Per-view PSNR/SSIM on luma plus averages.

    ``synthesized-only`` skips views whose (s, t) both appear in
    ``input_views`` (the views kept by angular decimation).
    """
    if pred.shape != truth.shape:
        raise ShapeError(f"eval: shape mismatch {pred.shape} vs {truth.shape}")
    if mode not in ("all-views", "synthesized-only"):
        raise ConfigError(f"unknown eval mode {mode!r}")
    if mode == "synthesized-only" and input_views is None:
        raise ConfigError("synthesized-only evaluation needs the input view indices")
    p = to_luma(np.asarray(pred.data, np.float64))
    h = to_luma(np.asarray(truth.data, np.float64))
    skip = set()
    if mode == "synthesized-only":
        skip = {(s, t) for s in input_views[0] for t in input_views[1]}
    report = EvalReport(mode=mode)
    for s in range(pred.S):
        for t in range(pred.T):
            if (s, t) in skip:
                continue
            report.views.append(ViewScore(s, t, psnr(p[s, t], h[s, t], peak), ssim(p[s, t], h[s, t], peak)))
    return report
