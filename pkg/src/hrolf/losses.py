"""Pixel-wise and perceptual losses for the two-stage objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, lrelu, mean_all, square, sub, subsample_spatial, sum_all
from .errors import ConfigError, ShapeError
from .lightfield import LightField
from .ops import Kernel4D, hconv4d


@dataclass(frozen=True)
class LossWeights:
    """Weights of the reconstruction (``alpha``) and perceptual (``beta``) terms."""

    alpha: float = 1.0
    beta: float = 0.01

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ConfigError(f"loss weights need alpha, beta >= 0 and alpha + beta > 0, got {self}")


def _as_tensor(v) -> Tensor:
    if isinstance(v, Tensor):
        return v
    if isinstance(v, LightField):
        return Tensor(v.data)
    return Tensor(np.asarray(v))


def reconstruction_loss(pred, target, normalize: bool = True) -> Tensor:
    """Sum of squared differences over every sample; divided by the count if ``normalize``."""
    p, t = _as_tensor(pred), _as_tensor(target)
    if p.shape != t.shape:
        raise ShapeError(f"reconstruction loss: shape mismatch {p.shape} vs {t.shape}")
    if t.dtype != p.dtype:
        t = Tensor(t.data.astype(p.dtype))
    diff = square(sub(p, t))
    return mean_all(diff) if normalize else sum_all(diff)


class FeatureNet:
    """Fixed convolutional feature extractor applied to each view independently.

    Three stride-2 stages of 3x3 spatial convolution followed by LReLU.  The
    angular kernel extent is 1, so views never mix.  Weights are drawn once
    from a seeded He-normal distribution and never trained.
    """

    def __init__(self, in_channels: int = 1, widths=(8, 16, 32), seed: int = 1234,
                 slope: float = 0.2, dtype=np.float32, weights: list[tuple[np.ndarray, np.ndarray]] | None = None):
        self.slope = slope
        self.in_channels = in_channels
        self.stages: list[Kernel4D] = []
        if weights is not None:
            for w, b in weights:
                self.stages.append(Kernel4D(Tensor(np.asarray(w, dtype)), Tensor(np.asarray(b, dtype))))
            if self.stages and self.stages[0].c_in != in_channels:
                raise ShapeError("feature weights do not match the image channel count")
            return
        rng = np.random.default_rng(seed)
        cin = in_channels
        for cout in widths:
            std = np.sqrt(2.0 / (9 * cin))
            w = rng.normal(0.0, std, (3, 3, 1, 1, cin, cout)).astype(dtype)
            self.stages.append(Kernel4D(Tensor(w), Tensor(np.zeros(cout, dtype))))
            cin = cout

    def astype(self, dtype) -> "FeatureNet":
        return FeatureNet(self.in_channels, slope=self.slope, dtype=dtype,
                          weights=[(k.weight.data, k.bias.data) for k in self.stages])

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for i, k in enumerate(self.stages):
            out[f"phi.{i}.w"] = k.weight.data
            out[f"phi.{i}.b"] = k.bias.data
        return out

    def __call__(self, x: Tensor) -> Tensor:
        for k in self.stages:
            x = lrelu(subsample_spatial(hconv4d(x, k), 2), self.slope)
        return x


def perceptual_loss(pred, target, phi: FeatureNet) -> Tensor:
    """Average over views of the per-view mean squared feature difference.

    Every view yields the same number of feature elements, so this equals
    the mean over all feature elements of the whole field.
    """
    p, t = _as_tensor(pred), _as_tensor(target)
    if p.shape != t.shape:
        raise ShapeError(f"perceptual loss: shape mismatch {p.shape} vs {t.shape}")
    if t.dtype != p.dtype:
        t = Tensor(t.data.astype(p.dtype))
    target_feat = Tensor(phi(Tensor(t.data)).data)  # constant
    return mean_all(square(sub(phi(p), target_feat)))


def total_loss(recon, perceptual, w: LossWeights):
    """``alpha * recon + beta * perceptual``; works on floats or Tensors."""
    return recon * w.alpha + perceptual * w.beta
