"""Non-learned upsampling baselines."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .autodiff import Tensor
from .errors import ConfigError
from .lightfield import LightField
from .ops import angular_linear_interp

_METHODS = {"bicubic": Image.Resampling.BICUBIC, "linear": Image.Resampling.BILINEAR}


def upsample_spatial(lf: LightField, scale: int, method: str = "bicubic") -> LightField:
    """Resize every view by ``scale``.

    The sampling grid matches top-left anchored decimation: HR index ``x``
    reads LR coordinate ``x / scale``, so LR sample ``k`` lands exactly on
    HR sample ``scale * k``.
    """
    if method not in _METHODS:
        raise ConfigError(f"unknown baseline method {method!r}")
    if scale < 1:
        raise ConfigError("scale must be >= 1")
    if scale == 1:
        return lf
    S, T, X, Y, C = lf.shape
    # PIL maps output pixel centre u+0.5 to box0 + (u+0.5)/scale in source area coordinates
    # PIL rejects boxes past the image edge, so edge-pad by the kernel support
    pad = 2
    b0 = 0.5 - 0.5 / scale + pad
    box = (b0, b0, b0 + Y, b0 + X)
    out = np.empty((S, T, X * scale, Y * scale, C), np.float64)
    for s in range(S):
        for t in range(T):
            for c in range(C):
                view = np.pad(lf.data[s, t, :, :, c], pad, mode="edge")
                img = Image.fromarray(np.ascontiguousarray(view, dtype=np.float32))
                out[s, t, :, :, c] = np.asarray(img.resize((Y * scale, X * scale), _METHODS[method], box=box))
    return LightField(out.astype(lf.data.dtype))


def upsample_angular(lf: LightField, s_out: int, t_out: int) -> LightField:
    """Linear interpolation of the view grid."""
    return LightField(angular_linear_interp(Tensor(lf.data), s_out, t_out).data)


def baseline(lf: LightField, scale: int = 1, angular: tuple[int, int] | None = None,
             method: str = "bicubic") -> LightField:
    out = upsample_spatial(lf, scale, method)
    if angular is not None and tuple(angular) != out.angular:
        out = upsample_angular(out, *angular)
    return out
