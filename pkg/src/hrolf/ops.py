"""Differentiable light-field layers: HConv, AGBN, pixel shuffle, angular interpolation.

Feature tensors are laid out ``(..., S, T, X, Y, C)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .autodiff import Tensor, record
from .errors import ConfigError, ShapeError


@dataclass
class Kernel4D:
    """HConv filter bank.

    ``weight`` has shape ``(s1, s2, a1, a2, c_in, c_out)``: spatial x, spatial y,
    angular s, angular t, then channels.  ``bias`` has shape ``(c_out,)``.
    """

    weight: Tensor
    bias: Tensor

    def __post_init__(self):
        w = self.weight.shape
        if len(w) != 6:
            raise ShapeError(f"kernel weight must be 6-D, got {w}")
        if any(k % 2 == 0 for k in w[:4]):
            raise ShapeError(f"kernel extents must be odd, got {w[:4]}")
        if self.bias.shape != (w[5],):
            raise ShapeError(f"bias shape {self.bias.shape} does not match c_out={w[5]}")

    @property
    def c_in(self) -> int:
        return self.weight.shape[4]

    @property
    def c_out(self) -> int:
        return self.weight.shape[5]


def _spatial_cols(x: np.ndarray, s1: int, s2: int, a1: int, a2: int) -> np.ndarray:
    """Zero-pad all four axes and gather s1 x s2 spatial windows.

    Returns ``(..., S+2*(a1//2), (T+2*(a2//2))*X*Y, s1*s2*C)`` with the last axis
    ordered (i, j, c).  Angular offsets are handled later by slicing: the
    t offset ``q`` selects the contiguous row block ``[q*X*Y, (q+T)*X*Y)``.
    """
    *lead, S, T, X, Y, C = x.shape
    L = len(lead)
    pad = [(0, 0)] * L + [(a1 // 2,) * 2, (a2 // 2,) * 2, (s1 // 2,) * 2, (s2 // 2,) * 2, (0, 0)]
    xp = np.pad(x, pad)
    Sp, Tp = xp.shape[L], xp.shape[L + 1]
    win = sliding_window_view(xp, (s1, s2), axis=(L + 2, L + 3))
    # (..., Sp, Tp, X, Y, C, s1, s2) -> (..., Sp, Tp, X, Y, s1, s2, C)
    cols = np.ascontiguousarray(win.transpose(*range(L + 4), L + 5, L + 6, L + 4))
    return cols.reshape(*lead, Sp, Tp * X * Y, s1 * s2 * C)


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray | None):
    s1, s2, a1, a2, ci, co = w.shape
    *lead, S, T, X, Y, _ = x.shape
    cols = _spatial_cols(x, s1, s2, a1, a2)
    n = X * Y
    out = None
    for p in range(a1):
        for q in range(a2):
            term = np.matmul(cols[..., p:p + S, q * n:(q + T) * n, :], w[:, :, p, q].reshape(-1, co))
            if out is None:
                out = term
            else:
                out += term
    if b is not None:
        out += b
    return out.reshape(*lead, S, T, X, Y, co), cols


def hconv4d(x: Tensor, k: Kernel4D) -> Tensor:
    """4-D convolution over (s, t, x, y) with zero "same" padding.

    Cross-correlation orientation (kernel not flipped)::

        out[s,t,x,y,o] = bias[o] + sum k[i,j,p,q,ci,o]
                         * in[s+p-a1//2, t+q-a2//2, x+i-s1//2, y+j-s2//2, ci]
    """
    if x.ndim < 5:
        raise ShapeError(f"hconv4d expects (..., S, T, X, Y, C), got {x.shape}")
    if x.shape[-1] != k.c_in:
        raise ShapeError(f"hconv4d: input has {x.shape[-1]} channels, kernel expects {k.c_in}")
    w = k.weight.data
    out, cols = _conv_forward(x.data, w, k.bias.data)

    def vjp(g):
        s1, s2, a1, a2, ci, co = w.shape
        *lead, S, T, X, Y, _ = g.shape
        gs = g.reshape(*lead, S, T * X * Y, co)
        gw = np.empty_like(w)
        for p in range(a1):
            for q in range(a2):
                win = cols[..., p:p + S, q * X * Y:(q + T) * X * Y, :]
                part = np.matmul(win.swapaxes(-1, -2), gs)
                gw[:, :, p, q] = part.reshape(-1, *part.shape[-2:]).sum(axis=0).reshape(s1, s2, ci, co)
        gb = g.reshape(-1, co).sum(axis=0)
        wflip = np.ascontiguousarray(w[::-1, ::-1, ::-1, ::-1].swapaxes(4, 5))
        gx, _ = _conv_forward(g, wflip, None)
        return gx, gw, gb

    return record("hconv4d", (x, k.weight, k.bias), out, vjp)


@dataclass
class RunningStats:
    """Exponential moving averages used by AGBN in eval mode."""

    mean: np.ndarray
    var: np.ndarray
    momentum: float = 0.9

    @classmethod
    def fresh(cls, channels: int, dtype=np.float32, momentum: float = 0.9) -> "RunningStats":
        return cls(np.zeros(channels, dtype), np.ones(channels, dtype), momentum)


def agbn(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    eps: float = 1e-5,
    training: bool = True,
    stats: RunningStats | None = None,
) -> Tensor:
    """Aperture group batch normalization.

    Statistics for channel ``n`` pool every batch item, view (s, t) and
    spatial position jointly, so all sub-aperture images of a channel share
    one mean/variance.  Normalizes by ``sqrt(var + eps)``.  In eval mode the
    running statistics are used and the op is a fixed affine map.
    """
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"agbn: gamma/beta must have shape ({c},)")
    if eps <= 0:
        raise ConfigError("agbn eps must be positive")
    axes = tuple(range(x.ndim - 1))
    xd = x.data
    if training:
        mu = xd.mean(axis=axes)
        flat = xd.reshape(-1, c)
        # mean of a constant channel must be that constant, not a rounded sum
        const = flat.max(axis=0) == flat.min(axis=0)
        mu = np.where(const, flat[0], mu).astype(xd.dtype)
        xc = xd - mu
        var = (xc * xc).mean(axis=axes)
        if stats is not None:
            m = stats.momentum
            stats.mean = (m * stats.mean + (1 - m) * mu).astype(stats.mean.dtype)
            stats.var = (m * stats.var + (1 - m) * var).astype(stats.var.dtype)
    else:
        if stats is None:
            raise ConfigError("agbn eval mode needs running statistics")
        mu = stats.mean.astype(xd.dtype)
        var = stats.var.astype(xd.dtype)
        xc = xd - mu
    inv = (1.0 / np.sqrt(var + eps)).astype(xd.dtype)
    xhat = xc * inv
    out = gamma.data * xhat + beta.data

    def vjp(g):
        gg = (g * xhat).sum(axis=axes)
        gb = g.sum(axis=axes)
        gxhat = g * gamma.data
        if training:
            gx = inv * (gxhat - gxhat.mean(axis=axes) - xhat * (gxhat * xhat).mean(axis=axes))
        else:
            gx = gxhat * inv
        return gx, gg, gb

    return record("agbn", (x, gamma, beta), out, vjp)


def _shuffle(a: np.ndarray, r: int) -> np.ndarray:
    *lead, xs, ys, cc = a.shape
    co = cc // (r * r)
    L = len(lead)
    a = a.reshape(*lead, xs, ys, co, r, r)
    a = a.transpose(*range(L), L, L + 3, L + 1, L + 4, L + 2)
    return a.reshape(*lead, xs * r, ys * r, co)


def _unshuffle(a: np.ndarray, r: int) -> np.ndarray:
    *lead, xs, ys, co = a.shape
    L = len(lead)
    a = a.reshape(*lead, xs // r, r, ys // r, r, co)
    a = a.transpose(*range(L), L, L + 2, L + 4, L + 1, L + 3)
    return a.reshape(*lead, xs // r, ys // r, co * r * r)


def pixel_shuffle_spatial(x: Tensor, r: int) -> Tensor:
    """Channel-to-space rearrangement by factor ``r`` on both spatial axes.

    ``out[..., r*x+i, r*y+j, c] = in[..., x, y, c*r*r + i*r + j]``
    """
    if r < 1 or x.shape[-1] % (r * r):
        raise ShapeError(f"pixel shuffle: {x.shape[-1]} channels not divisible by r^2={r * r}")
    if r == 1:
        return record("pixel_shuffle", (x,), x.data.copy(), lambda g: (g,))
    out = np.ascontiguousarray(_shuffle(x.data, r))
    return record("pixel_shuffle", (x,), out, lambda g: (np.ascontiguousarray(_unshuffle(g, r)),))


def pixel_unshuffle_spatial(x: Tensor, r: int) -> Tensor:
    """Exact inverse of :func:`pixel_shuffle_spatial`."""
    if r < 1 or x.shape[-3] % r or x.shape[-2] % r:
        raise ShapeError(f"pixel unshuffle: spatial dims {x.shape[-3:-1]} not divisible by {r}")
    out = np.ascontiguousarray(_unshuffle(x.data, r))
    return record("pixel_unshuffle", (x,), out, lambda g: (np.ascontiguousarray(_shuffle(g, r)),))


@dataclass(frozen=True)
class _InterpPlan:
    lo: np.ndarray
    hi: np.ndarray
    frac: np.ndarray
    matrix: np.ndarray = field(repr=False)


def interp_plan(n_in: int, n_out: int) -> _InterpPlan:
    """Endpoint-aligned linear resampling from ``n_in`` to ``n_out`` samples.

    Output index k reads source coordinate ``k*(n_in-1)/(n_out-1)``; the
    integer part and remainder are computed exactly so that integral
    coordinates reproduce source samples bit for bit.
    """
    if n_out < n_in:
        raise ConfigError(f"angular interpolation cannot shrink {n_in} -> {n_out}")
    if n_in == n_out:
        idx = np.arange(n_in)
        return _InterpPlan(idx, idx, np.zeros(n_in), np.eye(n_in))
    if n_in < 2:
        raise ConfigError("angular interpolation needs at least 2 source views")
    num = np.arange(n_out) * (n_in - 1)
    lo, rem = np.divmod(num, n_out - 1)
    hi = np.where(rem > 0, lo + 1, lo)
    frac = rem / (n_out - 1)
    m = np.zeros((n_out, n_in))
    m[np.arange(n_out), lo] += 1 - frac
    m[np.arange(n_out), hi] += frac
    return _InterpPlan(lo, hi, frac, m)


def _interp_axis(a: np.ndarray, plan: _InterpPlan, axis: int) -> np.ndarray:
    shape = [1] * a.ndim
    shape[axis] = -1
    f = plan.frac.astype(a.dtype).reshape(shape)
    lo = np.take(a, plan.lo, axis=axis)
    hi = np.take(a, plan.hi, axis=axis)
    return lo + f * (hi - lo)


def _interp_axis_T(g: np.ndarray, plan: _InterpPlan, axis: int) -> np.ndarray:
    mt = plan.matrix.T.astype(g.dtype)
    moved = np.moveaxis(g, axis, 0)
    return np.moveaxis(np.tensordot(mt, moved, axes=1), 0, axis)


def angular_linear_interp(x: Tensor, s_out: int, t_out: int) -> Tensor:
    """Separable linear interpolation of the view grid to ``s_out x t_out``.

    Resamples along s first, then t.  Endpoints map onto endpoints; no
    extrapolation.
    """
    if x.ndim < 5:
        raise ShapeError(f"angular interpolation expects (..., S, T, X, Y, C), got {x.shape}")
    ps = interp_plan(x.shape[-5], s_out)
    pt = interp_plan(x.shape[-4], t_out)
    out = _interp_axis(_interp_axis(x.data, ps, x.ndim - 5), pt, x.ndim - 4)

    def vjp(g):
        return (_interp_axis_T(_interp_axis_T(g, pt, g.ndim - 4), ps, g.ndim - 5),)

    return record("angular_interp", (x,), out, vjp)
