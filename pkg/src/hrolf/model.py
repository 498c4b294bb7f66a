"""High-order residual network for light-field super-resolution.

Pipeline (features are ``(..., S, T, X, Y, C)`` tensors)::

    F0    = HConv(I_L)                                  shallow features
    F_G   = AGBN(HConv(HRB_d(...HRB_1(F0)))) + F0        GRLNet
    F_up  = shuffle(interp(HConv(F_G)))                 UpNet
    F_R   = AGBN(HConv(HRB_n(...HRB_1(F_up)))) + F_up    SReNet
    I_p   = HConv(F_up)      primary output
    I_f   = HConv(F_R)       final output

Inputs are scaled from [0, 255] to [0, 1] on entry and back on exit.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .autodiff import Tensor, add, lrelu
from .errors import ConfigError
from .lightfield import LightField
from .ops import Kernel4D, RunningStats, agbn, angular_linear_interp, hconv4d, pixel_shuffle_spatial

PIXEL_SCALE = 255.0


@dataclass(frozen=True)
class ModelConfig:
    d: int = 5  # HRBs in GRLNet
    n: int = 3  # HRBs in SReNet
    c: int = 32  # feature channels
    scale: int = 2  # spatial factor
    angular_in: tuple[int, int] = (5, 5)
    angular_out: tuple[int, int] = (5, 5)
    channels: int = 1  # image channels (1 luma, 3 RGB)
    spatial_kernel: tuple[int, int] = (3, 3)
    angular_kernel: tuple[int, int] = (3, 3)
    lrelu_slope: float = 0.2
    bn_eps: float = 1e-5
    bn_momentum: float = 0.9
    post_add_lrelu: bool = False
    seed: int = 0

    def validate(self) -> "ModelConfig":
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if not 0 <= self.n <= self.d:
            raise ConfigError(f"SReNet block count n={self.n} must satisfy 0 <= n <= d={self.d}")
        if self.c < 1 or self.scale < 1:
            raise ConfigError("c and scale must be >= 1")
        if self.channels not in (1, 3):
            raise ConfigError("channels must be 1 or 3")
        for a, b in zip(self.angular_in, self.angular_out):
            if a < 1 or b < a:
                raise ConfigError(f"angular_out {self.angular_out} must be >= angular_in {self.angular_in}")
            if b > a and a < 2:
                raise ConfigError("angular upsampling needs at least 2 input views per axis")
        for k in (*self.spatial_kernel, *self.angular_kernel):
            if k < 1 or k % 2 == 0:
                raise ConfigError(f"kernel extents must be odd, got {self.spatial_kernel}/{self.angular_kernel}")
        if not 0 < self.lrelu_slope < 1:
            raise ConfigError("lrelu slope must be in (0, 1)")
        return self

    @property
    def taps(self) -> int:
        return self.spatial_kernel[0] * self.spatial_kernel[1] * self.angular_kernel[0] * self.angular_kernel[1]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "ModelConfig":
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for key, val in values.items():
            if key not in known:
                raise ConfigError(f"unknown model option {key!r}")
            kw[key] = _coerce(val, getattr(cls(), key))
        return cls(**kw)


def _coerce(val, default):
    """Turn config-file strings into the type of ``default``."""
    if not isinstance(val, str):
        return tuple(val) if isinstance(default, tuple) else type(default)(val)
    if isinstance(default, bool):
        if val.lower() in ("1", "true", "yes", "on"):
            return True
        if val.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {val!r}")
    if isinstance(default, tuple):
        parts = val.lower().replace("x", ",").split(",")
        return tuple(int(p) for p in parts if p.strip())
    try:
        return type(default)(val)
    except ValueError:
        raise ConfigError(f"cannot parse {val!r} as {type(default).__name__}") from None


class ModelParams:
    """Named learnable tensors plus AGBN running statistics."""

    def __init__(self, tensors: "OrderedDict[str, Tensor]", stats: dict[str, RunningStats]):
        self.tensors = tensors
        self.stats = stats

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors.values())

    def items(self):
        return self.tensors.items()

    def kernel(self, prefix: str) -> Kernel4D:
        return Kernel4D(self.tensors[prefix + ".w"], self.tensors[prefix + ".b"])

    def bn(self, prefix: str) -> tuple[Tensor, Tensor, RunningStats]:
        return self.tensors[prefix + ".gamma"], self.tensors[prefix + ".beta"], self.stats[prefix]

    def count(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def astype(self, dtype) -> "ModelParams":
        tensors = OrderedDict((k, Tensor(v.data.astype(dtype), name=k)) for k, v in self.tensors.items())
        stats = {k: RunningStats(s.mean.astype(dtype), s.var.astype(dtype), s.momentum) for k, s in self.stats.items()}
        return ModelParams(tensors, stats)

    def copy(self) -> "ModelParams":
        return self.astype(next(iter(self.tensors.values())).dtype)

    def arrays(self) -> "OrderedDict[str, np.ndarray]":
        """Every stored array, running statistics included, keyed by record name."""
        out = OrderedDict((k, v.data) for k, v in self.tensors.items())
        for k, s in self.stats.items():
            out[k + ".running_mean"] = s.mean
            out[k + ".running_var"] = s.var
        return out


def _layout(cfg: ModelConfig) -> list[tuple[str, str, int, int]]:
    """Parameter-producing layers in creation order: (kind, prefix, c_in, c_out)."""
    c = cfg.c
    layers = [("conv", "shallow", cfg.channels, c)]

    def chain(tag: str, count: int):
        for i in range(count):
            p = f"{tag}.hrb{i}"
            layers.extend([("conv", p + ".conv1", c, c), ("bn", p + ".bn1", c, c),
                           ("conv", p + ".conv2", c, c), ("bn", p + ".bn2", c, c)])
        layers.extend([("conv", tag + ".tail.conv", c, c), ("bn", tag + ".tail.bn", c, c)])

    chain("grl", cfg.d)
    layers.append(("conv", "up.conv", c, c * cfg.scale ** 2))
    chain("sre", cfg.n)
    layers.append(("conv", "head_p", c, cfg.channels))
    layers.append(("conv", "head_f", c, cfg.channels))
    return layers


def param_count(cfg: ModelConfig) -> int:
    """Closed-form number of learnable scalars."""
    k, c, C, r = cfg.taps, cfg.c, cfg.channels, cfg.scale
    conv = lambda ci, co: k * ci * co + co  # noqa: E731
    hrb = 2 * conv(c, c) + 4 * c
    tail = conv(c, c) + 2 * c
    return (conv(C, c) + (cfg.d + cfg.n) * hrb + 2 * tail
            + conv(c, c * r * r) + 2 * conv(c, C))


def init_params(cfg: ModelConfig, dtype=np.float32) -> ModelParams:
    """He-normal kernels (variance 2 / ((1 + slope^2) fan_in)), zero biases, gamma 1, beta 0."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    s1, s2 = cfg.spatial_kernel
    a1, a2 = cfg.angular_kernel
    tensors: OrderedDict[str, Tensor] = OrderedDict()
    stats: dict[str, RunningStats] = {}
    gain = 2.0 / (1.0 + cfg.lrelu_slope ** 2)
    for kind, prefix, cin, cout in _layout(cfg):
        if kind == "conv":
            fan_in = cfg.taps * cin
            w = rng.normal(0.0, np.sqrt(gain / fan_in), (s1, s2, a1, a2, cin, cout))
            tensors[prefix + ".w"] = Tensor(w.astype(dtype), name=prefix + ".w")
            tensors[prefix + ".b"] = Tensor(np.zeros(cout, dtype), name=prefix + ".b")
        else:
            tensors[prefix + ".gamma"] = Tensor(np.ones(cout, dtype), name=prefix + ".gamma")
            tensors[prefix + ".beta"] = Tensor(np.zeros(cout, dtype), name=prefix + ".beta")
            stats[prefix] = RunningStats.fresh(cout, dtype, cfg.bn_momentum)
    return ModelParams(tensors, stats)


def _bn(x: Tensor, params: ModelParams, prefix: str, cfg: ModelConfig, training: bool) -> Tensor:
    gamma, beta, stats = params.bn(prefix)
    return agbn(x, gamma, beta, cfg.bn_eps, training, stats)


def hrb_forward(x: Tensor, params: ModelParams, prefix: str, cfg: ModelConfig, training: bool = True) -> Tensor:
    """x + AGBN(HConv(LReLU(AGBN(HConv(x)))))"""
    h = hconv4d(x, params.kernel(prefix + ".conv1"))
    h = lrelu(_bn(h, params, prefix + ".bn1", cfg, training), cfg.lrelu_slope)
    h = _bn(hconv4d(h, params.kernel(prefix + ".conv2")), params, prefix + ".bn2", cfg, training)
    y = add(x, h)
    if cfg.post_add_lrelu:
        y = lrelu(y, cfg.lrelu_slope)
    return y


def _chain(x: Tensor, params: ModelParams, tag: str, count: int, cfg: ModelConfig,
           training: bool, collect: list | None) -> Tensor:
    h = x
    for i in range(count):
        h = hrb_forward(h, params, f"{tag}.hrb{i}", cfg, training)
        if collect is not None:
            collect.append(h)
    tail = _bn(hconv4d(h, params.kernel(tag + ".tail.conv")), params, tag + ".tail.bn", cfg, training)
    return add(tail, x)


def grlnet_forward(f0: Tensor, params: ModelParams, cfg: ModelConfig, d: int | None = None,
                   training: bool = True, collect: list | None = None) -> Tensor:
    """Stacked HRBs with the global residual back to the shallow features.

    Pass a list as ``collect`` to receive each block output F_G1..F_Gd.
    """
    return _chain(f0, params, "grl", cfg.d if d is None else d, cfg, training, collect)


def upnet_forward(fg: Tensor, params: ModelParams, cfg: ModelConfig) -> Tensor:
    """Expand channels by scale^2, interpolate views to ``angular_out``, shuffle to space."""
    h = hconv4d(fg, params.kernel("up.conv"))
    h = angular_linear_interp(h, *cfg.angular_out)
    return pixel_shuffle_spatial(h, cfg.scale)


def srenet_forward(fup: Tensor, params: ModelParams, cfg: ModelConfig, n: int | None = None,
                   training: bool = True, collect: list | None = None) -> Tensor:
    return _chain(fup, params, "sre", cfg.n if n is None else n, cfg, training, collect)


@dataclass
class ForwardResult:
    primary: Tensor
    final: Tensor
    features: dict


def forward(x: Tensor, params: ModelParams, cfg: ModelConfig, training: bool = True,
            need_final: bool = True) -> ForwardResult:
    """Run the network on normalized input features ``(..., S, T, X, Y, C)``."""
    f0 = hconv4d(x, params.kernel("shallow"))
    blocks: list[Tensor] = []
    fg = grlnet_forward(f0, params, cfg, training=training, collect=blocks)
    fup = upnet_forward(fg, params, cfg)
    primary = hconv4d(fup, params.kernel("head_p"))
    feats = {"F0": f0, "F_G_blocks": blocks, "F_G": fg, "F_up": fup}
    final = None
    if need_final:
        fr = srenet_forward(fup, params, cfg, training=training)
        feats["F_R"] = fr
        final = hconv4d(fr, params.kernel("head_f"))
    return ForwardResult(primary, final, feats)


def check_input(lf: LightField, cfg: ModelConfig) -> None:
    if lf.angular != tuple(cfg.angular_in):
        raise ConfigError(f"input has {lf.S}x{lf.T} views, model expects {cfg.angular_in[0]}x{cfg.angular_in[1]}")
    if lf.C != cfg.channels:
        raise ConfigError(f"input has {lf.C} channels, model expects {cfg.channels}")


def model_forward(lr: LightField, cfg: ModelConfig, params: ModelParams,
                  training: bool = False) -> tuple[LightField, LightField]:
    """Super-resolve ``lr``; returns (primary, final) on the [0, 255] scale."""
    check_input(lr, cfg)
    dtype = next(iter(params)).dtype
    x = Tensor(lr.data.astype(dtype) / dtype.type(PIXEL_SCALE))
    res = forward(x, params, cfg, training=training)
    to_lf = lambda t: LightField(t.data * dtype.type(PIXEL_SCALE))  # noqa: E731
    return to_lf(res.primary), to_lf(res.final)


def output_shape(cfg: ModelConfig, spatial: tuple[int, int]) -> tuple[int, int, int, int, int]:
    return (*cfg.angular_out, spatial[0] * cfg.scale, spatial[1] * cfg.scale, cfg.channels)


def with_overrides(cfg: ModelConfig, **kw) -> ModelConfig:
    return replace(cfg, **kw).validate()
