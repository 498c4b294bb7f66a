"""SGD training with step-decayed learning rate and the two-stage loss."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, fields
from decimal import Decimal
from typing import Callable, Sequence

import numpy as np

from .autodiff import Tape, Tensor, backward
from .degrade import DegradationConfig, decimate_angular, degrade_spatial
from .errors import ComputeError, ConfigError
from .lightfield import LightField, crop_patch
from .losses import FeatureNet, LossWeights, perceptual_loss, reconstruction_loss
from .model import PIXEL_SCALE, ModelConfig, ModelParams, _coerce, forward, init_params

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 1e-5
    decay: float = 0.1
    decay_every: int = 10  # epochs
    steps_per_epoch: int = 100
    steps: int = 1000
    patch: int = 32  # HR patch edge, pixels
    batch: int = 1
    alpha: float = 1.0
    beta: float = 0.01
    momentum: float = 0.0
    grad_clip: float = 0.0  # global max-norm; 0 disables
    recon_on_final: bool = False
    normalize_loss: bool = True
    noise_std: float = 1.0
    blur_size: int = 7
    blur_sigma: float = 1.2
    feature_seed: int = 1234
    seed: int = 0
    deterministic: bool = True

    def validate(self) -> "TrainConfig":
        if self.lr0 <= 0:
            raise ConfigError("lr0 must be positive")
        if not 0 < self.decay <= 1:
            raise ConfigError("decay must lie in (0, 1]")
        if self.decay_every < 1 or self.steps_per_epoch < 1:
            raise ConfigError("decay_every and steps_per_epoch must be >= 1")
        if self.patch < 1 or self.batch < 1 or self.steps < 0:
            raise ConfigError("patch and batch must be >= 1, steps >= 0")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must lie in [0, 1)")
        self.weights  # validates alpha/beta
        return self

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.alpha, self.beta)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        kw = {}
        for key, val in values.items():
            if key not in known:
                raise ConfigError(f"unknown train option {key!r}")
            kw[key] = _coerce(val, getattr(cls(), key))
        return cls(**kw)


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """``lr0 * decay ** (epoch // decay_every)``, evaluated in decimal so 1e-5 * 0.1**2 == 1e-7."""
    if epoch < 0:
        raise ConfigError("epoch must be non-negative")
    k = epoch // cfg.decay_every
    return float(Decimal(repr(cfg.lr0)) * Decimal(repr(cfg.decay)) ** k)


def sgd_step(params: dict, grads: dict, lr: float, velocity: dict | None = None, momentum: float = 0.0) -> None:
    """In-place update ``p -= lr * v`` with ``v = g + momentum * v_prev``.

    ``params`` maps names to Tensors, ``grads`` names to arrays.  With
    momentum 0 this is plain ``p -= lr * g``.
    """
    for name, p in params.items():
        if name not in grads:
            raise KeyError(f"no gradient for parameter {name!r}")
        g = np.asarray(grads[name], dtype=p.data.dtype)
        if momentum > 0:
            if velocity is None:
                raise ConfigError("momentum > 0 needs a velocity dict")
            v = velocity.get(name)
            v = g if v is None else g + p.data.dtype.type(momentum) * v
            velocity[name] = v
            g = v
        p.data = p.data - p.data.dtype.type(lr) * g


@dataclass
class HistoryRow:
    step: int
    epoch: int
    lr: float
    loss_r: float
    loss_p: float
    loss: float

    def line(self) -> str:
        return f"{self.step}\t{self.epoch}\t{self.lr:.6g}\t{self.loss_r:.9g}\t{self.loss_p:.9g}\t{self.loss:.9g}"


HISTORY_HEADER = "step\tepoch\tlr\tloss_r\tloss_p\tloss"


@dataclass
class TrainResult:
    params: ModelParams
    history: list[HistoryRow]
    step: int
    velocity: dict


Sample = LightField | tuple[LightField, LightField]


def _degradation(tcfg: TrainConfig, mcfg: ModelConfig, seed: int) -> DegradationConfig:
    return DegradationConfig(mcfg.scale, tcfg.blur_size, tcfg.blur_sigma, tcfg.noise_std, seed)


def make_lr(hr: LightField, tcfg: TrainConfig, mcfg: ModelConfig, noise_seed: int) -> LightField:
    """LR input for an HR field: angular decimation to the model input grid, then spatial degradation."""
    lr = hr
    if hr.angular != tuple(mcfg.angular_in):
        lr = decimate_angular(hr, tuple(mcfg.angular_in))
    if mcfg.scale > 1:
        lr = degrade_spatial(lr, _degradation(tcfg, mcfg, noise_seed))
    return lr


def check_dataset(dataset: Sequence[Sample], tcfg: TrainConfig, mcfg: ModelConfig) -> None:
    if not dataset:
        raise ConfigError("training set is empty")
    for item in dataset:
        hr = item[1] if isinstance(item, tuple) else item
        if hr.angular != tuple(mcfg.angular_out):
            raise ConfigError(f"HR views {hr.S}x{hr.T} do not match angular_out {mcfg.angular_out}")
        if hr.C != mcfg.channels:
            raise ConfigError(f"HR has {hr.C} channels, model expects {mcfg.channels}")
        if tcfg.patch > min(hr.X, hr.Y) or tcfg.patch % mcfg.scale:
            raise ConfigError(f"patch {tcfg.patch} must be a multiple of {mcfg.scale} within {hr.X}x{hr.Y}")
        if isinstance(item, tuple):
            lr = item[0]
            if lr.angular != tuple(mcfg.angular_in) or lr.X * mcfg.scale != hr.X or lr.Y * mcfg.scale != hr.Y:
                raise ConfigError("LR/HR pair shapes disagree with the model config")


def sample_batch(dataset: Sequence[Sample], tcfg: TrainConfig, mcfg: ModelConfig, step: int):
    """Patches for one step; randomness derives from (seed, step) alone."""
    rng = np.random.default_rng([tcfg.seed, step])
    r = mcfg.scale
    lrs, hrs = [], []
    for _ in range(tcfg.batch):
        item = dataset[int(rng.integers(len(dataset)))]
        hr = item[1] if isinstance(item, tuple) else item
        x0 = int(rng.integers(0, (hr.X - tcfg.patch) // r + 1)) * r
        y0 = int(rng.integers(0, (hr.Y - tcfg.patch) // r + 1)) * r
        hr_patch = crop_patch(hr, x0, y0, tcfg.patch, tcfg.patch)
        if isinstance(item, tuple):
            lr_patch = crop_patch(item[0], x0 // r, y0 // r, tcfg.patch // r, tcfg.patch // r)
        else:
            lr_patch = make_lr(hr_patch, tcfg, mcfg, int(rng.integers(2 ** 31)))
        lrs.append(lr_patch.data)
        hrs.append(hr_patch.data)
    return np.stack(lrs), np.stack(hrs)


def compute_losses(params: ModelParams, mcfg: ModelConfig, tcfg: TrainConfig, phi: FeatureNet,
                   lr_batch: np.ndarray, hr_batch: np.ndarray, training: bool = True):
    """Forward pass plus both loss terms on normalized data.

    Returns (loss_r, loss_p, total) Tensors.  Terms with zero weight are
    left out of ``total`` so no gradient flows through them.
    """
    dtype = next(iter(params)).dtype
    scale = dtype.type(1.0 / PIXEL_SCALE)
    x = Tensor(lr_batch.astype(dtype) * scale)
    target = Tensor(hr_batch.astype(dtype) * scale)
    res = forward(x, params, mcfg, training=training)
    loss_r = reconstruction_loss(res.primary, target, tcfg.normalize_loss)
    if tcfg.recon_on_final:
        # pixel term on the refined output as well, averaged with the primary one
        loss_r = (loss_r + reconstruction_loss(res.final, target, tcfg.normalize_loss)) * 0.5
    loss_p = perceptual_loss(res.final, target, phi)
    terms = []
    if tcfg.alpha > 0:
        terms.append(loss_r * tcfg.alpha)
    if tcfg.beta > 0:
        terms.append(loss_p * tcfg.beta)
    total = terms[0] if len(terms) == 1 else terms[0] + terms[1]
    return loss_r, loss_p, total


def _clip(grads: dict, max_norm: float) -> None:
    norm = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values()))
    if norm > max_norm:
        f = max_norm / norm
        for k in grads:
            grads[k] = grads[k] * f


def train_loop(
    dataset: Sequence[Sample],
    tcfg: TrainConfig,
    mcfg: ModelConfig,
    params: ModelParams | None = None,
    start_step: int = 0,
    velocity: dict | None = None,
    phi: FeatureNet | None = None,
    on_step: Callable[[HistoryRow], None] | None = None,
) -> TrainResult:
    """Run ``tcfg.steps`` SGD steps starting at global step ``start_step``.

    Each step samples patches, forms the LR input (given or degraded on the
    fly), attaches the reconstruction loss to the primary output and the
    perceptual loss to the final output, back-propagates and updates.
    """
    tcfg.validate()
    mcfg.validate()
    check_dataset(dataset, tcfg, mcfg)
    if params is None:
        params = init_params(mcfg)
    dtype = next(iter(params)).dtype
    if phi is None:
        phi = FeatureNet(mcfg.channels, seed=tcfg.feature_seed, dtype=dtype)
    velocity = {} if velocity is None else velocity
    for t in params:
        t.requires_grad = True
    named = dict(params.items())
    history = []
    step = start_step
    for step in range(start_step, start_step + tcfg.steps):
        epoch = step // tcfg.steps_per_epoch
        lr = lr_schedule(epoch, tcfg)
        lr_batch, hr_batch = sample_batch(dataset, tcfg, mcfg, step)
        with Tape() as tape:
            loss_r, loss_p, total = compute_losses(params, mcfg, tcfg, phi, lr_batch, hr_batch)
        value = float(total.data)
        if not math.isfinite(value):
            raise ComputeError(f"non-finite loss {value} at step {step}")
        grads = backward(tape, total, list(params))
        by_name = {name: grads[t] for name, t in named.items()}
        if tcfg.grad_clip > 0:
            _clip(by_name, tcfg.grad_clip)
        sgd_step(named, by_name, lr, velocity, tcfg.momentum)
        row = HistoryRow(step, epoch, lr, float(loss_r.data), float(loss_p.data), value)
        history.append(row)
        if on_step is not None:
            on_step(row)
        if step % 100 == 0:
            log.debug("step %d epoch %d lr %.3g loss %.6g", step, epoch, lr, value)
    for t in params:
        t.requires_grad = False
    return TrainResult(params, history, start_step + tcfg.steps, velocity)


def super_resolve(lr: LightField, params: ModelParams, mcfg: ModelConfig) -> tuple[LightField, LightField]:
    """Inference in eval mode (running AGBN statistics)."""
    from .model import model_forward

    return model_forward(lr, mcfg, params, training=False)
