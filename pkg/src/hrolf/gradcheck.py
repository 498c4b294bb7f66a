"""Central finite-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .autodiff import Tape, Tensor, backward


def relative_error(a: np.ndarray, n: np.ndarray, floor: float = 1e-7) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor), element-wise.

    The floor sits above the round-off of a central difference (about
    eps * |f| / step) so exactly-zero gradients, such as a conv bias feeding
    batch normalization, do not register as failures.
    """
    a = np.asarray(a, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


@dataclass
class GradCheckReport:
    names: list[str]
    max_rel_error: list[float]
    tol: float

    @property
    def passed(self) -> bool:
        return all(e <= self.tol for e in self.max_rel_error)

    @property
    def worst(self) -> float:
        return max(self.max_rel_error, default=0.0)

    def lines(self) -> list[str]:
        return [
            f"{name}\t{err:.3e}\t{'PASS' if err <= self.tol else 'FAIL'}"
            for name, err in zip(self.names, self.max_rel_error)
        ]


def numeric_grad(fn: Callable[[], Tensor], x: Tensor, step: float = 1e-3) -> np.ndarray:
    """Central differences of the scalar ``fn()`` with respect to ``x`` (in place)."""
    g = np.zeros_like(x.data, dtype=np.float64)
    flat = x.data.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = float(fn().data)
        flat[i] = orig - step
        fm = float(fn().data)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * step)
    return g


def grad_check(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    tol: float = 1e-4,
    step: float = 1e-3,
    names: Sequence[str] | None = None,
) -> GradCheckReport:
    """Compare tape gradients of ``fn`` with central finite differences.

    ``fn`` closes over ``inputs`` and must return a scalar Tensor.  Inputs
    are perturbed in place and restored afterwards; use float64 data.
    """
    for t in inputs:
        t.requires_grad = True
    with Tape() as tape:
        loss = fn()
    grads = backward(tape, loss, inputs)
    errs = []
    for t in inputs:
        num = numeric_grad(fn, t, step)
        errs.append(float(relative_error(grads[t], num).max()) if t.data.size else 0.0)
    if names is None:
        names = [t.name or f"input{i}" for i, t in enumerate(inputs)]
    return GradCheckReport(list(names), errs, tol)


@dataclass
class SuiteCase:
    name: str
    report: GradCheckReport
    seconds: float


def _probe(out: Tensor, rng) -> Tensor:
    """Random linear functional of ``out`` so every element gets a distinct weight."""
    from .autodiff import mul, sum_all

    return sum_all(mul(out, Tensor(rng.standard_normal(out.shape))))


def suite_cases(seed: int = 0):
    """(name, fn, inputs) triples covering every differentiable op plus a tiny model."""
    from .autodiff import add, lrelu
    from .losses import FeatureNet, perceptual_loss, reconstruction_loss
    from .model import ModelConfig, forward, init_params
    from .ops import Kernel4D, agbn, angular_linear_interp, hconv4d, pixel_shuffle_spatial

    rng = np.random.default_rng(seed)
    T = lambda *shape, name=None: Tensor(rng.standard_normal(shape), name=name)  # noqa: E731
    cases = []

    x, w, b = T(2, 2, 4, 4, 2, name="x"), T(3, 3, 3, 3, 2, 3, name="w"), T(3, name="b")
    cases.append(("hconv4d", lambda: _probe(hconv4d(x, Kernel4D(w, b)), np.random.default_rng(1)), [x, w, b]))

    # keep samples away from the kink so central differences stay on one side
    xl = rng.standard_normal((2, 2, 3, 3, 2))
    xl = Tensor(np.where(np.abs(xl) < 0.05, 0.3, xl), name="x")
    cases.append(("lrelu", lambda: _probe(lrelu(xl, 0.2), np.random.default_rng(2)), [xl]))

    xb, g, be = T(2, 3, 3, 4, 3, name="x"), T(3, name="gamma"), T(3, name="beta")
    cases.append(("agbn", lambda: _probe(agbn(xb, g, be, 1e-5, True), np.random.default_rng(3)), [xb, g, be]))

    a1, a2 = T(2, 2, 3, 3, 2, name="a"), T(2, 2, 3, 3, 2, name="b")
    cases.append(("add", lambda: _probe(add(a1, a2), np.random.default_rng(4)), [a1, a2]))

    xs = T(2, 2, 3, 3, 8, name="x")
    cases.append(("pixel_shuffle_spatial", lambda: _probe(pixel_shuffle_spatial(xs, 2), np.random.default_rng(5)), [xs]))

    xi = T(2, 3, 2, 2, 2, name="x")
    cases.append(("angular_linear_interp",
                  lambda: _probe(angular_linear_interp(xi, 5, 4), np.random.default_rng(6)), [xi]))

    p, t = T(2, 2, 4, 4, 1, name="pred"), Tensor(rng.standard_normal((2, 2, 4, 4, 1)))
    cases.append(("reconstruction_loss", lambda: reconstruction_loss(p, t, True), [p]))
    cases.append(("reconstruction_loss (sum)", lambda: reconstruction_loss(p, t, False), [p]))

    phi = FeatureNet(1, dtype=np.float64)
    pp, tt = T(2, 2, 8, 8, 1, name="pred"), Tensor(rng.standard_normal((2, 2, 8, 8, 1)))
    cases.append(("perceptual_loss", lambda: perceptual_loss(pp, tt, phi), [pp]))

    cfg = ModelConfig(d=1, n=1, c=2, scale=2, angular_in=(2, 2), angular_out=(2, 2), seed=seed)
    params = init_params(cfg, np.float64)
    xin = Tensor(rng.uniform(0, 1, (2, 2, 4, 4, 1)), name="input")
    target = Tensor(rng.uniform(0, 1, (2, 2, 8, 8, 1)))

    def model_loss():
        res = forward(xin, params, cfg, training=True)
        return reconstruction_loss(res.primary, target) + perceptual_loss(res.final, target, phi) * 0.5

    cases.append(("model d=1 n=1 c=2", model_loss, [xin, *params]))
    return cases


def run_suite(tol: float = 1e-4, step: float = 1e-4, seed: int = 0,
              on_case: Callable[[SuiteCase], None] | None = None) -> list[SuiteCase]:
    import time

    out = []
    for name, fn, inputs in suite_cases(seed):
        t0 = time.perf_counter()
        names = [f"{name}:{t.name or i}" for i, t in enumerate(inputs)]
        rep = grad_check(fn, inputs, tol=tol, step=step, names=names)
        case = SuiteCase(name, rep, time.perf_counter() - t0)
        out.append(case)
        if on_case is not None:
            on_case(case)
    return out
