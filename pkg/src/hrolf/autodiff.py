"""Minimal reverse-mode automatic differentiation over numpy arrays.

Operations executed while a :class:`Tape` is active are recorded in
execution order together with a closure mapping the output cotangent to
input cotangents.  :func:`backward` replays the tape in reverse.

Tensors carry light-field feature maps laid out as ``(S, T, X, Y, C)``,
optionally preceded by batch axes.  Ops that care about layout address
the trailing axes, so a leading batch axis is mapped over for free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ComputeError, ShapeError

_ACTIVE_TAPES: list["Tape"] = []
_DEBUG = False


def set_debug(enabled: bool) -> None:
    """Toggle the finite-value check applied to every op output."""
    global _DEBUG
    _DEBUG = bool(enabled)


class Tensor:
    """Dense array participating in the tape.

    Identity semantics: tensors hash by object id so they can key
    gradient dictionaries.
    """

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"

    def __add__(self, other):
        return add(self, _as_tensor(other, self))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self))

    def __rsub__(self, other):
        return sub(_as_tensor(other, self), self)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


def _as_tensor(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.broadcast_to(np.asarray(value, dtype=like.dtype), like.shape))


@dataclass
class Node:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Tape:
    """Ordered record of differentiable operations.

    Use as a context manager; ops run inside the ``with`` block are
    appended to :attr:`nodes` in execution order, which is a valid
    topological order by construction.
    """

    nodes: list[Node] = field(default_factory=list)

    def __enter__(self) -> "Tape":
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPES.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)

    def leaves(self) -> list[Tensor]:
        """Tensors that require grad and were consumed but never produced."""
        produced = {id(n.output) for n in self.nodes}
        seen: dict[int, Tensor] = {}
        for n in self.nodes:
            for t in n.inputs:
                if t.requires_grad and id(t) not in produced:
                    seen.setdefault(id(t), t)
        return list(seen.values())


def record(op: str, inputs: Sequence[Tensor], out: np.ndarray, vjp) -> Tensor:
    """Wrap ``out`` in a Tensor and log it on the active tape when needed."""
    if _DEBUG and not np.all(np.isfinite(out)):
        raise ComputeError(f"{op} produced non-finite values")
    res = Tensor(out)
    if _ACTIVE_TAPES and any(t.requires_grad for t in inputs):
        res.requires_grad = True
        _ACTIVE_TAPES[-1].nodes.append(Node(op, tuple(inputs), res, vjp))
    return res


def backward(tape: Tape, loss: Tensor, params: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Propagate d(loss)/d(.) through ``tape`` in reverse recording order.

    Returns gradients for ``params`` (default: every leaf on the tape).
    Parameters that the loss does not depend on receive zero gradients.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        for t, gi in zip(node.inputs, node.vjp(g)):
            if gi is None or not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
    if params is None:
        params = tape.leaves()
    out: dict[Tensor, np.ndarray] = {}
    for p in params:
        g = grads.get(id(p))
        out[p] = np.zeros_like(p.data) if g is None else np.asarray(g, dtype=p.dtype).reshape(p.shape)
    return out


# ---------------------------------------------------------------------------
# elementwise and reduction ops


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    """Element-wise sum of two equally shaped tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"add: shape mismatch {a.shape} vs {b.shape}")
    return record("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"sub: shape mismatch {a.shape} vs {b.shape}")
    return record("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Element-wise product; ``b`` may broadcast against ``a``."""
    out = a.data * b.data
    return record(
        "mul", (a, b), out,
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def scale(a: Tensor, factor: float) -> Tensor:
    return record("scale", (a,), a.data * a.dtype.type(factor), lambda g: (g * factor,))


def square(a: Tensor) -> Tensor:
    return record("square", (a,), a.data * a.data, lambda g: (2.0 * a.data * g,))


def sum_all(a: Tensor) -> Tensor:
    """Reduce every axis to a scalar sum."""
    return record("sum", (a,), np.asarray(a.data.sum()), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    return record(
        "mean", (a,), np.asarray(a.data.mean()),
        lambda g: (np.full(a.shape, g / n, dtype=a.dtype),),
    )


def lrelu(x: Tensor, slope: float = 0.2) -> Tensor:
    """Leaky ReLU, ``max(v, slope * v)`` for ``0 < slope < 1``."""
    if not 0.0 < slope < 1.0:
        raise ValueError(f"lrelu slope must lie in (0, 1), got {slope}")
    pos = x.data > 0
    out = np.where(pos, x.data, x.data * x.dtype.type(slope))
    return record("lrelu", (x,), out, lambda g: (np.where(pos, g, g * slope),))


def subsample_spatial(x: Tensor, stride: int) -> Tensor:
    """Keep every ``stride``-th sample along the two spatial axes."""
    out = x.data[..., ::stride, ::stride, :]

    def vjp(g):
        gx = np.zeros_like(x.data)
        gx[..., ::stride, ::stride, :] = g
        return (gx,)

    return record("subsample", (x,), np.ascontiguousarray(out), vjp)
