"""Binary checkpoint format.

Layout (little-endian)::

    b"HROC"  u32 version
    u32 n    n bytes of UTF-8 config text (INI sections: model, train, state)
    u32 count, then per record:
        u32 name_len, name bytes, u32 rank, rank x u32 dims, f32 payload
"""

from __future__ import annotations

import configparser
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .errors import FormatError
from .lightfield import _atomic_write_bytes
from .model import ModelConfig, ModelParams, init_params
from .ops import RunningStats

MAGIC = b"HROC"
VERSION = 1
_U32 = struct.Struct("<I")


@dataclass
class Checkpoint:
    model_config: ModelConfig
    params: ModelParams
    train_config: dict = field(default_factory=dict)
    epoch: int = 0
    step: int = 0
    extra: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)


def _config_text(mcfg: ModelConfig, train: dict, epoch: int, step: int) -> str:
    cp = configparser.ConfigParser()
    cp["model"] = {k: _fmt(v) for k, v in mcfg.to_dict().items()}
    cp["train"] = {k: _fmt(v) for k, v in train.items()}
    cp["state"] = {"epoch": str(epoch), "step": str(step)}
    lines = []
    for section in cp.sections():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in cp[section].items())
        lines.append("")
    return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, (tuple, list)):
        return "x".join(str(i) for i in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def encode_records(arrays: "OrderedDict[str, np.ndarray]") -> bytes:
    parts = [_U32.pack(len(arrays))]
    for name, arr in arrays.items():
        raw = name.encode()
        arr = np.asarray(arr)
        parts.append(_U32.pack(len(raw)) + raw + _U32.pack(arr.ndim))
        parts.append(b"".join(_U32.pack(d) for d in arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def save_checkpoint(path, params: ModelParams, mcfg: ModelConfig, train: dict | None = None,
                    epoch: int = 0, step: int = 0, extra: dict | None = None) -> None:
    """Write parameters, running statistics and any ``extra`` arrays atomically."""
    text = _config_text(mcfg, train or {}, epoch, step).encode()
    arrays = params.arrays()
    for k, v in (extra or {}).items():
        arrays[k] = v
    payload = MAGIC + _U32.pack(VERSION) + _U32.pack(len(text)) + text + encode_records(arrays)
    _atomic_write_bytes(Path(path), payload)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated while reading {what} at byte {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def decode_checkpoint(buf: bytes):
    r = _Reader(buf)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"magic: expected {MAGIC!r}, found {magic!r}")
    version = r.u32("version")
    if version != VERSION:
        raise FormatError(f"checkpoint version {version} is not supported (this build reads version {VERSION})")
    text = r.take(r.u32("config length"), "config").decode()
    arrays: OrderedDict[str, np.ndarray] = OrderedDict()
    for _ in range(r.u32("record count")):
        name = r.take(r.u32("name length"), "name").decode()
        rank = r.u32(f"{name} rank")
        dims = tuple(r.u32(f"{name} dims") for _ in range(rank))
        n = int(np.prod(dims, dtype=np.int64))
        arrays[name] = np.frombuffer(r.take(4 * n, f"{name} payload"), dtype="<f4").reshape(dims).astype(np.float32)
    if r.pos != len(buf):
        raise FormatError(f"{len(buf) - r.pos} trailing bytes after last record")
    cp = configparser.ConfigParser()
    cp.read_string(text)
    return cp, arrays


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        cp, arrays = decode_checkpoint(path.read_bytes())
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if not cp.has_section("model"):
        raise FormatError(f"{path}: config block lacks a [model] section")
    mcfg = ModelConfig.from_dict(dict(cp["model"])).validate()
    template = init_params(mcfg)
    tensors = OrderedDict()
    stats = {}
    for name, t in template.tensors.items():
        if name not in arrays:
            raise FormatError(f"{path}: missing parameter {name}")
        if arrays[name].shape != t.shape:
            raise FormatError(f"{path}: {name} has shape {arrays[name].shape}, expected {t.shape}")
        tensors[name] = Tensor(arrays.pop(name), name=name)
    for name, s in template.stats.items():
        try:
            stats[name] = RunningStats(arrays.pop(name + ".running_mean"), arrays.pop(name + ".running_var"),
                                       mcfg.bn_momentum)
        except KeyError:
            raise FormatError(f"{path}: missing running statistics for {name}") from None
    state = cp["state"] if cp.has_section("state") else {}
    return Checkpoint(
        model_config=mcfg,
        params=ModelParams(tensors, stats),
        train_config=dict(cp["train"]) if cp.has_section("train") else {},
        epoch=int(state.get("epoch", 0)),
        step=int(state.get("step", 0)),
        extra=arrays,
    )


def save_feature_weights(path, named: dict[str, np.ndarray]) -> None:
    """Store feature-extractor weights using the checkpoint record layout."""
    text = b"[features]\n"
    payload = MAGIC + _U32.pack(VERSION) + _U32.pack(len(text)) + text + encode_records(OrderedDict(named))
    _atomic_write_bytes(Path(path), payload)


def load_feature_weights(path) -> list[tuple[np.ndarray, np.ndarray]]:
    _, arrays = decode_checkpoint(Path(path).read_bytes())
    stages = []
    i = 0
    while f"phi.{i}.w" in arrays:
        stages.append((arrays[f"phi.{i}.w"], arrays[f"phi.{i}.b"]))
        i += 1
    if not stages:
        raise FormatError(f"{path}: no phi.<k>.w records")
    return stages
