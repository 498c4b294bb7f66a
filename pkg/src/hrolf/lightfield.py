"""Light-field container, slicing helpers and on-disk formats.

Samples live on the [0, 255] scale in an array laid out ``(S, T, X, Y, C)``:
``s`` is the row angular axis, ``x`` the first spatial axis.
"""

from __future__ import annotations

import os
import re
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError, FormatError, RangeError, ShapeError

LF4_MAGIC = b"LF4\0"
LF4_VERSION = 1
_LF4_HEADER = struct.Struct("<4sIIIIIIB")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("u1")}
_VIEW_RE = re.compile(r"^view_(\d+)_(\d+)\.(png|pgm|ppm)$", re.IGNORECASE)


class LightField:
    """Immutable 4-D grid of views.

    Parameters
    ----------
    data : array_like
        Samples with shape ``(S, T, X, Y)`` or ``(S, T, X, Y, C)``, C in {1, 3}.
        Float32/float64 input keeps its precision; anything else becomes float32.
    """

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.asarray(data)
        if arr.ndim == 4:
            arr = arr[..., None]
        if arr.ndim != 5:
            raise ShapeError(f"light field needs 5 axes (S,T,X,Y,C), got shape {arr.shape}")
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        if min(arr.shape[:4]) < 1:
            raise ShapeError(f"light field extents must be >= 1, got {arr.shape[:4]}")
        if arr.shape[4] not in (1, 3):
            raise ShapeError(f"channel count must be 1 or 3, got {arr.shape[4]}")
        if not np.all(np.isfinite(arr)):
            raise ShapeError("light field samples must be finite")
        arr = np.array(arr, copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "_data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("LightField is immutable")

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, int, int, int, int]:
        return self._data.shape

    S = property(lambda self: self._data.shape[0])
    T = property(lambda self: self._data.shape[1])
    X = property(lambda self: self._data.shape[2])
    Y = property(lambda self: self._data.shape[3])
    C = property(lambda self: self._data.shape[4])

    @property
    def angular(self) -> tuple[int, int]:
        return self.S, self.T

    @property
    def spatial(self) -> tuple[int, int]:
        return self.X, self.Y

    def view(self, s: int, t: int) -> np.ndarray:
        """Sub-aperture image at (s, t), shape (X, Y, C)."""
        return self._data[s, t]

    def center(self) -> tuple[int, int]:
        return center_index(self.S), center_index(self.T)

    def astype(self, dtype) -> "LightField":
        return LightField(self._data.astype(dtype))

    def __eq__(self, other):
        if not isinstance(other, LightField):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._data, other._data)

    __hash__ = None

    def __repr__(self):
        S, T, X, Y, C = self.shape
        return f"LightField(S={S}, T={T}, X={X}, Y={Y}, C={C}, dtype={self._data.dtype})"


def center_index(n: int) -> int:
    """Index of the central view along an angular axis of length ``n``."""
    return (n - 1) // 2


@dataclass(frozen=True)
class Epi:
    """Epipolar plane image.

    ``values`` is X x S for horizontal slices (fixed y, t) and Y x T for
    vertical slices (fixed x, s).
    """

    values: np.ndarray
    orientation: str


def extract_epi(lf: LightField, orientation: str, spatial_index: int, angular_index: int, channel: int = 0) -> Epi:
    if not 0 <= channel < lf.C:
        raise RangeError(f"channel {channel} outside [0, {lf.C})")
    if orientation == "horizontal":
        if not 0 <= spatial_index < lf.Y:
            raise RangeError(f"y={spatial_index} outside [0, {lf.Y})")
        if not 0 <= angular_index < lf.T:
            raise RangeError(f"t={angular_index} outside [0, {lf.T})")
        vals = lf.data[:, angular_index, :, spatial_index, channel].T
    elif orientation == "vertical":
        if not 0 <= spatial_index < lf.X:
            raise RangeError(f"x={spatial_index} outside [0, {lf.X})")
        if not 0 <= angular_index < lf.S:
            raise RangeError(f"s={angular_index} outside [0, {lf.S})")
        vals = lf.data[angular_index, :, spatial_index, :, channel].T
    else:
        raise ConfigError(f"orientation must be 'horizontal' or 'vertical', got {orientation!r}")
    return Epi(np.array(vals), orientation)


def crop_patch(lf: LightField, x0: int, y0: int, w: int, h: int) -> LightField:
    """Crop every view identically to ``[x0, x0+w) x [y0, y0+h)``."""
    if w < 1 or h < 1 or x0 < 0 or y0 < 0 or x0 + w > lf.X or y0 + h > lf.Y:
        raise RangeError(f"crop ({x0},{y0},{w},{h}) outside spatial extent {lf.X}x{lf.Y}")
    return LightField(lf.data[:, :, x0:x0 + w, y0:y0 + h, :])


# ---------------------------------------------------------------------------
# file formats


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _to_u8(values: np.ndarray) -> np.ndarray:
    """Round half up and clamp to [0, 255]."""
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def encode_lf4(lf: LightField, dtype: str = "f32") -> bytes:
    S, T, X, Y, C = lf.shape
    code = {"f32": 0, "u8": 1}[dtype]
    payload = lf.data.transpose(0, 1, 3, 2, 4)  # (s, t, y, x, c)
    if code == 0:
        body = np.ascontiguousarray(payload, dtype="<f4").tobytes()
    else:
        body = _to_u8(payload).tobytes()
    return _LF4_HEADER.pack(LF4_MAGIC, LF4_VERSION, S, T, X, Y, C, code) + body


def decode_lf4(buf: bytes) -> LightField:
    if len(buf) < _LF4_HEADER.size:
        raise FormatError(f"header: truncated ({len(buf)} bytes, need {_LF4_HEADER.size})")
    magic, version, S, T, X, Y, C, code = _LF4_HEADER.unpack_from(buf)
    if magic != LF4_MAGIC:
        raise FormatError(f"magic: expected {LF4_MAGIC!r}, found {magic!r}")
    if version != LF4_VERSION:
        raise FormatError(f"version: expected {LF4_VERSION}, found {version}")
    if code not in _DTYPES:
        raise FormatError(f"dtype: unknown code {code}")
    if min(S, T, X, Y) < 1 or C not in (1, 3):
        raise FormatError(f"dims: invalid S={S} T={T} X={X} Y={Y} C={C}")
    dt = _DTYPES[code]
    n = S * T * X * Y * C
    body = buf[_LF4_HEADER.size:]
    if len(body) != n * dt.itemsize:
        raise FormatError(f"payload: expected {n * dt.itemsize} bytes, found {len(body)}")
    arr = np.frombuffer(body, dtype=dt).reshape(S, T, Y, X, C).transpose(0, 1, 3, 2, 4)
    return LightField(arr.astype(np.float32))


def save_lightfield(lf: LightField, path, format: str = "lf4", dtype: str = "f32") -> None:
    """Write ``lf`` as an lf4 file or as a directory of 8-bit views.

    The view-directory format rounds and clamps samples to [0, 255].
    """
    if not isinstance(lf, LightField):
        lf = LightField(lf)
    path = Path(path)
    try:
        if format == "lf4":
            _atomic_write_bytes(path, encode_lf4(lf, dtype))
        elif format == "view-directory":
            _save_view_directory(lf, path)
        else:
            raise ConfigError(f"unknown light-field format {format!r}")
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc


def load_lightfield(path, format: str | None = None) -> LightField:
    path = Path(path)
    if format is None:
        format = "view-directory" if path.is_dir() else "lf4"
    if format == "lf4":
        try:
            return decode_lf4(path.read_bytes())
        except FormatError as exc:
            raise FormatError(f"{path}: {exc}") from None
    if format == "view-directory":
        return _load_view_directory(path)
    raise ConfigError(f"unknown light-field format {format!r}")


def _save_view_directory(lf: LightField, path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)
    S, T, X, Y, C = lf.shape
    for s in range(S):
        for t in range(T):
            img = _to_u8(lf.data[s, t])
            # PIL images are (rows=y, cols=x)
            img = img.transpose(1, 0, 2)
            pil = Image.fromarray(np.ascontiguousarray(img[..., 0] if C == 1 else img))
            pil.save(path / f"view_{s:02d}_{t:02d}.png")
    (path / "manifest.txt").write_text(f"S={S}\nT={T}\nC={C}\n")


def _read_manifest(path: Path) -> dict[str, int]:
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise FormatError(f"{path}:{lineno}: expected key=value")
        try:
            out[key.strip()] = int(val)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: {key.strip()} is not an integer") from None
    return out


def _load_view_directory(path: Path) -> LightField:
    files = {}
    for p in path.iterdir():
        m = _VIEW_RE.match(p.name)
        if m:
            files[(int(m.group(1)), int(m.group(2)))] = p
    if not files:
        raise FormatError(f"{path}: no view_SS_TT images found")
    manifest_path = path / "manifest.txt"
    if manifest_path.exists():
        man = _read_manifest(manifest_path)
        for key in ("S", "T", "C"):
            if key not in man:
                raise FormatError(f"{manifest_path}: missing {key}")
        S, T, C = man["S"], man["T"], man["C"]
    else:
        S = max(s for s, _ in files) + 1
        T = max(t for _, t in files) + 1
        C = None
    views = []
    size = None
    for s in range(S):
        row = []
        for t in range(T):
            if (s, t) not in files:
                raise FormatError(f"{path}: view_{s:02d}_{t:02d} missing")
            with Image.open(files[(s, t)]) as im:
                arr = np.asarray(im)
            if arr.ndim == 2:
                arr = arr[..., None]
            if C is None:
                C = arr.shape[2]
            if arr.shape[2] == 4 and C == 3:
                arr = arr[..., :3]
            if arr.shape[2] != C:
                raise FormatError(f"{files[(s, t)].name}: channels {arr.shape[2]} != C={C}")
            if size is None:
                size = arr.shape[:2]
            elif arr.shape[:2] != size:
                raise FormatError(
                    f"{files[(s, t)].name}: size {arr.shape[1]}x{arr.shape[0]} differs from {size[1]}x{size[0]}"
                )
            row.append(arr.transpose(1, 0, 2))
        views.append(row)
    return LightField(np.asarray(views, dtype=np.float32))
