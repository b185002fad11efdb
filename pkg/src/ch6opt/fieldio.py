"""Binary field files, CSV tables and atomic writes.

Field file layout (all little-endian)::

    magic    4 bytes   b"CH6F"
    version  uint16    1
    dim      uint8     1..3
    kind     uint8     0 = nodal, 1 = spectral
    counts   uint32 x dim
    payload  float64 x prod(counts), row-major by axis order
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .spectral import Grid, GridField, SpectralField

__all__ = [
    "FieldFormatError",
    "FieldKindError",
    "write_field",
    "read_field",
    "read_raw",
    "write_csv",
    "atomic_write_bytes",
    "atomic_write_text",
]

MAGIC = b"CH6F"
VERSION = 1
KINDS = {"nodal": 0, "spectral": 1}
_KIND_NAMES = {v: k for k, v in KINDS.items()}


class FieldFormatError(ValueError):
    """Malformed, truncated or unsupported field file."""


class FieldKindError(FieldFormatError):
    """Field file holds nodal data where spectral was expected, or vice versa."""


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _encode(kind: str, values: np.ndarray) -> bytes:
    values = np.ascontiguousarray(values, dtype="<f8")
    dim = values.ndim
    if dim not in (1, 2, 3):
        raise FieldFormatError(f"fields must be 1-, 2- or 3-dimensional, got {dim}")
    head = MAGIC + struct.pack("<HBB", VERSION, dim, KINDS[kind]) + struct.pack(f"<{dim}I", *values.shape)
    return head + values.tobytes(order="C")


def write_field(path, f: Union[SpectralField, GridField]) -> None:
    """Write a field atomically; the kind flag follows the field type."""
    if isinstance(f, SpectralField):
        data = _encode("spectral", f.coeffs)
    elif isinstance(f, GridField):
        data = _encode("nodal", f.values)
    else:
        raise TypeError("expected a SpectralField or GridField")
    atomic_write_bytes(path, data)


def read_raw(path) -> tuple[str, np.ndarray]:
    """Read a field file without a grid; returns ``(kind, array)``."""
    buf = Path(path).read_bytes()
    if len(buf) < 8:
        raise FieldFormatError(f"{path}: truncated header")
    if buf[:4] != MAGIC:
        raise FieldFormatError(f"{path}: bad magic {buf[:4]!r}")
    version, dim, kind = struct.unpack("<HBB", buf[4:8])
    if version != VERSION:
        raise FieldFormatError(f"{path}: unknown format version {version}")
    if dim not in (1, 2, 3):
        raise FieldFormatError(f"{path}: invalid dimension {dim}")
    if kind not in _KIND_NAMES:
        raise FieldFormatError(f"{path}: invalid kind flag {kind}")
    end = 8 + 4 * dim
    if len(buf) < end:
        raise FieldFormatError(f"{path}: truncated header")
    counts = struct.unpack(f"<{dim}I", buf[8:end])
    n = int(np.prod(counts))
    payload = buf[end:]
    if len(payload) < 8 * n:
        raise FieldFormatError(f"{path}: truncated payload ({len(payload)} of {8 * n} bytes)")
    if len(payload) > 8 * n:
        raise FieldFormatError(f"{path}: trailing bytes after payload")
    arr = np.frombuffer(payload, dtype="<f8").reshape(counts).astype(float)
    return _KIND_NAMES[kind], arr


def read_field(path, grid: Grid, kind: str | None = None) -> Union[SpectralField, GridField]:
    """Read a field for ``grid``.

    Parameters
    ----------
    kind : {"nodal", "spectral"}, optional
        Required kind; a mismatch raises :class:`FieldKindError`.
    """
    got, arr = read_raw(path)
    if kind is not None and got != kind:
        raise FieldKindError(f"{path}: expected a {kind} field, file holds {got} data")
    if arr.shape != grid.modes:
        raise FieldFormatError(f"{path}: counts {arr.shape} do not match grid {grid.modes}")
    return SpectralField(grid, arr) if got == "spectral" else GridField(grid, arr)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.17g" % float(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """CSV with 17 significant digits (binary64 round-trip safe)."""
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")
