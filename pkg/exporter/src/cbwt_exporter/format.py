"""Writers for the CBWT tensor format and its manifest.

CBWT, all little-endian: magic ``CBWT``, uint32 version (1), uint32 dtype
code (0 = float32), uint32 ndim, ndim uint64 dims, then the row-major
float32 payload. The manifest is UTF-8 text, one ``name<TAB>role<TAB>path``
line per tensor, paths relative to the manifest's directory.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CBWT"
VERSION = 1
DTYPE_FLOAT32 = 0
ROLES = ("weights", "eval_input", "eval_label")


class ExportError(ValueError):
    """Invalid export request or checkpoint content."""


def cbwt_bytes(dims: tuple[int, ...], data: np.ndarray) -> bytes:
    """Serialize a float32 array; the exact bytes a CBWT reader expects."""
    dims = tuple(int(d) for d in dims)
    if any(d <= 0 for d in dims):
        raise ExportError(f"dims must be positive, got {dims}")
    flat = np.ascontiguousarray(data, dtype="<f4").reshape(-1)
    if flat.size != int(np.prod(dims)):
        raise ExportError(f"payload of {flat.size} values does not fill dims {dims}")
    if not np.isfinite(flat).all():
        raise ExportError("payload contains NaN/Inf")
    header = struct.pack("<4sIII", MAGIC, VERSION, DTYPE_FLOAT32, len(dims))
    return header + struct.pack(f"<{len(dims)}Q", *dims) + flat.tobytes()


def write_cbwt(path, dims: tuple[int, ...], data: np.ndarray) -> None:
    Path(path).write_bytes(cbwt_bytes(dims, data))


def write_manifest(entries: list[tuple[str, str, str]], path) -> None:
    """Write (name, role, relative-path) triples as manifest lines."""
    for name, role, rel in entries:
        if role not in ROLES:
            raise ExportError(f"unknown manifest role {role!r}")
        if "\t" in name or "\n" in name:
            raise ExportError(f"tensor name {name!r} cannot contain tabs/newlines")
    text = "".join(f"{name}\t{role}\t{rel}\n" for name, role, rel in entries)
    Path(path).write_text(text, encoding="utf-8")
