"""Portable weight tensor files (CBWT) and the manifest that names them.

CBWT layout, all little-endian:

    bytes 0-3    magic "CBWT"
    bytes 4-7    uint32 version (= 1)
    bytes 8-11   uint32 dtype code (0 = float32, the only supported code)
    bytes 12-15  uint32 ndim
    next 8*ndim  uint64 dims
    rest         product(dims) float32 values, row-major

A manifest is UTF-8 text with one entry per line::

    name<TAB>role<TAB>path

where role is one of ``weights``, ``eval_input``, ``eval_label`` and path
is resolved relative to the manifest's own directory.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, TruncatedFileError, ValidationError

MAGIC = b"CBWT"
VERSION = 1
DTYPE_FLOAT32 = 0

MANIFEST_ROLES = ("weights", "eval_input", "eval_label")

_HEADER = struct.Struct("<4sIII")


@dataclass
class WeightTensor:
    """A named, shaped, real-valued weight array."""

    name: str
    dims: tuple[int, ...]
    data: np.ndarray  # float32, flat, row-major, len == prod(dims)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if any(d <= 0 for d in self.dims):
            raise ValidationError(f"tensor {self.name!r}: dims must be positive, got {self.dims}")
        self.data = np.ascontiguousarray(self.data, dtype=np.float32).reshape(-1)
        expected = int(np.prod(self.dims)) if self.dims else 1
        if self.data.size != expected:
            raise ValidationError(
                f"tensor {self.name!r}: data length {self.data.size} != product(dims) {expected}"
            )
        if not np.isfinite(self.data).all():
            raise ValidationError(f"tensor {self.name!r}: data contains NaN/Inf")

    @property
    def matrix(self) -> np.ndarray:
        """Data reshaped to dims (2-D tensors come back as matrices)."""
        return self.data.reshape(self.dims)


@dataclass
class ManifestEntry:
    name: str
    role: str
    path: Path
    dims: tuple[int, ...]


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def by_role(self, role: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.role == role]

    def load(self, name: str) -> WeightTensor:
        for e in self.entries:
            if e.name == name:
                t = read_tensor(e.path)
                t.name = name
                return t
        raise ValidationError(f"manifest has no tensor named {name!r}")


def write_tensor(t: WeightTensor, path) -> None:
    """Write ``t`` so that :func:`read_tensor` reproduces it bit-exactly."""
    path = Path(path)
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_FLOAT32, len(t.dims))
    dims = struct.pack(f"<{len(t.dims)}Q", *t.dims)
    payload = t.data.astype("<f4", copy=False).tobytes()
    path.write_bytes(header + dims + payload)


def read_tensor(path) -> WeightTensor:
    """Parse a CBWT file; the tensor's name defaults to the file stem."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise TruncatedFileError(f"{path}: shorter than the fixed header")
    magic, version, dtype, ndim = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_FLOAT32:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    offset = _HEADER.size
    if len(raw) < offset + 8 * ndim:
        raise TruncatedFileError(f"{path}: header declares {ndim} dims but file is too short")
    dims = struct.unpack_from(f"<{ndim}Q", raw, offset)
    offset += 8 * ndim
    count = 1
    for d in dims:
        if d == 0:
            raise FormatError(f"{path}: zero-sized dim in {dims}")
        count *= d
    if len(raw) != offset + 4 * count:
        raise TruncatedFileError(
            f"{path}: payload is {len(raw) - offset} bytes, expected {4 * count}"
        )
    data = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
    if not np.isfinite(data).all():
        raise ValidationError(f"{path}: payload contains NaN/Inf")
    return WeightTensor(name=path.stem, dims=dims, data=data.copy())


def load_manifest(path) -> Manifest:
    """Parse a manifest and resolve every entry (files must exist and parse)."""
    path = Path(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    text = path.read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}:{lineno}: expected name<TAB>role<TAB>path")
        name, role, rel = parts
        if role not in MANIFEST_ROLES:
            raise ValidationError(f"{path}:{lineno}: unknown role {role!r}")
        if name in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate tensor name {name!r}")
        seen.add(name)
        tensor_path = (base / rel) if not Path(rel).is_absolute() else Path(rel)
        if not tensor_path.exists():
            raise OSError(f"{path}:{lineno}: referenced file {tensor_path} does not exist")
        t = read_tensor(tensor_path)
        entries.append(ManifestEntry(name=name, role=role, path=tensor_path, dims=t.dims))
    return Manifest(entries=entries)


def write_manifest(entries: list[tuple[str, str, str]], path) -> None:
    """Write manifest lines; entries are (name, role, relative path) triples."""
    path = Path(path)
    lines = []
    for name, role, rel in entries:
        if role not in MANIFEST_ROLES:
            raise ValidationError(f"unknown role {role!r}")
        lines.append(f"{name}\t{role}\t{rel}")
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
