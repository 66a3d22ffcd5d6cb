"""Sign-magnitude fixed-point quantization and bit-slicing onto crossbars.

Weights are quantized to B-bit magnitudes plus an out-of-band sign vector,
then laid out on a binary memristor matrix. Layout convention (the physical
column order is not observable through any public computation, but per-column
accounting depends on it):

* slots fill row-major: weight k lands in row ``k // slots_per_row``,
  slot ``k % slots_per_row``;
* a slot occupies ``bits`` adjacent physical columns; the physical column of
  bit j in slot s is ``s * bits + j``, so significance of physical column c
  is ``c % bits`` and j = 0 is always the lowest-order (LSB) column.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, UnsupportedWidthError, ValidationError

MAX_BITS = 30

PAD_INDEX = -1  # index_map sentinel for padding slots


@dataclass(frozen=True)
class CrossbarGeometry:
    """Crossbar dimensions: memristor rows, bit columns per weight, weights per row."""

    rows: int = 128
    bits: int = 10
    slots_per_row: int = 1

    def __post_init__(self):
        if self.rows < 1 or self.bits < 1 or self.slots_per_row < 1:
            raise ValidationError(f"geometry fields must be positive: {self}")
        if self.bits > MAX_BITS:
            raise UnsupportedWidthError(f"bits={self.bits} exceeds supported maximum {MAX_BITS}")

    @property
    def capacity(self) -> int:
        """Weights held by one crossbar."""
        return self.rows * self.slots_per_row

    @property
    def cols(self) -> int:
        """Physical memristor columns."""
        return self.slots_per_row * self.bits


class BitMatrix:
    """Binary memristor state matrix (0 = inactive, 1 = active)."""

    __slots__ = ("cells",)

    def __init__(self, cells: np.ndarray):
        cells = np.asarray(cells, dtype=np.uint8)
        if cells.ndim != 2:
            raise ValidationError(f"bit matrix must be 2-D, got shape {cells.shape}")
        if cells.size and cells.max() > 1:
            raise ValidationError("bit matrix cells must be 0 or 1")
        self.cells = cells

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(np.zeros((rows, cols), dtype=np.uint8))

    @property
    def rows(self) -> int:
        return self.cells.shape[0]

    @property
    def cols(self) -> int:
        return self.cells.shape[1]

    def copy(self) -> "BitMatrix":
        return BitMatrix(self.cells.copy())

    def same_shape(self, other: "BitMatrix") -> bool:
        return self.cells.shape == other.cells.shape

    def __eq__(self, other):
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.cells.shape == other.cells.shape and bool((self.cells == other.cells).all())

    def __repr__(self):
        return f"BitMatrix({self.rows}x{self.cols})"


@dataclass(frozen=True)
class ScaleRule:
    """How the quantization step size is chosen.

    ``per_section_max`` maps each section's own max |w| to full scale,
    ``global_max`` does the same over the whole tensor (resolved by the
    sectioning pipeline and passed down as an explicit scale), and
    ``explicit`` pins the step directly.
    """

    kind: str  # per_section_max | global_max | explicit
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("per_section_max", "global_max", "explicit"):
            raise ValidationError(f"unknown scale rule {self.kind!r}")
        if self.kind == "explicit":
            if self.value is None or not (self.value > 0):
                raise ValidationError("explicit scale must be > 0")
        elif self.value is not None:
            raise ValidationError(f"{self.kind} takes no value")


PER_SECTION_MAX = ScaleRule("per_section_max")
GLOBAL_MAX = ScaleRule("global_max")


def explicit_scale(scale: float) -> ScaleRule:
    return ScaleRule("explicit", float(scale))


@dataclass
class SlicedSection:
    """One crossbar's worth of weights in bit-sliced form."""

    geometry: CrossbarGeometry
    bitmatrix: BitMatrix
    signs: np.ndarray  # int8 in {-1, 0, +1}, length = capacity
    scale: float
    index_map: np.ndarray  # int64 original flat indices, PAD_INDEX for padding
    pad_count: int = 0

    @property
    def n_weights(self) -> int:
        return self.geometry.capacity - self.pad_count

    def magnitudes(self) -> np.ndarray:
        """Integer magnitude of every slot (padding included), from bit state."""
        return slot_bits(self.bitmatrix, self.geometry) @ (
            1 << np.arange(self.geometry.bits, dtype=np.int64)
        )


def _round_half_away(x: np.ndarray) -> np.ndarray:
    # x >= 0 here, so half-away-from-zero == floor(x + 0.5)
    return np.floor(x + 0.5)


def quantize(weights, bits: int, scale_rule: ScaleRule = PER_SECTION_MAX):
    """Quantize real weights to B-bit magnitudes, signs and a scale.

    Returns (magnitudes int64 in [0, 2^B - 1], signs int8, scale float).
    Magnitude is round-half-away-from-zero of |w| / scale, clamped; the sign
    of a weight whose magnitude rounds to zero is 0.
    """
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.size == 0:
        raise ValidationError("cannot quantize an empty weight vector")
    if not np.isfinite(w).all():
        raise ValidationError("weights must be finite")
    if bits < 1:
        raise ValidationError(f"bit count must be >= 1, got {bits}")
    if bits > MAX_BITS:
        raise UnsupportedWidthError(f"bits={bits} exceeds supported maximum {MAX_BITS}")

    top = (1 << bits) - 1
    if scale_rule.kind == "explicit":
        scale = float(scale_rule.value)
    else:
        # per_section_max and global_max both resolve over the given vector;
        # callers sectioning a larger tensor pass global scales explicitly.
        peak = float(np.abs(w).max())
        scale = peak / top if peak > 0 else 1.0

    magnitudes = _round_half_away(np.abs(w) / scale)
    magnitudes = np.clip(magnitudes, 0, top).astype(np.int64)
    signs = np.sign(w).astype(np.int8)
    signs[magnitudes == 0] = 0
    return magnitudes, signs, scale


def slice_section(
    weights,
    geometry: CrossbarGeometry,
    scale_rule: ScaleRule = PER_SECTION_MAX,
    index_map=None,
) -> SlicedSection:
    """Map up to ``capacity`` weights onto one crossbar's bit matrix.

    ``index_map`` records each slot's original flat weight index (defaults to
    0..n-1); missing slots are padded with magnitude 0 and PAD_INDEX.
    """
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    cap = geometry.capacity
    if w.size > cap:
        raise CapacityError(f"{w.size} weights exceed crossbar capacity {cap}")
    magnitudes, signs, scale = quantize(w, geometry.bits, scale_rule)

    full_m = np.zeros(cap, dtype=np.int64)
    full_m[: w.size] = magnitudes
    full_signs = np.zeros(cap, dtype=np.int8)
    full_signs[: w.size] = signs

    if index_map is None:
        index_map = np.arange(w.size, dtype=np.int64)
    else:
        index_map = np.asarray(index_map, dtype=np.int64).reshape(-1)
        if index_map.size != w.size:
            raise ValidationError("index_map length must match weight count")
    full_index = np.full(cap, PAD_INDEX, dtype=np.int64)
    full_index[: w.size] = index_map

    # slot k -> bits LSB-first, then rows x (slots_per_row * bits)
    bits_lsb = (full_m[:, None] >> np.arange(geometry.bits, dtype=np.int64)) & 1
    cells = bits_lsb.astype(np.uint8).reshape(geometry.rows, geometry.cols)
    return SlicedSection(
        geometry=geometry,
        bitmatrix=BitMatrix(cells),
        signs=full_signs,
        scale=scale,
        index_map=full_index,
        pad_count=cap - w.size,
    )


def slot_bits(matrix: BitMatrix, geometry: CrossbarGeometry) -> np.ndarray:
    """View a bit matrix as (capacity, bits): one LSB-first bit row per slot."""
    if matrix.rows != geometry.rows or matrix.cols != geometry.cols:
        raise ValidationError(
            f"matrix {matrix.rows}x{matrix.cols} does not match geometry "
            f"{geometry.rows}x{geometry.cols}"
        )
    return matrix.cells.reshape(geometry.capacity, geometry.bits)


def reconstruct(section: SlicedSection, state: BitMatrix | None = None) -> np.ndarray:
    """Real weights from bit state (padding slots excluded).

    ``state`` substitutes a possibly stale bit matrix for the section's own;
    signs, scale and slot layout still come from the section.
    """
    matrix = section.bitmatrix if state is None else state
    bits = slot_bits(matrix, section.geometry)
    powers = 1 << np.arange(section.geometry.bits, dtype=np.int64)
    magnitudes = bits.astype(np.int64) @ powers
    values = section.signs.astype(np.float64) * section.scale * magnitudes
    n = section.n_weights
    return values[:n]


def column_activity(sections) -> np.ndarray:
    """Fraction of non-padding slots with bit j active, pooled over sections."""
    sections = list(sections)
    if not sections:
        raise ValidationError("column_activity needs at least one section")
    bits = sections[0].geometry.bits
    ones = np.zeros(bits, dtype=np.int64)
    slots = 0
    for s in sections:
        if s.geometry.bits != bits:
            raise ValidationError("sections must share a bit width")
        n = s.n_weights
        ones += slot_bits(s.bitmatrix, s.geometry)[:n].sum(axis=0, dtype=np.int64)
        slots += n
    if slots == 0:
        return np.zeros(bits, dtype=np.float64)
    return ones / slots
