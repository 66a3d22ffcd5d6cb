"""Reprogramming costs between crossbar states.

The cost of converting state A into state B is the number of memristors whose
bits differ (a Hamming distance over the cell grid); unchanged cells face no
transitional state. Also provides the brute-force minimum-cost next-section
search the unsorted-optimal baseline uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .bitslice import BitMatrix, SlicedSection
from .errors import ValidationError


class StepCost(NamedTuple):
    step: int
    section: int
    switches: int


@dataclass
class CostLedger:
    """Switch-count bookkeeping for one crossbar's programming sequence."""

    total_switches: int = 0
    per_column: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    per_step: list[StepCost] = field(default_factory=list)

    def check(self) -> None:
        if self.total_switches != sum(s.switches for s in self.per_step):
            raise ValidationError("ledger total != sum of per-step switches")
        if self.per_column.size and self.total_switches != int(self.per_column.sum()):
            raise ValidationError("ledger total != sum of per-column switches")


def _diff_by_significance(a: BitMatrix, b: BitMatrix, bits: int | None) -> np.ndarray:
    if not a.same_shape(b):
        raise ValidationError(
            f"dimension mismatch: {a.rows}x{a.cols} vs {b.rows}x{b.cols}"
        )
    diff = (a.cells != b.cells).sum(axis=0, dtype=np.int64)  # per physical column
    if bits is None:
        return diff
    if a.cols % bits != 0:
        raise ValidationError(f"{a.cols} physical columns not divisible by bits={bits}")
    return diff.reshape(-1, bits).sum(axis=0, dtype=np.int64)


def reprogram_cost(a: BitMatrix, b: BitMatrix, bits: int | None = None):
    """Switches needed to convert state ``a`` into ``b``.

    Returns (total, per_column). With ``bits`` given, per-column counts fold
    physical columns by bit significance (significance = column % bits);
    otherwise each physical column is reported separately.
    """
    per_column = _diff_by_significance(a, b, bits)
    return int(per_column.sum()), per_column


def best_next_section(current: BitMatrix, candidates: list[SlicedSection]):
    """Index and cost of the candidate cheapest to program from ``current``.

    Ties break toward the lowest candidate index, so scans are deterministic.
    """
    if not candidates:
        raise ValidationError("best_next_section needs at least one candidate")
    best_idx = -1
    best_cost = -1
    for i, cand in enumerate(candidates):
        total, _ = reprogram_cost(current, cand.bitmatrix)
        if best_idx < 0 or total < best_cost:
            best_idx, best_cost = i, total
    return best_idx, best_cost


def sequence_cost(
    initial: BitMatrix | None,
    sections: list[SlicedSection],
    section_ids: list[int] | None = None,
) -> CostLedger:
    """Ledger for programming ``sections`` in order, starting from ``initial``.

    ``initial=None`` means an erased (all-zero) crossbar. State updates fully
    at each step; per-column counts fold by bit significance.
    """
    if section_ids is None:
        section_ids = list(range(len(sections)))
    if len(section_ids) != len(sections):
        raise ValidationError("section_ids length must match sections")
    if not sections:
        return CostLedger()

    geometry = sections[0].geometry
    for s in sections:
        if s.geometry != geometry:
            raise ValidationError("sections in a sequence must share geometry")
    state = BitMatrix.zeros(geometry.rows, geometry.cols) if initial is None else initial
    if state.rows != geometry.rows or state.cols != geometry.cols:
        raise ValidationError("initial state does not match section geometry")

    per_column = np.zeros(geometry.bits, dtype=np.int64)
    per_step: list[StepCost] = []
    for step, (sid, section) in enumerate(zip(section_ids, sections)):
        cols = _diff_by_significance(state, section.bitmatrix, geometry.bits)
        per_column += cols
        per_step.append(StepCost(step=step, section=sid, switches=int(cols.sum())))
        state = section.bitmatrix
    return CostLedger(
        total_switches=int(per_column.sum()), per_column=per_column, per_step=per_step
    )
