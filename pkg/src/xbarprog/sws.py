"""Sorted weight sectioning: magnitude sort, section partitioning, index matching.

Sorting is a one-time offline permutation; dot products stay correct because
every section remembers which original weight each slot holds (its index map),
and inputs are routed through that map at inference time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bitslice
from .bitslice import PAD_INDEX, CrossbarGeometry, ScaleRule, SlicedSection
from .errors import ValidationError

ORDER_SORTED = "sorted"
ORDER_ORIGINAL = "original"


@dataclass
class SectionPlan:
    """Partition of a flat weight vector into crossbar-sized sections."""

    order: str  # sorted | original
    section_size: int
    sections: list[np.ndarray]  # weight-index vectors, concatenation is a permutation
    permutation: np.ndarray  # sorted position -> original flat index

    @property
    def n_sections(self) -> int:
        return len(self.sections)

    @property
    def n_weights(self) -> int:
        return self.permutation.size


def build_plan(weights, section_size: int, order: str = ORDER_SORTED) -> SectionPlan:
    """Sort (stably, by |w| ascending) and chunk weights into sections.

    ``order="original"`` skips the sort and chunks in given order; the last
    section may be partial. Ties in |w| keep ascending original index.
    """
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.size == 0:
        raise ValidationError("cannot build a plan for an empty weight vector")
    if section_size < 1:
        raise ValidationError(f"section_size must be >= 1, got {section_size}")
    if order == ORDER_SORTED:
        permutation = np.argsort(np.abs(w), kind="stable").astype(np.int64)
    elif order == ORDER_ORIGINAL:
        permutation = np.arange(w.size, dtype=np.int64)
    else:
        raise ValidationError(f"unknown order {order!r}")
    sections = [permutation[i : i + section_size] for i in range(0, w.size, section_size)]
    return SectionPlan(
        order=order, section_size=section_size, sections=sections, permutation=permutation
    )


def slice_plan(
    weights,
    plan: SectionPlan,
    geometry: CrossbarGeometry,
    scale_rule: ScaleRule | None = None,
) -> list[SlicedSection]:
    """Materialize every section of a plan as a bit-sliced crossbar image.

    ``scale_rule`` defaults to per-section max; a ``global_max`` rule is
    resolved here over the whole weight vector and applied to every section
    as an explicit scale.
    """
    if scale_rule is None:
        scale_rule = bitslice.PER_SECTION_MAX
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if plan.section_size > geometry.capacity:
        raise ValidationError(
            f"plan section_size {plan.section_size} exceeds geometry capacity {geometry.capacity}"
        )
    if scale_rule.kind == "global_max":
        peak = float(np.abs(w).max())
        top = (1 << geometry.bits) - 1
        scale_rule = bitslice.explicit_scale(peak / top if peak > 0 else 1.0)
    return [
        bitslice.slice_section(w[idx], geometry, scale_rule, index_map=idx)
        for idx in plan.sections
    ]


def apply_index_matching(section: SlicedSection, input_vector) -> np.ndarray:
    """Per-slot products reconstruct(k) * input[index_map[k]]; padding gives 0.

    Summing the result over all sections of a plan reproduces the dot product
    of the unsorted layout (exactly, under a shared explicit scale).
    """
    x = np.asarray(input_vector, dtype=np.float64).reshape(-1)
    idx = section.index_map
    live = idx != PAD_INDEX
    if live.any() and int(idx[live].max()) >= x.size:
        raise ValidationError(
            f"input length {x.size} does not cover index {int(idx[live].max())}"
        )
    if (idx[live] < 0).any():
        raise ValidationError("index_map contains negative non-padding indices")
    values = bitslice.reconstruct(section)
    products = np.zeros(section.geometry.capacity, dtype=np.float64)
    # padding is always the tail, so live slots are exactly the first n_weights
    products[: section.n_weights] = values * x[idx[: section.n_weights]]
    return products
