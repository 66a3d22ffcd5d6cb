"""Deterministic simulator and scheduler for reprogramming bit-sliced
compute-in-memory crossbars: sorted weight sectioning, stride scheduling,
round-balanced parallel programming and bit-stucking analysis."""

from .bitslice import (
    GLOBAL_MAX,
    PER_SECTION_MAX,
    BitMatrix,
    CrossbarGeometry,
    ScaleRule,
    SlicedSection,
    column_activity,
    explicit_scale,
    quantize,
    reconstruct,
    slice_section,
)
from .cost import CostLedger, best_next_section, reprogram_cost, sequence_cost
from .errors import (
    CapacityError,
    CrossbarError,
    FormatError,
    TruncatedFileError,
    UnsupportedWidthError,
    ValidationError,
)
from .scheduler import (
    ReprogramPlan,
    RoundSchedule,
    evaluate_plan,
    greedy_rounds,
    plan_stride_L,
    plan_stride_one,
    plan_unsorted_baseline,
    random_rounds,
)
from .stucksim import (
    StuckPolicy,
    eval_linear_error,
    reconstruct_weights,
    reprogram_with_stucking,
    run_schedule,
    sweep,
)
from .sws import SectionPlan, apply_index_matching, build_plan, slice_plan
from .tensor_store import Manifest, WeightTensor, load_manifest, read_tensor, write_tensor

__version__ = "0.1.0"
