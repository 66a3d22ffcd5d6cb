"""Checkpoint-to-CBWT exporter: weight matrices out of torch checkpoints,
into the portable tensor format, with a manifest and optional eval batch."""

from .exporter import (
    ExportSpec,
    eval_batch_arrays,
    export_eval_batch,
    export_model,
    load_checkpoint,
    matched_matrices,
)
from .format import ExportError, cbwt_bytes, write_cbwt, write_manifest

__version__ = "0.1.0"
