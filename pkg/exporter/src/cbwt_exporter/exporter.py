"""Checkpoint-to-CBWT conversion.

Only weight matrices travel: tensors of rank >= 2 whose name matches the
layer filter. Rank-1 tensors (biases, norm scales) stay behind, and tensors
above rank 2 flatten to (first dim, product of the rest) so a convolution
kernel (64, 3, 7, 7) lands as a 64x147 matrix. Everything is cast to
float32 on the way out.
"""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .format import ExportError, write_cbwt, write_manifest


@dataclass
class ExportSpec:
    model: str  # path to a torch checkpoint (state_dict, possibly nested)
    layers: tuple[str, ...] = ("*",)
    out_dir: Path = Path(".")
    eval_batch: int = 0
    seed: int = 0
    eval_layer: str | None = None  # defaults to the first exported layer
    input_width: int | None = None  # must match the eval layer when given

    def __post_init__(self):
        if isinstance(self.layers, str):
            self.layers = (self.layers,)
        self.layers = tuple(self.layers)
        self.out_dir = Path(self.out_dir)
        if self.eval_batch < 0:
            raise ExportError(f"eval batch size must be >= 0, got {self.eval_batch}")


def load_checkpoint(path) -> dict[str, torch.Tensor]:
    """Tensor name -> tensor map from a saved checkpoint."""
    state = torch.load(Path(path), map_location="cpu", weights_only=True)
    if isinstance(state, dict) and isinstance(state.get("state_dict"), dict):
        state = state["state_dict"]
    if not isinstance(state, dict) or not state:
        raise ExportError(f"{path}: checkpoint does not hold a tensor mapping")
    tensors = {k: v for k, v in state.items() if isinstance(v, torch.Tensor)}
    if not tensors:
        raise ExportError(f"{path}: checkpoint holds no tensors")
    return tensors


def matched_matrices(
    state: dict[str, torch.Tensor], patterns: tuple[str, ...]
) -> dict[str, np.ndarray]:
    """Matching rank >= 2 tensors as float32 matrices, checkpoint order."""
    out: dict[str, np.ndarray] = {}
    for name, tensor in state.items():
        if tensor.ndim < 2:
            continue
        if not any(fnmatch.fnmatchcase(name, p) for p in patterns):
            continue
        mat = tensor.detach().to(torch.float32).numpy()
        if mat.ndim > 2:
            mat = mat.reshape(mat.shape[0], -1)
        if not np.isfinite(mat).all():
            raise ExportError(f"layer {name!r} contains NaN/Inf values")
        out[name] = mat
    if not out:
        raise ExportError(f"no rank>=2 layers match {list(patterns)}")
    return out


def _file_name(layer: str) -> str:
    return layer.replace(".", "_").replace("/", "_") + ".cbwt"


def eval_batch_arrays(
    spec: ExportSpec, weights: dict[str, np.ndarray]
) -> tuple[str, np.ndarray, np.ndarray]:
    """Seeded input batch and float reference outputs for one linear layer."""
    if spec.eval_batch <= 0:
        raise ExportError(f"eval batch size must be >= 1, got {spec.eval_batch}")
    layer = spec.eval_layer if spec.eval_layer is not None else next(iter(weights))
    if layer not in weights:
        raise ExportError(f"eval layer {layer!r} is not among the exported layers")
    mat = weights[layer]
    if spec.input_width is not None and spec.input_width != mat.shape[1]:
        raise ExportError(
            f"input width {spec.input_width} does not match layer {layer!r} "
            f"which expects {mat.shape[1]} features"
        )
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(int(spec.seed) & 0xFFFFFFFFFFFFFFFF))
    )
    x = rng.normal(size=(spec.eval_batch, mat.shape[1])).astype(np.float32)
    y = (x.astype(np.float64) @ mat.astype(np.float64).T).astype(np.float32)
    return layer, x, y


def export_eval_batch(spec: ExportSpec) -> list[tuple[str, str, str]]:
    """Write the eval input/reference files; returns their manifest entries."""
    weights = matched_matrices(load_checkpoint(spec.model), spec.layers)
    layer, x, y = eval_batch_arrays(spec, weights)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for role, arr, stem in (
        ("eval_input", x, f"eval_input_{layer}"),
        ("eval_label", y, f"eval_label_{layer}"),
    ):
        fname = _file_name(stem)
        write_cbwt(spec.out_dir / fname, arr.shape, arr)
        entries.append((stem, role, fname))
    return entries


def export_model(spec: ExportSpec) -> Path:
    """Write one CBWT per matched layer plus the manifest; returns its path."""
    weights = matched_matrices(load_checkpoint(spec.model), spec.layers)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, mat in weights.items():
        fname = _file_name(name)
        write_cbwt(spec.out_dir / fname, mat.shape, mat)
        entries.append((name, "weights", fname))
    if spec.eval_batch > 0:
        layer, x, y = eval_batch_arrays(spec, weights)
        for role, arr, stem in (
            ("eval_input", x, f"eval_input_{layer}"),
            ("eval_label", y, f"eval_label_{layer}"),
        ):
            fname = _file_name(stem)
            write_cbwt(spec.out_dir / fname, arr.shape, arr)
            entries.append((stem, role, fname))
    manifest = spec.out_dir / "manifest.tsv"
    write_manifest(entries, manifest)
    return manifest
