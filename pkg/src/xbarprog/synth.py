"""Seeded synthetic tensors, so experiments run without any exported model."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .tensor_store import WeightTensor, write_manifest, write_tensor


def gaussian_weights(n: int, seed: int, std: float = 1.0) -> np.ndarray:
    """n float32 draws from N(0, std^2), reproducible for a given seed."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF)))
    return rng.normal(0.0, std, size=n).astype(np.float32)


def gaussian_tensor(name: str, dims, seed: int, std: float = 1.0) -> WeightTensor:
    n = int(np.prod(dims))
    return WeightTensor(name=name, dims=tuple(dims), data=gaussian_weights(n, seed, std))


def write_gaussian_manifest(
    out_dir,
    layers: list[tuple[str, tuple[int, ...]]],
    seed: int,
    eval_batch: int = 0,
) -> Path:
    """Write Gaussian CBWT tensors plus a manifest; returns the manifest path.

    With ``eval_batch`` > 0 also writes one eval_input batch shaped
    (eval_batch, in_features) per distinct in_features among 2-D layers.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (name, dims) in enumerate(layers):
        t = gaussian_tensor(name, dims, seed + i)
        write_tensor(t, out_dir / f"{name}.cbwt")
        entries.append((name, "weights", f"{name}.cbwt"))
    if eval_batch > 0:
        widths = []
        for name, dims in layers:
            if len(dims) == 2 and dims[1] not in widths:
                widths.append(dims[1])
        for j, width in enumerate(widths):
            t = gaussian_tensor(f"eval_input_{width}", (eval_batch, width), seed + 10_000 + j)
            write_tensor(t, out_dir / f"{t.name}.cbwt")
            entries.append((t.name, "eval_input", f"{t.name}.cbwt"))
    manifest_path = out_dir / "manifest.tsv"
    write_manifest(entries, manifest_path)
    return manifest_path
