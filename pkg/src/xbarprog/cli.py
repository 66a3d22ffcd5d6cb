"""Command-line reports: analyze tensors, plan reprogramming schedules,
balance rounds, simulate bit stucking, and sweep parameter grids.

Reports are deterministic for a fixed config: no timestamps, JSON keys
sorted, CSV rows emitted in document order with a fixed ``key,value``
header. Exit codes: 0 success, 2 config/validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import bitslice, scheduler, stucksim, sws, synth, tensor_store
from .bitslice import GLOBAL_MAX, PER_SECTION_MAX, CrossbarGeometry
from .errors import CrossbarError, ValidationError
from .stucksim import StuckPolicy


# ---------------------------------------------------------------- helpers


def _geometry(args) -> CrossbarGeometry:
    return CrossbarGeometry(rows=args.rows, bits=args.bits, slots_per_row=args.slots)


def _scale_rule(args):
    return GLOBAL_MAX if args.scale == "global" else PER_SECTION_MAX


def _policy(args) -> StuckPolicy:
    return StuckPolicy(p=args.p, stuck_columns=_parse_cols(args.stuck_cols), seed=args.seed)


def _parse_cols(text: str) -> frozenset[int]:
    text = text.strip()
    if not text:
        return frozenset()
    try:
        return frozenset(int(c) for c in text.split(","))
    except ValueError as e:
        raise ValidationError(f"bad --stuck-cols value {text!r}: {e}") from None


def _parse_grid(text: str, axis: str) -> list:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ValidationError(f"bad --grid value {text!r}: {e}") from None
    if axis == "bits":
        if any(not v.is_integer() for v in values):
            raise ValidationError("--grid for axis 'bits' must contain integers")
        return [int(v) for v in values]
    return values


def _ratio(num: int, den: int) -> float | None:
    """Speedup num/den; 1.0 when both are zero, null when only den is."""
    if den:
        return num / den
    return 1.0 if num == 0 else None


def _config_echo(args, fields) -> dict:
    cfg = {}
    for f in fields:
        v = getattr(args, f)
        if isinstance(v, frozenset):
            v = sorted(v)
        cfg[f] = v
    return cfg


_COMMON_CONFIG = (
    "manifest",
    "rows",
    "bits",
    "slots",
    "order",
    "crossbars",
    "stride",
    "scale",
    "include_initial",
)
_POLICY_CONFIG = ("p", "stuck_cols", "seed")


def _load_layers(manifest_path):
    manifest = tensor_store.load_manifest(manifest_path)
    layers = manifest.by_role("weights")
    if not layers:
        raise ValidationError(f"{manifest_path}: manifest has no 'weights' tensors")
    return manifest, layers


def _paired_eval_input(manifest, in_features: int):
    """First eval_input batch whose trailing dim matches the layer width."""
    for entry in manifest.by_role("eval_input"):
        if entry.dims and entry.dims[-1] == in_features:
            return manifest.load(entry.name)
    return None


def _sectioned(tensor, args):
    w = tensor.data.astype(np.float64)
    geo = _geometry(args)
    plan = sws.build_plan(w, geo.capacity, args.order)
    sections = sws.slice_plan(w, plan, geo, _scale_rule(args))
    return w, geo, plan, sections


def _stride_plan(plan, args):
    if args.stride == "1":
        return scheduler.plan_stride_one(plan, args.crossbars)
    return scheduler.plan_stride_L(plan, args.crossbars)


def _ledger_blocks(assignments, ledgers):
    out = []
    for c, (visits, led) in enumerate(zip(assignments, ledgers)):
        out.append(
            {
                "crossbar": c,
                "visits": list(visits),
                "total_switches": led.total_switches,
                "per_step": [
                    {"step": s.step, "section": s.section, "switches": s.switches}
                    for s in led.per_step
                ],
            }
        )
    return out


# ---------------------------------------------------------------- emission


def _flatten(value, prefix=""):
    if isinstance(value, dict):
        for k in sorted(value):
            yield from _flatten(value[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            yield from _flatten(v, f"{prefix}.{i}" if prefix else str(i))
    else:
        yield prefix, value


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    for key, value in _flatten(report):
        writer.writerow([key, _csv_cell(value)])
    return buf.getvalue()


def _emit(report: dict, args) -> int:
    payload = _render(report, args.format)
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    return 0


# ---------------------------------------------------------------- commands


def cmd_analyze(args) -> int:
    manifest, layers = _load_layers(args.manifest)
    blocks = []
    all_sections = []
    total_weights = 0
    deciles = list(range(10, 100, 10))
    for entry in layers:
        tensor = manifest.load(entry.name)
        w, geo, plan, sections = _sectioned(tensor, args)
        all_sections.extend(sections)
        total_weights += w.size
        blocks.append(
            {
                "name": entry.name,
                "dims": list(tensor.dims),
                "n_weights": int(w.size),
                "n_sections": plan.n_sections,
                "activity": [float(a) for a in bitslice.column_activity(sections)],
                "histogram": {
                    "min": float(w.min()),
                    "max": float(w.max()),
                    "mean": float(w.mean()),
                    "std": float(w.std()),
                    "deciles": [float(np.percentile(w, q)) for q in deciles],
                },
            }
        )
    report = {
        "command": "analyze",
        "config": _config_echo(args, _COMMON_CONFIG),
        "layers": blocks,
        "aggregate": {
            "n_weights": total_weights,
            "n_sections": len(all_sections),
            "activity": [float(a) for a in bitslice.column_activity(all_sections)],
        },
    }
    return _emit(report, args)


def cmd_plan(args) -> int:
    manifest, layers = _load_layers(args.manifest)
    blocks = []
    grand_total = 0
    grand_baseline = 0
    for entry in layers:
        tensor = manifest.load(entry.name)
        w, geo, plan, sections = _sectioned(tensor, args)
        rp = _stride_plan(plan, args)
        ev = scheduler.evaluate_plan(rp, sections, include_initial=args.include_initial)

        base_plan = sws.build_plan(w, geo.capacity, sws.ORDER_ORIGINAL)
        base_sections = sws.slice_plan(w, base_plan, geo, _scale_rule(args))
        base_rp = scheduler.plan_unsorted_baseline(base_plan, args.crossbars)
        base_ev = scheduler.evaluate_plan(
            base_rp, base_sections, include_initial=args.include_initial
        )

        grand_total += ev.total_switches
        grand_baseline += base_ev.total_switches
        blocks.append(
            {
                "name": entry.name,
                "n_sections": plan.n_sections,
                "policy": rp.policy,
                "total_switches": ev.total_switches,
                "per_column": [int(c) for c in ev.per_column],
                "baseline_switches": base_ev.total_switches,
                "speedup_vs_unsorted": _ratio(base_ev.total_switches, ev.total_switches),
                "crossbars": _ledger_blocks(rp.assignments, ev.ledgers),
            }
        )
    report = {
        "command": "plan",
        "config": _config_echo(args, _COMMON_CONFIG),
        "layers": blocks,
        "aggregate": {
            "total_switches": grand_total,
            "baseline_switches": grand_baseline,
            "speedup_vs_unsorted": _ratio(grand_baseline, grand_total),
        },
    }
    return _emit(report, args)


def cmd_balance(args) -> int:
    if args.costs:
        try:
            jobs = [int(c) for c in args.costs.split(",") if c.strip()]
        except ValueError as e:
            raise ValidationError(f"bad --costs value {args.costs!r}: {e}") from None
        if any(c < 0 for c in jobs):
            raise ValidationError("--costs entries must be non-negative")
        source = "costs"
    else:
        manifest, layers = _load_layers(args.manifest)
        jobs = []
        for entry in layers:
            tensor = manifest.load(entry.name)
            w, geo, plan, sections = _sectioned(tensor, args)
            ledger = scheduler.evaluate_plan(
                scheduler.plan_stride_one(plan, 1),
                sections,
                include_initial=args.include_initial,
            ).ledgers[0]
            jobs.extend(s.switches for s in ledger.per_step)
        source = "manifest"
    if not jobs:
        raise ValidationError("balance needs at least one job")

    greedy = scheduler.greedy_rounds(jobs, args.crossbars)
    randoms = []
    for i in range(args.random_seeds):
        seed = args.seed + i
        sched = scheduler.random_rounds(jobs, args.crossbars, seed=seed)
        randoms.append(
            {"seed": seed, "makespan": sched.makespan, "speedup": sched.speedup}
        )
    report = {
        "command": "balance",
        "config": _config_echo(
            args,
            (
                "manifest",
                "costs",
                "rows",
                "bits",
                "slots",
                "order",
                "crossbars",
                "scale",
                "include_initial",
                "seed",
                "random_seeds",
            ),
        ),
        "source": source,
        "n_jobs": len(jobs),
        "serial_time": greedy.serial_time,
        "greedy": {
            "makespan": greedy.makespan,
            "speedup": greedy.speedup,
            "round_times": [r.time for r in greedy.rounds],
        },
        "random": randoms,
        "random_best_speedup": max(r["speedup"] for r in randoms) if randoms else None,
        "random_worst_speedup": min(r["speedup"] for r in randoms) if randoms else None,
    }
    return _emit(report, args)


def _error_block(tensor, manifest, sections, result, w):
    if len(tensor.dims) != 2:
        return None
    eval_input = _paired_eval_input(manifest, tensor.dims[1])
    if eval_input is None:
        return None
    w_hat = stucksim.reconstruct_weights(sections, w.size, result.sim.realized)
    err = stucksim.eval_linear_error(
        w_hat.reshape(tensor.dims), w.reshape(tensor.dims), eval_input.matrix
    )
    return {
        "eval_input": eval_input.name,
        "rmse": err.rmse,
        "max_abs": err.max_abs,
        "top1_agreement": err.top1_agreement,
    }


def cmd_simulate(args) -> int:
    manifest, layers = _load_layers(args.manifest)
    policy = _policy(args)
    blocks = []
    grand_performed = 0
    grand_full = 0
    for entry in layers:
        tensor = manifest.load(entry.name)
        w, geo, plan, sections = _sectioned(tensor, args)
        rp = _stride_plan(plan, args)
        result = stucksim.run_schedule(
            rp, sections, policy, include_initial=args.include_initial
        )
        grand_performed += result.performed_total
        grand_full += result.full_total
        blocks.append(
            {
                "name": entry.name,
                "n_sections": plan.n_sections,
                "seed": policy.seed,
                "performed_switches": result.performed_total,
                "full_switches": result.full_total,
                "speedup": _ratio(result.full_total, result.performed_total),
                "per_column": [int(c) for c in result.per_column],
                "crossbars": _ledger_blocks(rp.assignments, result.ledgers),
                "error": _error_block(tensor, manifest, sections, result, w),
            }
        )
    report = {
        "command": "simulate",
        "config": _config_echo(args, _COMMON_CONFIG + _POLICY_CONFIG),
        "layers": blocks,
        "aggregate": {
            "performed_switches": grand_performed,
            "full_switches": grand_full,
            "speedup": _ratio(grand_full, grand_performed),
        },
    }
    return _emit(report, args)


def cmd_sweep(args) -> int:
    manifest, layers = _load_layers(args.manifest)
    grid = _parse_grid(args.grid, args.axis)
    policy = _policy(args)
    geo = _geometry(args)
    blocks = []
    totals = [{"value": float(v), "performed": 0, "full": 0} for v in grid]
    for entry in layers:
        tensor = manifest.load(entry.name)
        w = tensor.data.astype(np.float64)
        kwargs = {}
        if len(tensor.dims) == 2:
            eval_input = _paired_eval_input(manifest, tensor.dims[1])
            if eval_input is not None:
                kwargs = {"weight_dims": tensor.dims, "inputs": eval_input.matrix}
        rows = stucksim.sweep(
            w,
            args.axis,
            grid,
            geo,
            policy,
            L=args.crossbars,
            stride=args.stride,
            order=args.order,
            scale_rule=_scale_rule(args),
            include_initial=args.include_initial,
            **kwargs,
        )
        for t, row in zip(totals, rows):
            t["performed"] += row.performed_switches
            t["full"] += row.full_switches
        blocks.append(
            {
                "name": entry.name,
                "rows": [
                    {
                        "value": row.value,
                        "seed": row.seed,
                        "speedup": _ratio(row.full_switches, row.performed_switches),
                        "performed_switches": row.performed_switches,
                        "full_switches": row.full_switches,
                        "rmse": row.rmse,
                        "max_abs": row.max_abs,
                        "top1_agreement": row.top1_agreement,
                    }
                    for row in rows
                ],
            }
        )
    report = {
        "command": "sweep",
        "config": _config_echo(args, _COMMON_CONFIG + _POLICY_CONFIG + ("axis", "grid")),
        "layers": blocks,
        "aggregate": {
            "rows": [
                {
                    "value": t["value"],
                    "performed_switches": t["performed"],
                    "full_switches": t["full"],
                    "speedup": _ratio(t["full"], t["performed"]),
                }
                for t in totals
            ]
        },
    }
    return _emit(report, args)


def _parse_layer_spec(text: str) -> tuple[str, tuple[int, ...]]:
    name, sep, shape = text.partition(":")
    if not sep or not name:
        raise ValidationError(f"bad --layer {text!r}, expected name:DIMS (e.g. fc1:64x32)")
    try:
        dims = tuple(int(d) for d in shape.split("x"))
    except ValueError:
        raise ValidationError(f"bad --layer dims {shape!r}") from None
    if not dims or any(d <= 0 for d in dims):
        raise ValidationError(f"--layer dims must be positive, got {dims}")
    return name, dims


def cmd_gen(args) -> int:
    layers = [_parse_layer_spec(spec) for spec in args.layer]
    path = synth.write_gaussian_manifest(
        args.out_dir, layers, seed=args.seed, eval_batch=args.eval_batch
    )
    sys.stdout.write(str(path) + "\n")
    return 0


# ---------------------------------------------------------------- parser


def _add_geometry(p):
    p.add_argument("--rows", type=int, default=128, help="crossbar rows (default 128)")
    p.add_argument("--bits", type=int, default=10, help="bit columns per weight (default 10)")
    p.add_argument("--slots", type=int, default=1, help="weights per row (default 1)")


def _add_common(p, manifest_required=True):
    p.add_argument("--manifest", required=manifest_required, help="manifest file to process")
    _add_geometry(p)
    p.add_argument("--order", choices=("sorted", "original"), default="sorted")
    p.add_argument(
        "--crossbars", type=int, default=1, metavar="L", help="parallel crossbars (default 1)"
    )
    p.add_argument(
        "--stride",
        choices=("1", "L"),
        default="1",
        help="visit sections in contiguous blocks (1) or interleaved (L)",
    )
    p.add_argument("--scale", choices=("per-section", "global"), default="per-section")
    p.add_argument(
        "--include-initial",
        choices=("true", "false"),
        default="true",
        help="count the first (blank) programming of each crossbar",
    )
    _add_output(p)


def _add_output(p):
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")


def _add_policy(p):
    p.add_argument("--p", type=float, default=1.0, help="fraction of stuck-column switches performed")
    p.add_argument(
        "--stuck-cols", default="0", help="comma-separated stuck column indices (default 0)"
    )
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xbarprog",
        description="Reprogramming cost reports for bit-sliced compute-in-memory crossbars.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="column activity and weight statistics")
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plan", help="stride schedules and switch totals vs unsorted baseline")
    _add_common(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("balance", help="greedy vs random round grouping of job costs")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--manifest", help="derive job costs from this manifest")
    group.add_argument("--costs", help="comma-separated job costs, bypassing the manifest")
    _add_geometry(p)
    p.add_argument("--order", choices=("sorted", "original"), default="sorted")
    p.add_argument("--crossbars", type=int, default=1, metavar="L")
    p.add_argument("--scale", choices=("per-section", "global"), default="per-section")
    p.add_argument("--include-initial", choices=("true", "false"), default="true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--random-seeds", type=int, default=20, help="number of random baselines")
    _add_output(p)
    p.set_defaults(func=cmd_balance, stride="1")

    p = sub.add_parser("simulate", help="run a schedule with bit stucking")
    _add_common(p)
    _add_policy(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="one stucked run per grid point over p or bits")
    _add_common(p)
    _add_policy(p)
    p.add_argument("--axis", choices=("p", "bits"), required=True)
    p.add_argument("--grid", required=True, help="comma-separated grid values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen", help="write a synthetic Gaussian manifest")
    p.add_argument("--out-dir", required=True)
    p.add_argument(
        "--layer",
        action="append",
        required=True,
        metavar="NAME:DIMS",
        help="layer to generate, e.g. fc1:64x32 (repeatable)",
    )
    p.add_argument("--eval-batch", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "include_initial"):
        args.include_initial = args.include_initial == "true"
    try:
        return args.func(args)
    except CrossbarError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
