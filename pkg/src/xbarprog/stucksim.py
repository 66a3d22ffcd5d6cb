"""Bit-stucking simulation: skip part of the required switches in low-order columns.

At each reprogramming event, columns outside the stuck set switch every
mismatched cell as usual; each stuck column switches exactly round(p * k) of
its k mismatched cells, chosen uniformly without replacement from a seeded
generator, and the rest keep their stale state. Stale bits persist across
steps and are re-candidates at the next event (set ``permanent`` to freeze a
cell forever once it has been skipped).

The initial programming of an erased crossbar is always performed in full;
stucking applies to reprogramming events only, so at p=0 the lowest-order
column never changes after initial programming.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import bitslice, scheduler, sws
from .bitslice import PAD_INDEX, BitMatrix, CrossbarGeometry, SlicedSection
from .cost import CostLedger, StepCost
from .errors import ValidationError
from .scheduler import ReprogramPlan, evaluate_plan


@dataclass(frozen=True)
class StuckPolicy:
    """Fraction p of required stuck-column switches actually performed."""

    p: float = 1.0
    stuck_columns: frozenset[int] = frozenset({0})
    seed: int = 0
    permanent: bool = False  # skipped cells become permanently stuck

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValidationError(f"p must be in [0,1], got {self.p}")
        object.__setattr__(self, "stuck_columns", frozenset(int(c) for c in self.stuck_columns))
        if any(c < 0 for c in self.stuck_columns):
            raise ValidationError("stuck columns must be non-negative")


@dataclass
class StepRecord:
    """Per-column accounting of one programming event on one crossbar."""

    crossbar: int
    step: int
    section: int
    initial: bool
    mismatches: np.ndarray  # per significance column
    performed: np.ndarray
    skipped: np.ndarray


@dataclass
class SimState:
    """Crossbar states, per-memristor endurance counters and event records."""

    states: list[BitMatrix]
    switch_counts: list[np.ndarray]  # per-cell cumulative switches, only increase
    records: list[StepRecord] = field(default_factory=list)
    realized: dict[int, BitMatrix] = field(default_factory=dict)  # section id -> state after its event


@dataclass
class ScheduleResult:
    sim: SimState
    ledgers: list[CostLedger]
    performed_total: int
    full_total: int  # same plan at p=1
    speedup: float
    per_column: np.ndarray


def _derive_rng(seed: int, crossbar: int, step: int) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, crossbar, step]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def _stuck_event(
    state_bits: np.ndarray,
    target_bits: np.ndarray,
    policy: StuckPolicy,
    rng: np.random.Generator,
    frozen: np.ndarray | None,
    apply_stucking: bool,
):
    """Mutates state_bits (capacity x bits view) toward target; returns per-column counts."""
    bits = state_bits.shape[1]
    mismatch = state_bits != target_bits
    mismatches = mismatch.sum(axis=0, dtype=np.int64)
    performed = mismatches.copy()
    skipped = np.zeros(bits, dtype=np.int64)

    if not apply_stucking or policy.p == 1.0:
        state_bits[:] = target_bits
        return mismatches, performed, skipped

    switch = mismatch.copy()
    for col in policy.stuck_columns:
        candidates = np.flatnonzero(mismatch[:, col])
        if frozen is not None:
            candidates = candidates[~frozen[candidates, col]]
        n_perform = int(np.floor(policy.p * candidates.size + 0.5))
        chosen = (
            rng.choice(candidates, size=n_perform, replace=False)
            if 0 < n_perform < candidates.size
            else candidates[:n_perform]
        )
        switch[:, col] = False
        switch[chosen, col] = True
        if frozen is not None:
            left_out = np.setdiff1d(candidates, chosen, assume_unique=False)
            frozen[left_out, col] = True
        performed[col] = n_perform
        skipped[col] = mismatches[col] - n_perform
    state_bits[switch] = target_bits[switch]
    return mismatches, performed, skipped


def reprogram_with_stucking(
    state: BitMatrix,
    target: SlicedSection,
    policy: StuckPolicy,
    rng: np.random.Generator | None = None,
):
    """One stucked reprogramming event. Returns (new state, performed, skipped)."""
    geometry = target.geometry
    if state.rows != geometry.rows or state.cols != geometry.cols:
        raise ValidationError("state does not match target geometry")
    if policy.stuck_columns and max(policy.stuck_columns) >= geometry.bits:
        raise ValidationError(f"stuck columns {sorted(policy.stuck_columns)} outside [0, {geometry.bits})")
    if rng is None:
        rng = _derive_rng(policy.seed, 0, 0)
    new_state = state.copy()
    view = new_state.cells.reshape(geometry.capacity, geometry.bits)
    target_bits = bitslice.slot_bits(target.bitmatrix, geometry)
    _, performed, skipped = _stuck_event(view, target_bits, policy, rng, None, True)
    return new_state, int(performed.sum()), int(skipped.sum())


def run_schedule(
    plan: ReprogramPlan,
    sections,
    policy: StuckPolicy,
    include_initial: bool = True,
) -> ScheduleResult:
    """Run a reprogramming plan with stucking, carrying stale bits forward.

    The per-event generator is derived from (policy.seed, crossbar, step), so
    results are bit-identical for identical inputs. Speedup compares against
    the same plan at p=1 (full reprogramming), same initial-cost accounting.
    """
    sections = list(sections)
    if not sections:
        raise ValidationError("run_schedule needs at least one section")
    geometry = sections[0].geometry
    if policy.stuck_columns and max(policy.stuck_columns) >= geometry.bits:
        raise ValidationError(f"stuck columns {sorted(policy.stuck_columns)} outside [0, {geometry.bits})")

    states = [BitMatrix.zeros(geometry.rows, geometry.cols) for _ in plan.assignments]
    counts = [np.zeros((geometry.rows, geometry.cols), dtype=np.int64) for _ in plan.assignments]
    sim = SimState(states=states, switch_counts=counts)
    ledgers: list[CostLedger] = []

    for c, visits in enumerate(plan.assignments):
        frozen = (
            np.zeros((geometry.capacity, geometry.bits), dtype=bool) if policy.permanent else None
        )
        view = states[c].cells.reshape(geometry.capacity, geometry.bits)
        count_view = counts[c].reshape(geometry.capacity, geometry.bits)
        per_column = np.zeros(geometry.bits, dtype=np.int64)
        per_step: list[StepCost] = []
        for step, sid in enumerate(visits):
            if sid < 0 or sid >= len(sections):
                raise ValidationError(f"plan references missing section {sid}")
            section = sections[sid]
            if section.geometry != geometry:
                raise ValidationError("sections in a schedule must share geometry")
            target_bits = bitslice.slot_bits(section.bitmatrix, geometry)
            before = view.copy()
            rng = _derive_rng(policy.seed, c, step)
            mismatches, performed, skipped = _stuck_event(
                view, target_bits, policy, rng, frozen, apply_stucking=step > 0
            )
            count_view[before != view] += 1
            sim.records.append(
                StepRecord(
                    crossbar=c,
                    step=step,
                    section=sid,
                    initial=step == 0,
                    mismatches=mismatches,
                    performed=performed,
                    skipped=skipped,
                )
            )
            sim.realized[sid] = BitMatrix(view.reshape(geometry.rows, geometry.cols).copy())
            if include_initial or step > 0:
                offset = 0 if include_initial else 1
                per_column += performed
                per_step.append(
                    StepCost(step=step - offset, section=sid, switches=int(performed.sum()))
                )
        ledgers.append(
            CostLedger(
                total_switches=int(per_column.sum()), per_column=per_column, per_step=per_step
            )
        )

    performed_total = sum(led.total_switches for led in ledgers)
    full_total = evaluate_plan(plan, sections, include_initial=include_initial).total_switches
    per_column = np.zeros(geometry.bits, dtype=np.int64)
    for led in ledgers:
        per_column += led.per_column
    speedup = full_total / performed_total if performed_total else 1.0
    return ScheduleResult(
        sim=sim,
        ledgers=ledgers,
        performed_total=performed_total,
        full_total=full_total,
        speedup=speedup,
        per_column=per_column,
    )


def reconstruct_weights(
    sections, n_weights: int, states: dict[int, BitMatrix] | None = None
) -> np.ndarray:
    """Flat weight vector from (possibly stale) section states.

    ``states`` maps section id -> realized bit state; sections absent from the
    map reconstruct from their own target bits.
    """
    out = np.zeros(n_weights, dtype=np.float64)
    for sid, section in enumerate(sections):
        state = states.get(sid) if states is not None else None
        values = bitslice.reconstruct(section, state=state)
        idx = section.index_map[: section.n_weights]
        if (idx == PAD_INDEX).any():
            raise ValidationError("padding sentinel inside live slots")
        out[idx] = values
    return out


@dataclass
class LinearError:
    rmse: float
    max_abs: float
    top1_agreement: float | None


def eval_linear_error(w_hat, original, inputs, top1: bool = True) -> LinearError:
    """Output error of y = W_hat x against the float reference y* = W x.

    ``w_hat`` is the stale-state weight matrix (or flat vector reshaped to the
    original's dims), ``original`` the float weight matrix with rows as output
    neurons, ``inputs`` an eval batch of shape (batch, in_features).
    """
    w = np.asarray(original, dtype=np.float64)
    if w.ndim != 2:
        raise ValidationError(f"original weights must be 2-D, got shape {w.shape}")
    what = np.asarray(w_hat, dtype=np.float64).reshape(w.shape)
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != w.shape[1]:
        raise ValidationError(
            f"inputs have {x.shape[1]} features but weights expect {w.shape[1]}"
        )
    y_ref = x @ w.T
    y_hat = x @ what.T
    err = y_hat - y_ref
    rmse = float(np.sqrt(np.mean(err**2)))
    max_abs = float(np.abs(err).max()) if err.size else 0.0
    agreement = None
    if top1:
        agreement = float(np.mean(y_hat.argmax(axis=1) == y_ref.argmax(axis=1)))
    return LinearError(rmse=rmse, max_abs=max_abs, top1_agreement=agreement)


@dataclass
class SweepRow:
    axis: str
    value: float
    seed: int
    speedup: float
    performed_switches: int
    full_switches: int
    rmse: float | None = None
    max_abs: float | None = None
    top1_agreement: float | None = None


def sweep(
    weights,
    axis: str,
    values,
    geometry: CrossbarGeometry,
    policy: StuckPolicy,
    *,
    L: int = 1,
    stride: str = "1",
    order: str = "sorted",
    scale_rule=None,
    include_initial: bool = True,
    weight_dims=None,
    inputs=None,
) -> list[SweepRow]:
    """One stucked run per grid point over p or over column count (bits).

    Error metrics are filled when an eval batch is supplied and the weights
    form a matrix (``weight_dims``); every row carries the seed it ran under.
    """
    values = list(values)
    if not values:
        raise ValidationError("sweep grid must be non-empty")
    if axis not in ("p", "bits"):
        raise ValidationError(f"sweep axis must be 'p' or 'bits', got {axis!r}")
    if scale_rule is None:
        scale_rule = bitslice.PER_SECTION_MAX
    w = np.asarray(weights, dtype=np.float64).reshape(-1)

    rows = []
    for value in values:
        geo = geometry if axis == "p" else replace(geometry, bits=int(value))
        pol = replace(policy, p=float(value)) if axis == "p" else policy
        plan = sws.build_plan(w, geo.capacity, order)
        sections = sws.slice_plan(w, plan, geo, scale_rule)
        rp = (
            scheduler.plan_stride_one(plan, L)
            if stride == "1"
            else scheduler.plan_stride_L(plan, L)
        )
        result = run_schedule(rp, sections, pol, include_initial=include_initial)
        row = SweepRow(
            axis=axis,
            value=float(value),
            seed=pol.seed,
            speedup=result.speedup,
            performed_switches=result.performed_total,
            full_switches=result.full_total,
        )
        if inputs is not None and weight_dims is not None:
            w_hat = reconstruct_weights(sections, w.size, result.sim.realized)
            err = eval_linear_error(w_hat.reshape(weight_dims), w.reshape(weight_dims), inputs)
            row.rmse = err.rmse
            row.max_abs = err.max_abs
            row.top1_agreement = err.top1_agreement
        rows.append(row)
    return rows
