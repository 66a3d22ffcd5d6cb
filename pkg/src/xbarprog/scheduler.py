"""Multi-crossbar reprogramming schedules and round-balanced parallelism.

Two stride heuristics map a sorted section list onto L physical crossbars:
stride-L interleaves (crossbar c programs sections c, c+L, c+2L, ...), while
stride-1 gives each crossbar a contiguous block so every step moves to the
adjacent section. Concurrent programming is modeled as barrier-synchronized
rounds of up to L jobs; a round lasts as long as its costliest job.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cost import CostLedger, sequence_cost
from .errors import ValidationError
from .sws import ORDER_ORIGINAL, SectionPlan

POLICY_STRIDE_ONE = "stride_one"
POLICY_STRIDE_L = "stride_L"
POLICY_UNSORTED = "unsorted_baseline"


@dataclass
class ReprogramPlan:
    """Assignment of section ids to L crossbars, in per-crossbar visit order."""

    L: int
    policy: str
    assignments: list[list[int]]

    def check_coverage(self, n_sections: int) -> None:
        flat = [sid for visits in self.assignments for sid in visits]
        if sorted(flat) != list(range(n_sections)):
            raise ValidationError("plan assignments must cover every section exactly once")


@dataclass
class PlanEvaluation:
    ledgers: list[CostLedger]
    total_switches: int
    per_column: np.ndarray
    speedup: float | None = None


@dataclass
class Round:
    jobs: list[int]  # job indices into the cost list
    time: int  # max cost in the group


@dataclass
class RoundSchedule:
    rounds: list[Round]
    makespan: int
    serial_time: int

    @property
    def speedup(self) -> float:
        return self.serial_time / self.makespan if self.makespan else 1.0


def _check_plan_args(plan: SectionPlan, L: int) -> int:
    S = plan.n_sections
    if L < 1:
        raise ValidationError(f"L must be >= 1, got {L}")
    if L > S:
        raise ValidationError(f"L={L} exceeds section count {S}")
    return S


def plan_stride_L(plan: SectionPlan, L: int) -> ReprogramPlan:
    """Crossbar c visits sections c, c+L, c+2L, ... of the plan's order."""
    S = _check_plan_args(plan, L)
    assignments = [list(range(c, S, L)) for c in range(L)]
    return ReprogramPlan(L=L, policy=POLICY_STRIDE_L, assignments=assignments)


def plan_stride_one(plan: SectionPlan, L: int) -> ReprogramPlan:
    """Split the list into L contiguous blocks; each crossbar walks its block.

    Earlier blocks take the larger size when S is not divisible by L, so block
    sizes are ceil(S/L) for the first S mod L crossbars and floor(S/L) after.
    """
    S = _check_plan_args(plan, L)
    base, extra = divmod(S, L)
    assignments = []
    start = 0
    for c in range(L):
        size = base + (1 if c < extra else 0)
        assignments.append(list(range(start, start + size)))
        start += size
    return ReprogramPlan(L=L, policy=POLICY_STRIDE_ONE, assignments=assignments)


def plan_unsorted_baseline(plan: SectionPlan, L: int) -> ReprogramPlan:
    """Stride-L interleaving over the original (unsorted) section order."""
    if plan.order != ORDER_ORIGINAL:
        raise ValidationError("unsorted baseline requires a plan built with order='original'")
    S = _check_plan_args(plan, L)
    assignments = [list(range(c, S, L)) for c in range(L)]
    return ReprogramPlan(L=L, policy=POLICY_UNSORTED, assignments=assignments)


def evaluate_plan(
    plan: ReprogramPlan,
    sections,
    include_initial: bool = True,
    reference_total: int | None = None,
) -> PlanEvaluation:
    """Per-crossbar ledgers and total switches for a plan.

    ``include_initial=False`` treats each crossbar's first section as free
    (the ledger then covers only reprogramming steps, starting from that
    section's state). ``reference_total`` yields speedup = reference / total.
    """
    sections = list(sections)
    ledgers = []
    for visits in plan.assignments:
        for sid in visits:
            if sid < 0 or sid >= len(sections):
                raise ValidationError(f"plan references missing section {sid}")
        if include_initial or not visits:
            ledgers.append(sequence_cost(None, [sections[s] for s in visits], visits))
        else:
            first, rest = visits[0], visits[1:]
            ledgers.append(
                sequence_cost(sections[first].bitmatrix, [sections[s] for s in rest], rest)
            )
    total = sum(led.total_switches for led in ledgers)
    bits = sections[0].geometry.bits if sections else 0
    per_column = np.zeros(bits, dtype=np.int64)
    for led in ledgers:
        if led.per_column.size:
            per_column += led.per_column
    speedup = None
    if reference_total is not None:
        if total:
            speedup = reference_total / total
        else:
            speedup = 1.0 if reference_total == 0 else float("inf")
    return PlanEvaluation(
        ledgers=ledgers, total_switches=total, per_column=per_column, speedup=speedup
    )


def _chunk_rounds(costs: np.ndarray, order: np.ndarray, L: int) -> RoundSchedule:
    rounds = []
    for start in range(0, order.size, L):
        group = order[start : start + L]
        rounds.append(Round(jobs=[int(j) for j in group], time=int(costs[group].max())))
    return RoundSchedule(
        rounds=rounds,
        makespan=int(sum(r.time for r in rounds)),
        serial_time=int(costs.sum()),
    )


def greedy_rounds(costs, L: int) -> RoundSchedule:
    """Group jobs of similar cost: sort descending, chunk into rounds of L.

    This minimizes the sum of round maxima over all ways of splitting the jobs
    into groups of at most L, so makespan is optimal for the round model.
    """
    costs = np.asarray(costs, dtype=np.int64).reshape(-1)
    if costs.size == 0:
        raise ValidationError("greedy_rounds needs at least one job")
    if L < 1:
        raise ValidationError(f"L must be >= 1, got {L}")
    # stable sort on negated costs keeps ties in ascending job order
    order = np.argsort(-costs, kind="stable")
    return _chunk_rounds(costs, order, L)


def random_rounds(costs, L: int, seed: int) -> RoundSchedule:
    """Seeded shuffle then chunk into rounds of L (unbalanced baseline)."""
    costs = np.asarray(costs, dtype=np.int64).reshape(-1)
    if costs.size == 0:
        raise ValidationError("random_rounds needs at least one job")
    if L < 1:
        raise ValidationError(f"L must be >= 1, got {L}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    order = rng.permutation(costs.size)
    return _chunk_rounds(costs, order, L)
