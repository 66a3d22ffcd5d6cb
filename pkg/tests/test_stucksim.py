import numpy as np
import pytest

from xbarprog import errors
from xbarprog.bitslice import (
    BitMatrix,
    CrossbarGeometry,
    explicit_scale,
    slice_section,
    slot_bits,
)
from xbarprog.scheduler import evaluate_plan, plan_stride_L, plan_stride_one
from xbarprog.stucksim import (
    StuckPolicy,
    eval_linear_error,
    reconstruct_weights,
    reprogram_with_stucking,
    run_schedule,
    sweep,
)
from xbarprog.sws import build_plan, slice_plan


def make_run(n_sections=6, seed=5, rows=16, bits=6, L=1, stride="1", order="sorted"):
    geo = CrossbarGeometry(rows=rows, bits=bits, slots_per_row=1)
    rng = np.random.default_rng(seed)
    w = rng.normal(size=geo.capacity * n_sections)
    plan = build_plan(w, geo.capacity, order)
    sections = slice_plan(w, plan, geo)
    rp = plan_stride_one(plan, L) if stride == "1" else plan_stride_L(plan, L)
    return w, geo, sections, rp


class TestStuckPolicy:
    def test_defaults(self):
        pol = StuckPolicy()
        assert pol.p == 1.0
        assert pol.stuck_columns == frozenset({0})
        assert not pol.permanent

    def test_p_out_of_range(self):
        with pytest.raises(errors.ValidationError):
            StuckPolicy(p=1.5)
        with pytest.raises(errors.ValidationError):
            StuckPolicy(p=-0.1)

    def test_negative_column(self):
        with pytest.raises(errors.ValidationError):
            StuckPolicy(stuck_columns={-1})


class TestSingleEvent:
    def make_target(self, magnitude, rows=10, bits=2):
        geo = CrossbarGeometry(rows=rows, bits=bits, slots_per_row=1)
        w = np.full(rows, float(magnitude))
        return geo, slice_section(w, geo, explicit_scale(1.0))

    def test_exact_switch_count(self):
        # 10 mismatches in each column; stuck column 0 performs round(0.5*10)=5
        geo, target = self.make_target(3)
        state = BitMatrix.zeros(geo.rows, geo.cols)
        new_state, performed, skipped = reprogram_with_stucking(
            state, target, StuckPolicy(p=0.5, seed=7)
        )
        assert performed == 15
        assert skipped == 5
        bits = slot_bits(new_state, geo)
        assert bits[:, 1].sum() == 10  # non-stuck column fully programmed
        assert bits[:, 0].sum() == 5

    def test_rounding_half_away_from_zero(self):
        # k=10 candidates at p=0.05: round(0.5) -> 1 performed
        geo, target = self.make_target(1)
        state = BitMatrix.zeros(geo.rows, geo.cols)
        _, performed, skipped = reprogram_with_stucking(
            state, target, StuckPolicy(p=0.05, seed=3)
        )
        assert (performed, skipped) == (1, 9)

    def test_reproducible(self):
        geo, target = self.make_target(3)
        state = BitMatrix.zeros(geo.rows, geo.cols)
        pol = StuckPolicy(p=0.5, seed=11)
        a, _, _ = reprogram_with_stucking(state, target, pol)
        b, _, _ = reprogram_with_stucking(state, target, pol)
        assert a == b

    def test_p_one_reaches_target(self):
        geo, target = self.make_target(2)
        state = BitMatrix.zeros(geo.rows, geo.cols)
        new_state, performed, skipped = reprogram_with_stucking(
            state, target, StuckPolicy(p=1.0)
        )
        assert new_state == target.bitmatrix
        assert skipped == 0

    def test_geometry_mismatch(self):
        geo, target = self.make_target(3)
        with pytest.raises(errors.ValidationError):
            reprogram_with_stucking(BitMatrix.zeros(4, 4), target, StuckPolicy())

    def test_stuck_column_out_of_range(self):
        geo, target = self.make_target(3)
        state = BitMatrix.zeros(geo.rows, geo.cols)
        with pytest.raises(errors.ValidationError):
            reprogram_with_stucking(state, target, StuckPolicy(stuck_columns={2}))


class TestRunSchedule:
    def test_p_one_matches_full_evaluation(self):
        _, geo, sections, rp = make_run(n_sections=8, L=2)
        result = run_schedule(rp, sections, StuckPolicy(p=1.0))
        ref = evaluate_plan(rp, sections)
        assert result.performed_total == ref.total_switches
        assert result.full_total == ref.total_switches
        assert result.speedup == pytest.approx(1.0)
        assert result.per_column.tolist() == ref.per_column.tolist()
        for visits, state in zip(rp.assignments, result.sim.states):
            assert state == sections[visits[-1]].bitmatrix

    def test_initial_programming_never_stucked(self):
        _, geo, sections, rp = make_run(n_sections=4)
        result = run_schedule(rp, sections, StuckPolicy(p=0.0, seed=2))
        first = [r for r in result.sim.records if r.step == 0]
        assert all(r.initial for r in first)
        for rec in first:
            assert rec.skipped.sum() == 0
            assert rec.performed.tolist() == rec.mismatches.tolist()

    def test_p_zero_freezes_stuck_column(self):
        _, geo, sections, rp = make_run(n_sections=5, L=1)
        result = run_schedule(rp, sections, StuckPolicy(p=0.0, seed=4))
        first_bits = slot_bits(sections[rp.assignments[0][0]].bitmatrix, geo)
        for rec in result.sim.records:
            if not rec.initial:
                assert rec.performed[0] == 0
                assert rec.skipped[0] == rec.mismatches[0]
                assert rec.skipped[1:].sum() == 0
        final_bits = slot_bits(result.sim.states[0], geo)
        last_target = slot_bits(sections[rp.assignments[0][-1]].bitmatrix, geo)
        assert (final_bits[:, 0] == first_bits[:, 0]).all()
        assert (final_bits[:, 1:] == last_target[:, 1:]).all()

    def test_conservation_and_containment(self):
        _, geo, sections, rp = make_run(n_sections=10, L=2)
        pol = StuckPolicy(p=0.4, stuck_columns=frozenset({0, 1}), seed=9)
        result = run_schedule(rp, sections, pol)
        for rec in result.sim.records:
            assert (rec.performed + rec.skipped == rec.mismatches).all()
            assert (rec.skipped[2:] == 0).all()
        # per-cell endurance counters account for every performed switch
        for c, counts in enumerate(result.sim.switch_counts):
            performed_c = sum(
                int(r.performed.sum()) for r in result.sim.records if r.crossbar == c
            )
            assert int(counts.sum()) == performed_c
            assert counts.max() <= len(rp.assignments[c])

    def test_strictly_fewer_switches_than_full(self):
        _, geo, sections, rp = make_run(n_sections=12, L=1)
        half = run_schedule(rp, sections, StuckPolicy(p=0.5, seed=21))
        assert half.performed_total < half.full_total
        assert half.speedup > 1.0

    def test_deterministic_given_seed(self):
        _, geo, sections, rp = make_run(n_sections=6, L=2)
        pol = StuckPolicy(p=0.5, seed=33)
        a = run_schedule(rp, sections, pol)
        b = run_schedule(rp, sections, pol)
        assert a.performed_total == b.performed_total
        for sa, sb in zip(a.sim.states, b.sim.states):
            assert sa == sb
        c = run_schedule(rp, sections, StuckPolicy(p=0.5, seed=34))
        assert any(sa != sc for sa, sc in zip(a.sim.states, c.sim.states))

    def test_exclude_initial_accounting(self):
        _, geo, sections, rp = make_run(n_sections=6, L=2)
        pol = StuckPolicy(p=1.0)
        res = run_schedule(rp, sections, pol, include_initial=False)
        ref = evaluate_plan(rp, sections, include_initial=False)
        assert res.performed_total == ref.total_switches
        assert res.full_total == ref.total_switches
        for led, visits in zip(res.ledgers, rp.assignments):
            assert len(led.per_step) == len(visits) - 1

    def test_permanent_mode_skipped_cells_never_switch_again(self):
        geo = CrossbarGeometry(rows=32, bits=4, slots_per_row=1)
        rng = np.random.default_rng(55)
        w = rng.normal(size=geo.capacity * 48)
        plan = build_plan(w, geo.capacity, "sorted")
        sections = slice_plan(w, plan, geo)
        rp = plan_stride_one(plan, 1)
        pol = StuckPolicy(p=0.5, seed=1, permanent=True)
        result = run_schedule(rp, sections, pol)
        # replay column 0 from realized states: a skip (mismatch left in place)
        # must mark the cell dead for every later event on this crossbar
        visits = rp.assignments[0]
        states = [slot_bits(result.sim.realized[sid], geo)[:, 0] for sid in visits]
        targets = [slot_bits(sections[sid].bitmatrix, geo)[:, 0] for sid in visits]
        dead = np.zeros(geo.capacity, dtype=bool)
        for prev, cur, tgt in zip(states, states[1:], targets[1:]):
            switched = prev != cur
            assert not (switched & dead).any()
            dead |= (tgt != prev) & ~switched
        assert dead.any()
        # freezing starves the stuck column relative to the non-permanent run
        col0 = sum(int(r.performed[0]) for r in result.sim.records if not r.initial)
        loose = run_schedule(rp, sections, StuckPolicy(p=0.5, seed=1))
        loose_col0 = sum(int(r.performed[0]) for r in loose.sim.records if not r.initial)
        assert col0 < loose_col0

    def test_empty_sections_rejected(self):
        rp = make_run(2)[3]
        with pytest.raises(errors.ValidationError):
            run_schedule(rp, [], StuckPolicy())


class TestReconstruction:
    def test_targets_round_trip(self):
        w, geo, sections, rp = make_run(n_sections=4)
        w_hat = reconstruct_weights(sections, w.size)
        scales = max(s.scale for s in sections)
        assert np.abs(w_hat - w).max() <= scales / 2 + 1e-12

    def test_stale_states_differ_from_targets(self):
        w, geo, sections, rp = make_run(n_sections=8, L=1)
        result = run_schedule(rp, sections, StuckPolicy(p=0.0, seed=8))
        stale = reconstruct_weights(sections, w.size, result.sim.realized)
        clean = reconstruct_weights(sections, w.size)
        assert not np.allclose(stale, clean)

    def test_p_one_realized_equals_targets(self):
        w, geo, sections, rp = make_run(n_sections=5, L=1)
        result = run_schedule(rp, sections, StuckPolicy(p=1.0))
        assert np.array_equal(
            reconstruct_weights(sections, w.size, result.sim.realized),
            reconstruct_weights(sections, w.size),
        )


class TestLinearError:
    def test_zero_error(self):
        w = np.array([[1.0, 2.0], [3.0, 4.0]])
        x = np.array([[1.0, -1.0], [0.5, 0.5]])
        err = eval_linear_error(w, w, x)
        assert err.rmse == 0.0
        assert err.max_abs == 0.0
        assert err.top1_agreement == 1.0

    def test_hand_example(self):
        w = np.eye(2)
        w_hat = np.array([[1.0, 0.0], [0.0, 0.5]])
        err = eval_linear_error(w_hat, w, np.array([1.0, 1.0]))
        assert err.max_abs == pytest.approx(0.5)
        assert err.rmse == pytest.approx(np.sqrt(0.25 / 2))
        assert err.top1_agreement == 1.0

    def test_top1_disagreement(self):
        w = np.eye(2)
        w_hat = np.array([[0.0, 0.0], [0.0, 1.0]])  # first row zeroed out
        err = eval_linear_error(w_hat, w, np.array([[1.0, 0.1]]))
        assert err.top1_agreement == 0.0

    def test_shape_checks(self):
        with pytest.raises(errors.ValidationError):
            eval_linear_error(np.eye(2), np.ones(4), np.ones((1, 2)))
        with pytest.raises(errors.ValidationError):
            eval_linear_error(np.eye(2), np.eye(2), np.ones((1, 3)))


class TestSweep:
    def test_p_axis_monotone_speedup(self):
        geo = CrossbarGeometry(rows=16, bits=6, slots_per_row=1)
        rng = np.random.default_rng(71)
        w = rng.normal(size=geo.capacity * 8)
        rows = sweep(w, "p", [0.0, 0.5, 1.0], geo, StuckPolicy(seed=3), L=1)
        assert [r.value for r in rows] == [0.0, 0.5, 1.0]
        speedups = [r.speedup for r in rows]
        assert speedups[0] >= speedups[1] >= speedups[2]
        assert speedups[2] == pytest.approx(1.0)
        performed = [r.performed_switches for r in rows]
        assert performed[0] <= performed[1] <= performed[2]
        assert all(r.full_switches == rows[0].full_switches for r in rows)

    def test_bits_axis_changes_geometry(self):
        geo = CrossbarGeometry(rows=16, bits=6, slots_per_row=1)
        rng = np.random.default_rng(73)
        w = rng.normal(size=geo.capacity * 4)
        rows = sweep(w, "bits", [4, 8], geo, StuckPolicy(p=1.0))
        assert rows[0].full_switches < rows[1].full_switches

    def test_error_metrics_filled(self):
        geo = CrossbarGeometry(rows=16, bits=8, slots_per_row=1)
        rng = np.random.default_rng(79)
        dims = (16, 8)
        w = rng.normal(size=dims)
        x = rng.normal(size=(32, 8))
        rows = sweep(
            w.reshape(-1), "p", [0.0, 1.0], geo, StuckPolicy(seed=5),
            weight_dims=dims, inputs=x,
        )
        assert all(r.rmse is not None for r in rows)
        assert rows[1].rmse <= rows[0].rmse  # full programming at least as accurate

    def test_bad_grid(self):
        geo = CrossbarGeometry(rows=4, bits=4, slots_per_row=1)
        with pytest.raises(errors.ValidationError):
            sweep(np.ones(4), "p", [], geo, StuckPolicy())
        with pytest.raises(errors.ValidationError):
            sweep(np.ones(4), "q", [1], geo, StuckPolicy())
