import numpy as np
import pytest

from xbarprog import errors
from xbarprog.bitslice import (
    PER_SECTION_MAX,
    BitMatrix,
    CrossbarGeometry,
    column_activity,
    explicit_scale,
    quantize,
    reconstruct,
    slice_section,
)


def magnitudes_oracle(weights, bits, scale):
    """Independent scalar-loop quantizer: round half away from zero, clamp."""
    import math

    out = []
    for w in weights:
        m = math.floor(abs(w) / scale + 0.5)
        out.append(min(max(m, 0), 2**bits - 1))
    return out


class TestQuantize:
    def test_hand_example(self):
        m, s, scale = quantize([0.5, -0.3, 1.5, 0.0], 4, PER_SECTION_MAX)
        assert scale == pytest.approx(0.1)
        assert m.tolist() == [5, 3, 15, 0]
        assert s.tolist() == [1, -1, 1, 0]

    def test_all_zero(self):
        m, s, scale = quantize([0.0, 0.0, 0.0], 6)
        assert m.tolist() == [0, 0, 0]
        assert s.tolist() == [0, 0, 0]
        assert scale == 1.0

    def test_single_one_bit(self):
        m, s, scale = quantize([1.0], 1)
        assert scale == 1.0
        assert m.tolist() == [1]

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(11)
        for bits in (1, 4, 10):
            w = rng.normal(size=200)
            m, _, scale = quantize(w, bits)
            assert m.tolist() == magnitudes_oracle(w, bits, scale)

    def test_explicit_scale_clamps(self):
        m, _, scale = quantize([10.0, -10.0], 3, explicit_scale(1.0))
        assert scale == 1.0
        assert m.tolist() == [7, 7]

    def test_monotone_under_shared_scale(self):
        rng = np.random.default_rng(3)
        w = rng.normal(size=500)
        m, _, _ = quantize(w, 8, explicit_scale(0.01))
        order = np.argsort(np.abs(w))
        assert (np.diff(m[order]) >= 0).all()

    def test_width_and_empty_errors(self):
        with pytest.raises(errors.UnsupportedWidthError):
            quantize([1.0], 31)
        with pytest.raises(errors.ValidationError):
            quantize([], 4)
        with pytest.raises(errors.ValidationError):
            quantize([np.inf], 4)


class TestSliceSection:
    def test_hand_example_bit_rows(self):
        geo = CrossbarGeometry(rows=2, bits=4, slots_per_row=2)
        sec = slice_section([0.5, -0.3, 1.5, 0.0], geo)
        # slots hold 5, 3, 15, 0; LSB-first bit rows 1010, 1100, 1111, 0000
        slot_rows = sec.bitmatrix.cells.reshape(4, 4)
        assert slot_rows.tolist() == [
            [1, 0, 1, 0],
            [1, 1, 0, 0],
            [1, 1, 1, 1],
            [0, 0, 0, 0],
        ]
        assert sec.pad_count == 0

    def test_zero_weight_all_zero_matrix(self):
        geo = CrossbarGeometry(rows=1, bits=5, slots_per_row=1)
        sec = slice_section([0.0], geo)
        assert sec.bitmatrix.cells.sum() == 0

    def test_padding_count(self):
        geo = CrossbarGeometry(rows=4, bits=3, slots_per_row=2)
        sec = slice_section(np.ones(geo.capacity - 1), geo)
        assert sec.pad_count == 1
        assert sec.index_map[-1] == -1

    def test_capacity_error(self):
        geo = CrossbarGeometry(rows=2, bits=3, slots_per_row=1)
        with pytest.raises(errors.CapacityError):
            slice_section(np.ones(3), geo)


class TestReconstruct:
    def test_hand_example(self):
        geo = CrossbarGeometry(rows=2, bits=4, slots_per_row=2)
        sec = slice_section([0.5, -0.3, 1.5, 0.0], geo)
        got = reconstruct(sec)
        np.testing.assert_allclose(got, [0.5, -0.3, 1.5, 0.0], atol=sec.scale / 2)
        # 5*0.1, 3*0.1, 15*0.1 land within float ulps of the originals
        np.testing.assert_allclose(got, [0.5, -0.3, 1.5, 0.0], atol=1e-15)

    def test_all_zero(self):
        geo = CrossbarGeometry(rows=3, bits=4, slots_per_row=1)
        sec = slice_section([0.0, 0.0, 0.0], geo)
        assert reconstruct(sec).tolist() == [0.0, 0.0, 0.0]

    def test_round_trip_bound_random(self):
        rng = np.random.default_rng(5)
        geo = CrossbarGeometry(rows=16, bits=8, slots_per_row=2)
        for _ in range(20):
            w = rng.normal(size=geo.capacity) * rng.uniform(0.1, 10)
            sec = slice_section(w, geo)
            err = np.abs(reconstruct(sec) - w)
            assert (err <= sec.scale / 2 + np.spacing(sec.scale / 2)).all()

    def test_padding_excluded(self):
        geo = CrossbarGeometry(rows=4, bits=4, slots_per_row=1)
        sec = slice_section([1.0, -2.0], geo)
        assert reconstruct(sec).shape == (2,)

    def test_stale_state_override(self):
        geo = CrossbarGeometry(rows=2, bits=4, slots_per_row=1)
        sec = slice_section([0.5, -0.3], geo)
        stale = BitMatrix.zeros(geo.rows, geo.cols)
        np.testing.assert_array_equal(reconstruct(sec, state=stale), [0.0, -0.0])

    def test_zeroing_column_j_bound(self):
        # clearing one bit column moves each weight by at most scale * 2^j
        rng = np.random.default_rng(9)
        geo = CrossbarGeometry(rows=8, bits=6, slots_per_row=1)
        w = rng.normal(size=geo.capacity)
        sec = slice_section(w, geo)
        base = reconstruct(sec)
        for j in range(geo.bits):
            cleared = sec.bitmatrix.copy()
            cleared.cells.reshape(geo.capacity, geo.bits)[:, j] = 0
            moved = reconstruct(sec, state=cleared)
            assert (np.abs(moved - base) <= sec.scale * 2**j + 1e-12).all()


class TestColumnActivity:
    def test_hand_example(self):
        # magnitudes 5, 3, 15, 0: bit j set in {5:101, 3:011, 15:1111}
        geo = CrossbarGeometry(rows=2, bits=4, slots_per_row=2)
        sec = slice_section([0.5, -0.3, 1.5, 0.0], geo)
        np.testing.assert_allclose(column_activity([sec]), [0.75, 0.5, 0.5, 0.25])

    def test_all_zero(self):
        geo = CrossbarGeometry(rows=2, bits=3, slots_per_row=1)
        sec = slice_section([0.0, 0.0], geo)
        assert column_activity([sec]).tolist() == [0.0, 0.0, 0.0]

    def test_padding_not_counted(self):
        geo = CrossbarGeometry(rows=2, bits=2, slots_per_row=1)
        full = slice_section([1.0, 1.0], geo)
        padded = slice_section([1.0], geo)
        np.testing.assert_allclose(column_activity([full]), column_activity([padded]))

    def test_lsb_tends_to_half_monte_carlo(self):
        # bell-shaped weights, wide bit width: LSB activity converges to 0.5
        rng = np.random.default_rng(42)
        w = rng.normal(size=100_000)
        geo = CrossbarGeometry(rows=128, bits=10, slots_per_row=1)
        sections = [
            slice_section(w[i : i + geo.capacity], geo)
            for i in range(0, w.size, geo.capacity)
        ]
        act = column_activity(sections)
        assert 0.48 <= act[0] <= 0.52


def test_geometry_capacity_and_cols():
    geo = CrossbarGeometry(rows=128, bits=16, slots_per_row=8)
    assert geo.capacity == 1024
    assert geo.cols == 128


def test_bitmatrix_validation():
    with pytest.raises(errors.ValidationError):
        BitMatrix(np.array([[0, 2]]))
    with pytest.raises(errors.ValidationError):
        BitMatrix(np.zeros(3))
