import math

import numpy as np
import pytest

from reramopt.crossbar import (
    NoiseSpec,
    QuantizedMatrix,
    layer_from_json,
    layer_to_json,
    map_weights,
    mvm,
    program,
    quantize,
)
from reramopt.design_space import ReramDesign

QUIET = NoiseSpec.disabled()


def design(res_cell=2, xbar=64, freq=5e8, temp=350.0, res_adc=8, **kw):
    return ReramDesign(
        res_cell=res_cell, freq_hz=freq, temperature_k=temp, xbar_size=xbar, res_adc=res_adc, **kw
    )


def fixed_point_oracle(w_codes, in_codes, d: ReramDesign):
    """Plain-loop reference for the DAC/tile/ADC/shift-add pipeline.

    Independent scalar reimplementation of the documented conventions;
    noiseless (conductances at their targets).
    """
    rows, cols = w_codes.shape
    n_slices = math.ceil(d.bit_quan / d.res_cell)
    g_min, g_max = 1.0 / d.r_off, 1.0 / d.r_on
    step = (g_max - g_min) / (2**d.res_cell - 1)
    dac_max = 2**d.res_dac - 1
    v_step = d.v_r / dac_max
    out = np.zeros((in_codes.shape[0], cols), dtype=np.int64)
    for b in range(in_codes.shape[0]):
        for o in range(cols):
            total = 0.0
            for sign in (1, -1):
                part = np.clip(sign * in_codes[b], 0, dac_max)
                if not part.any():
                    continue
                for r0 in range(0, rows, d.xbar_size):
                    r1 = min(r0 + d.xbar_size, rows)
                    fs = d.v_r * g_max * (r1 - r0)
                    for s in range(n_slices):
                        weight = 2 ** (d.res_cell * (n_slices - 1 - s))
                        mask = 2**d.res_cell - 1
                        i_pos = i_neg = 0.0
                        for i in range(r0, r1):
                            code = w_codes[i, o]
                            digit = (abs(int(code)) >> (d.res_cell * (n_slices - 1 - s))) & mask
                            gp = g_min + (digit if code > 0 else 0) * step
                            gn = g_min + (digit if code < 0 else 0) * step
                            v = part[i] * v_step
                            i_pos += v * gp
                            i_neg += v * gn
                        if d.res_adc is not None:
                            levels = 2**d.res_adc - 1
                            i_pos = min(max(round(i_pos / fs * levels), 0), levels) * fs / levels
                            i_neg = min(max(round(i_neg / fs * levels), 0), levels) * fs / levels
                        total += sign * weight * (i_pos - i_neg)
            out[b, o] = round(total / (step * v_step))
    return out


class TestQuantize:
    def test_symmetric_endpoints(self):
        q = quantize(np.array([[-1.0, 0.0, 1.0]]), 8)
        np.testing.assert_array_equal(q.codes, [[-127, 0, 127]])

    def test_zero_matrix_convention(self):
        q = quantize(np.zeros((2, 2)), 4)
        assert q.scale == 1.0
        assert not q.codes.any()

    @pytest.mark.parametrize("bits", [1, 2, 4, 8])
    def test_round_trip_within_half_step(self, bits):
        rng = np.random.default_rng(bits)
        v = rng.standard_normal((16, 16)) * 3.0
        q = quantize(v, bits)
        assert np.max(np.abs(q.dequantize() - v)) <= q.scale / 2 + 1e-12

    def test_bits_bounds(self):
        with pytest.raises(ValueError):
            quantize(np.ones((2, 2)), 9)


class TestMapWeights:
    def test_slice_counts(self):
        w = quantize(np.eye(4), 8)
        assert map_weights(w, design(res_cell=2)).n_slices == 4
        assert map_weights(w, design(res_cell=8)).n_slices == 1
        assert map_weights(w, design(res_cell=3)).n_slices == 3

    def test_zero_code_sits_at_g_min_both_sides(self):
        d = design(res_cell=4)
        w = QuantizedMatrix(codes=np.zeros((2, 2), dtype=np.int64), scale=1.0, bits=8)
        layer = map_weights(w, d)
        for t in layer.tiles:
            np.testing.assert_allclose(t.pos.target, d.g_min)
            np.testing.assert_allclose(t.neg.target, d.g_min)

    def test_targets_on_level_grid(self):
        d = design(res_cell=3)
        rng = np.random.default_rng(0)
        layer = map_weights(quantize(rng.standard_normal((8, 8)), 8), d)
        step = (d.g_max - d.g_min) / (2**3 - 1)
        for t in layer.tiles:
            lv = (t.pos.target - d.g_min) / step
            np.testing.assert_allclose(lv, np.rint(lv), atol=1e-9)
            assert lv.max() <= 2**3 - 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            map_weights(QuantizedMatrix(np.zeros((0, 3), dtype=np.int64), 1.0, 8), design())

    def test_tiling_shape(self):
        layer = map_weights(quantize(np.ones((100, 70)), 8), design(xbar=64))
        assert len(layer.tiles) == 4  # 2 row blocks x 2 col blocks


class TestProgram:
    def test_zero_sigma_exact(self):
        d = design(sigma_prog=0.0)
        layer = program(map_weights(quantize(np.eye(3), 8), d), np.random.default_rng(0))
        for t in layer.tiles:
            np.testing.assert_array_equal(t.pos.noisy[0], t.pos.target)

    def test_prog_disabled_exact(self):
        layer = program(map_weights(quantize(np.eye(3), 8), design(), noise=QUIET))
        for t in layer.tiles:
            np.testing.assert_array_equal(t.pos.noisy[0], t.pos.target)

    def test_per_cell_std_matches_sigma_prog(self):
        # 1e5 independent programmings of one target cell via duplicate copies.
        d = design(res_cell=8)
        w = QuantizedMatrix(codes=np.full((1, 1), 100, dtype=np.int64), scale=1.0, bits=8)
        base = map_weights(w, d, dup=1000)
        rng = np.random.default_rng(9)
        samples = []
        for _ in range(100):
            layer = program(base, rng)
            samples.append(layer.tiles[0].pos.noisy[:, 0, 0, 0])
        samples = np.concatenate(samples)
        target = base.tiles[0].pos.target[0, 0, 0]
        assert np.std(samples) == pytest.approx(d.sigma_prog * target, rel=0.02)

    def test_duplicate_copies_uncorrelated(self):
        d = design(res_cell=8)
        w = QuantizedMatrix(codes=np.full((3, 3), 80, dtype=np.int64), scale=1.0, bits=8)
        base = map_weights(w, d, dup=2)
        rng = np.random.default_rng(17)
        a, b = [], []
        for _ in range(11200):
            layer = program(base, rng)
            a.append(layer.tiles[0].pos.noisy[0].ravel())
            b.append(layer.tiles[0].pos.noisy[1].ravel())
        a = np.concatenate(a)
        b = np.concatenate(b)
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 0.01

    def test_reprogramming_resamples(self):
        base = map_weights(quantize(np.eye(4), 8), design())
        l1 = program(base, np.random.default_rng(0))
        l2 = program(l1, np.random.default_rng(1))
        assert not np.array_equal(l1.tiles[0].pos.noisy, l2.tiles[0].pos.noisy)

    def test_program_requires_rng_when_noisy(self):
        with pytest.raises(ValueError):
            program(map_weights(quantize(np.eye(2), 8), design()))


class TestMvmIdealPath:
    def test_identity_2x2(self):
        d = design(res_cell=8, res_adc=None)
        qw = quantize(np.eye(2), 8)
        layer = program(map_weights(qw, d, noise=QUIET))
        x = quantize(np.array([[1.0, 0.0]]), 8)
        y = mvm(layer, x, read_noise=False)
        np.testing.assert_array_equal(y, x.codes @ qw.codes)

    @pytest.mark.parametrize("res_cell", [1, 2, 3, 4, 8])
    def test_ideal_equals_integer_matmul(self, res_cell):
        rng = np.random.default_rng(res_cell)
        d = design(res_cell=res_cell, res_adc=None)
        qw = quantize(rng.standard_normal((20, 12)), 8)
        layer = program(map_weights(qw, d, noise=QUIET))
        x = rng.integers(-127, 128, size=(6, 20))
        np.testing.assert_array_equal(mvm(layer, x, read_noise=False), x @ qw.codes)

    def test_negating_weights_negates_output(self):
        rng = np.random.default_rng(4)
        d = design(res_cell=2, res_adc=8)
        qw = quantize(rng.standard_normal((10, 7)), 8)
        qw_neg = QuantizedMatrix(codes=-qw.codes, scale=qw.scale, bits=8)
        x = rng.integers(-127, 128, size=(4, 10))
        y = mvm(program(map_weights(qw, d, noise=QUIET)), x, read_noise=False)
        y_neg = mvm(program(map_weights(qw_neg, d, noise=QUIET)), x, read_noise=False)
        np.testing.assert_array_equal(y_neg, -y)

    def test_tiling_invariance(self):
        rng = np.random.default_rng(5)
        w = rng.standard_normal((100, 100))
        qw = quantize(w, 8)
        x = rng.integers(0, 128, size=(3, 100))
        outs = []
        for xbar in (64, 128):
            d = design(res_cell=4, xbar=xbar, res_adc=None)
            outs.append(mvm(program(map_weights(qw, d, noise=QUIET)), x, read_noise=False))
        np.testing.assert_array_equal(outs[0], outs[1])

    def test_unprogrammed_rejected(self):
        layer = map_weights(quantize(np.eye(2), 8), design())
        with pytest.raises(RuntimeError):
            mvm(layer, np.array([[1, 0]]), read_noise=False)

    def test_wrong_input_length(self):
        layer = program(map_weights(quantize(np.eye(3), 8), design(), noise=QUIET))
        with pytest.raises(ValueError):
            mvm(layer, np.array([[1, 0]]), read_noise=False)


class TestMvmFixedPointOracle:
    @pytest.mark.parametrize("res_cell", [1, 2, 4, 8])
    def test_bit_exact_against_oracle(self, res_cell):
        rng = np.random.default_rng(100 + res_cell)
        d = design(res_cell=res_cell, xbar=32, res_adc=8)
        for case in range(25):
            qw = quantize(rng.standard_normal((8, 8)) * rng.uniform(0.5, 3.0), 8)
            layer = program(map_weights(qw, d, noise=QUIET))
            x = rng.integers(-127, 128, size=(1, 8))
            got = mvm(layer, x, read_noise=False)
            want = fixed_point_oracle(qw.codes, x, d)
            np.testing.assert_array_equal(got, want, err_msg=f"case {case}")

    def test_oracle_with_row_tiling(self):
        rng = np.random.default_rng(55)
        d = design(res_cell=4, xbar=32, res_adc=8)
        qw = quantize(rng.standard_normal((70, 5)), 8)
        layer = program(map_weights(qw, d, noise=QUIET))
        x = rng.integers(0, 128, size=(2, 70))
        np.testing.assert_array_equal(
            mvm(layer, x, read_noise=False), fixed_point_oracle(qw.codes, x, d)
        )


def _read_error_variance(dup: int, n_reads: int, seed: int) -> float:
    """Variance of the copy-averaged output under fresh program+read noise."""
    rng = np.random.default_rng(seed)
    d = design(res_cell=8, xbar=32, freq=5e8, temp=350.0)
    qw = quantize(np.linspace(-1.0, 1.0, 16 * 8).reshape(16, 8), 8)
    base = map_weights(qw, d, dup=dup)
    x = np.full((1, 16), 90, dtype=np.int64)
    ideal = mvm(
        program(map_weights(qw, design(res_cell=8, xbar=32, res_adc=None), noise=QUIET), None),
        x,
        read_noise=False,
    ).astype(float)
    errs = np.empty(n_reads)
    for i in range(n_reads):
        layer = program(base, rng)
        out = mvm(layer, x, rng, mode="average")
        errs[i] = float(out[0, 0] - ideal[0, 0])
    return float(np.var(errs))


class TestDuplicationVariance:
    def test_variance_quarter_at_k4(self):
        v1 = _read_error_variance(1, 10000, seed=2)
        v4 = _read_error_variance(4, 10000, seed=3)
        assert v4 == pytest.approx(v1 / 4.0, rel=0.20)

    def test_variance_monotone_in_k(self):
        v1 = _read_error_variance(1, 4000, seed=5)
        v2 = _read_error_variance(2, 4000, seed=6)
        v4 = _read_error_variance(4, 4000, seed=7)
        assert v1 > v2 > v4


class TestModes:
    def test_roundrobin_assigns_copies(self):
        rng = np.random.default_rng(8)
        d = design(res_cell=8)
        qw = quantize(np.eye(4), 8)
        layer = program(map_weights(qw, d, dup=2), rng)
        x = np.tile([[10, 20, 30, 40]], (4, 1))
        per_copy = mvm(layer, x, np.random.default_rng(1), mode="per_copy")
        rr = mvm(layer, x, np.random.default_rng(1), mode="roundrobin")
        assert per_copy.shape == (2, 4, 4)
        np.testing.assert_array_equal(rr[0], per_copy[0, 0])
        np.testing.assert_array_equal(rr[1], per_copy[1, 1])

    def test_average_mode_returns_float_mean(self):
        d = design(res_cell=8)
        layer = program(map_weights(quantize(np.eye(3), 8), d, dup=3), np.random.default_rng(0))
        out = mvm(layer, np.array([[5, 5, 5]]), np.random.default_rng(2), mode="average")
        assert out.dtype == float

    def test_unknown_mode(self):
        d = design()
        layer = program(map_weights(quantize(np.eye(2), 8), d, noise=QUIET))
        with pytest.raises(ValueError):
            mvm(layer, np.array([[1, 0]]), read_noise=False, mode="bogus")


class TestSerialization:
    def test_json_round_trip_preserves_outputs(self):
        rng = np.random.default_rng(13)
        d = design(res_cell=2)
        layer = program(map_weights(quantize(rng.standard_normal((9, 6)), 8), d, dup=2), rng)
        restored = layer_from_json(layer_to_json(layer))
        x = rng.integers(0, 128, size=(3, 9))
        a = mvm(layer, x, np.random.default_rng(77))
        b = mvm(restored, x, np.random.default_rng(77))
        np.testing.assert_array_equal(a, b)

    def test_unprogrammed_round_trip(self):
        layer = map_weights(quantize(np.eye(3), 8), design())
        restored = layer_from_json(layer_to_json(layer))
        assert not restored.programmed
        assert restored.design == layer.design
