import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from starkit import (
    EcgRecord,
    RPeakSet,
    StarParams,
    SynthSpec,
    detect_rpeaks,
    equalized_targets,
    interp_resample,
    sinusoidal_schedule,
    star_forward,
    star_inverse,
    synth_ecg,
)
from starkit.star import KERNEL_CUBIC, KERNEL_LINEAR

DEFAULT = StarParams(a2=1.6, a3=0.6, phase_phi=0.0, periods_n=1)
# Mean-one schedule: segment warps balance out, so trimming removes almost
# nothing and the round trip stays within interpolation error.
BALANCED = StarParams(a2=1.5, a3=0.5, phase_phi=0.0, periods_n=1)


def rel_l2(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


class TestSchedule:
    def test_default_params_m4(self):
        c = sinusoidal_schedule(4, DEFAULT)
        np.testing.assert_allclose(c, [1.1, 1.6, 1.1, 0.6], atol=1e-12)

    def test_narrow_band_limit(self):
        eps = 1e-9
        p = StarParams(a2=0.6 + eps, a3=0.6)
        c = sinusoidal_schedule(8, p)
        np.testing.assert_allclose(c, 0.6, atol=2 * eps)

    def test_single_segment_midpoint(self):
        p = StarParams(a2=1.6, a3=0.6, phase_phi=0.0)
        c = sinusoidal_schedule(1, p)
        assert c.shape == (1,)
        assert abs(c[0] - (0.6 + (1.6 - 0.6) / 2.0)) < 1e-15

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            m = int(rng.integers(1, 40))
            a3 = float(rng.uniform(0.1, 1.0))
            a2 = a3 + float(rng.uniform(0.05, 1.5))
            phi = float(rng.uniform(-np.pi, np.pi))
            n = int(rng.integers(1, 5))
            p = StarParams(a2=a2, a3=a3, phase_phi=phi, periods_n=n)
            c = sinusoidal_schedule(m, p)
            i = np.arange(m)
            direct = a3 + (a2 - a3) * (
                np.sin(2 * np.pi * n * i / m + phi) + 1.0) / 2.0
            np.testing.assert_allclose(c, direct, atol=1e-12)

    def test_bounds_respected(self):
        c = sinusoidal_schedule(17, DEFAULT)
        assert np.all(c >= DEFAULT.a3)
        assert np.all(c <= DEFAULT.a2)

    def test_zero_segments_rejected(self):
        with pytest.raises(ValueError, match=">= 1"):
            sinusoidal_schedule(0, DEFAULT)


class TestEqualizedTargets:
    def test_exact_division(self):
        np.testing.assert_array_equal(equalized_targets(9, 3), [3, 3, 3])

    def test_largest_remainder_leftmost(self):
        np.testing.assert_array_equal(equalized_targets(10, 3), [4, 3, 3])

    def test_pigeonhole_error(self):
        with pytest.raises(ValueError, match="at least one sample"):
            equalized_targets(2, 3)

    @given(n_body=st.integers(1, 5000), m=st.integers(1, 50))
    def test_partition_properties(self, n_body, m):
        if n_body < m:
            with pytest.raises(ValueError):
                equalized_targets(n_body, m)
            return
        t = equalized_targets(n_body, m)
        assert t.sum() == n_body
        assert t.min() >= 1
        assert t.max() - t.min() <= 1


class TestInterpResample:
    def test_linear_hand_values(self):
        out = interp_resample(np.array([0.0, 1.0, 2.0, 3.0]), 7)
        np.testing.assert_allclose(out, [0, 0.5, 1, 1.5, 2, 2.5, 3],
                                   atol=1e-15)

    def test_identity_grid_exact(self):
        v = np.random.default_rng(1).normal(size=33)
        np.testing.assert_array_equal(interp_resample(v, 33), v)

    @pytest.mark.parametrize("kernel", [KERNEL_LINEAR, KERNEL_CUBIC])
    def test_constant_preserved(self, kernel):
        out = interp_resample(np.full(4, 5.0), 9, kernel)
        np.testing.assert_array_equal(out, np.full(9, 5.0))

    @pytest.mark.parametrize("kernel", [KERNEL_LINEAR, KERNEL_CUBIC])
    def test_endpoints_clamped(self, kernel):
        v = np.array([2.0, -1.0, 0.5, 4.0, 1.0])
        out = interp_resample(v, 17, kernel)
        assert out[0] == v[0]
        assert out[-1] == v[-1]

    def test_cubic_monotone_segments_stay_monotone(self):
        v = np.array([0.0, 0.1, 0.3, 0.9, 1.0])
        out = interp_resample(v, 41, KERNEL_CUBIC)
        assert np.all(np.diff(out) >= -1e-12)

    def test_unknown_kernel(self):
        with pytest.raises(ValueError, match="kernel"):
            interp_resample(np.zeros(4), 8, "sinc")


def _uniform_record(n_peaks=3, rr=200, head=100, tail=60, leads=2, seed=0):
    rng = np.random.default_rng(seed)
    total = head + rr * (n_peaks - 1) + tail
    data = rng.normal(size=(leads, total))
    peaks = tuple(head + rr * i for i in range(n_peaks))
    return EcgRecord(data=data, fs_hz=250.0), RPeakSet(indices=peaks)


class TestForward:
    def test_k0_and_k1_pass_through(self):
        record, _ = _uniform_record()
        for peaks in (RPeakSet(indices=()), RPeakSet(indices=(100,))):
            out, meta = star_forward(record, peaks, DEFAULT)
            np.testing.assert_array_equal(out.data, record.data)
            assert meta.is_identity

    def test_unit_coefficients_identity(self):
        record, peaks = _uniform_record(n_peaks=3, rr=200)
        out, meta = star_forward(record, peaks, DEFAULT,
                                 coefficients=np.ones(2))
        np.testing.assert_allclose(out.data, record.data, atol=1e-12)
        assert meta.coefficients == (1.0, 1.0)

    def test_length_preserved(self):
        record, peaks, _ = synth_ecg(SynthSpec(seed=2, n_leads=3))
        out, _ = star_forward(record, peaks, DEFAULT)
        assert out.data.shape == record.data.shape

    def test_head_and_tail_exact(self):
        record, peaks, _ = synth_ecg(SynthSpec(seed=7, n_leads=1))
        out, _ = star_forward(record, peaks, DEFAULT)
        r1, rk = peaks.indices[0], peaks.indices[-1]
        np.testing.assert_array_equal(out.data[:, :r1], record.data[:, :r1])
        np.testing.assert_array_equal(out.data[:, rk:], record.data[:, rk:])

    def test_peak_count_preserved_on_output(self):
        record, peaks, _ = synth_ecg(
            SynthSpec(duration_s=5.0, fs_hz=250.0, n_leads=1, seed=7)
        )
        out, _ = star_forward(record, peaks, DEFAULT)
        assert len(detect_rpeaks(out)) == len(peaks)

    def test_metadata_describes_transform(self):
        record, peaks, _ = synth_ecg(SynthSpec(seed=1))
        out, meta = star_forward(record, peaks, DEFAULT)
        m = len(peaks) - 1
        assert len(meta.coefficients) == m
        assert sum(meta.equalized_lengths) == peaks.indices[-1] - peaks.indices[0]
        assert meta.validate(total_len=record.samples_per_lead) == []
        for c, s, r in zip(meta.coefficients, meta.equalized_lengths,
                           meta.realized_lengths):
            assert r == max(1, int(np.floor(c * s)))

    def test_amplitude_scaling_applied(self):
        record, peaks = _uniform_record(n_peaks=2, rr=100)
        out, meta = star_forward(record, peaks, DEFAULT,
                                 coefficients=np.array([1.5]))
        # c=1.5 stretches the (single) segment, so the first warped sample is
        # the segment start scaled by the coefficient.
        start = peaks.indices[0]
        np.testing.assert_allclose(out.data[:, start],
                                   1.5 * record.data[:, start])

    def test_rpeaks_out_of_bounds(self):
        record, _ = _uniform_record()
        bad = RPeakSet(indices=(0, record.samples_per_lead))
        with pytest.raises(ValueError, match="rpeaks"):
            star_forward(record, bad, DEFAULT)

    def test_bad_coefficient_override(self):
        record, peaks = _uniform_record(n_peaks=3)
        with pytest.raises(ValueError, match="one entry per segment"):
            star_forward(record, peaks, DEFAULT, coefficients=np.ones(5))

    def test_deterministic_regardless_of_seed(self):
        record, peaks, _ = synth_ecg(SynthSpec(seed=3))
        a, _ = star_forward(record, peaks, DEFAULT, rng_seed=1)
        b, _ = star_forward(record, peaks, DEFAULT, rng_seed=99)
        np.testing.assert_array_equal(a.data, b.data)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), n_peaks=st.integers(2, 6),
           rr=st.integers(20, 120))
    def test_shape_and_boundary_property(self, seed, n_peaks, rr):
        record, peaks = _uniform_record(n_peaks=n_peaks, rr=rr, head=13,
                                        tail=7, seed=seed)
        out, _ = star_forward(record, peaks, DEFAULT)
        assert out.data.shape == record.data.shape
        r1, rk = peaks.indices[0], peaks.indices[-1]
        np.testing.assert_array_equal(out.data[:, :r1], record.data[:, :r1])
        np.testing.assert_array_equal(out.data[:, rk:], record.data[:, rk:])


class TestInverse:
    def test_inverse_of_identity_forward(self):
        record, peaks = _uniform_record(n_peaks=3, rr=200)
        out, meta = star_forward(record, peaks, DEFAULT,
                                 coefficients=np.ones(2))
        back = star_inverse(out, meta)
        np.testing.assert_allclose(back.data, record.data, atol=1e-12)

    def test_inverse_of_pass_through(self):
        record, _ = _uniform_record()
        out, meta = star_forward(record, RPeakSet(indices=(100,)), DEFAULT)
        back = star_inverse(out, meta)
        np.testing.assert_array_equal(back.data, record.data)

    @pytest.mark.parametrize("kernel,bound", [(KERNEL_LINEAR, 1e-2),
                                              (KERNEL_CUBIC, 1e-3)])
    def test_round_trip_bandlimited(self, kernel, bound):
        record, peaks, _ = synth_ecg(SynthSpec(seed=0, n_leads=2))
        out, meta = star_forward(record, peaks, BALANCED, kernel=kernel)
        back = star_inverse(out, meta)
        assert rel_l2(back.data, record.data) <= bound

    def test_round_trip_with_trimming(self):
        # Default parameters overrun the body and trim; the inverse still
        # reconstructs everything the forward pass kept.
        record, peaks, _ = synth_ecg(SynthSpec(seed=5, n_leads=1))
        out, meta = star_forward(record, peaks, DEFAULT)
        back = star_inverse(out, meta)
        assert back.data.shape == record.data.shape
        r1 = peaks.indices[0]
        np.testing.assert_array_equal(back.data[:, :r1], record.data[:, :r1])

    def test_invalid_metadata_rejected(self):
        record, peaks = _uniform_record(n_peaks=3, rr=200)
        _, meta = star_forward(record, peaks, DEFAULT)
        broken = type(meta)(
            rpeaks=meta.rpeaks,
            equalized_lengths=meta.equalized_lengths[:-1],
            realized_lengths=meta.realized_lengths,
            coefficients=meta.coefficients,
            params=meta.params,
            interp_kernel_id=meta.interp_kernel_id,
        )
        with pytest.raises(ValueError, match="invalid metadata"):
            star_inverse(record, broken)
