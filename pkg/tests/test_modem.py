import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicmcee.errors import ConfigError
from bicmcee.fec import conv_encode, trellis_decode
from bicmcee.modem import QAM16, MetricMode, PosteriorParams, QamConstellation, bit_metrics, qam_map, symbol_metric
from oracles import bit_llrs_bruteforce, qam16_table

MODES = ["perfect", "mismatched", "modified"]


def pp_for(rho, noise_var, prior_var=1.0):
    return PosteriorParams.from_variances(prior_var, prior_var * (1 - rho) / rho, noise_var)


class TestConstellation:
    def test_0000(self):
        assert qam_map([0, 0, 0, 0])[0] == pytest.approx((-3 - 3j) / math.sqrt(10), abs=1e-15)

    def test_matches_published_table(self):
        table = qam16_table()
        for bits, point in table.items():
            assert qam_map(list(bits))[0] == pytest.approx(point, abs=1e-15)

    def test_bijection(self):
        assert len({complex(p) for p in QAM16.points}) == 16

    def test_unit_energy(self):
        assert np.mean(np.abs(QAM16.points) ** 2) == pytest.approx(1.0, abs=1e-12)
        assert np.mean(np.abs(QamConstellation.qam16(2.5).points) ** 2) == pytest.approx(2.5, abs=1e-12)

    def test_gray_neighbours_differ_in_one_bit(self):
        pts, lab = QAM16.points, QAM16.labels
        d = math.sqrt(4 / 10)  # nearest-neighbour spacing at Es=1
        for i in range(16):
            for j in range(16):
                if abs(abs(pts[i] - pts[j]) - d) < 1e-9:
                    assert int(np.sum(lab[i] != lab[j])) == 1

    def test_random_bits_energy(self):
        bits = np.random.default_rng(0).integers(0, 2, 4 * 200_000)
        assert np.mean(np.abs(qam_map(bits)) ** 2) == pytest.approx(1.0, rel=0.01)

    def test_length_error(self):
        with pytest.raises(ValueError):
            qam_map([0, 1, 0])


class TestPosteriorParams:
    def test_identities(self):
        pp = PosteriorParams.from_variances(1.3, 0.4, 0.2)
        assert pp.rho == pytest.approx(1.3 / 1.7, abs=1e-15)
        assert pp.rho * pp.err_var == pytest.approx((1 - pp.rho) * pp.prior_var, abs=1e-12)

    def test_inconsistent_rho(self):
        with pytest.raises(ConfigError):
            PosteriorParams(0.7, 1.0, 1.0, 1.0)

    def test_rho_zero_allowed(self):
        pp = PosteriorParams.from_variances(1.0, math.inf, 1.0)
        assert pp.rho == 0.0
        assert pp.posterior_var == 1.0


class TestSymbolMetric:
    def test_hand_value(self):
        pp = pp_for(0.5, 1.0)
        d = symbol_metric(0j, 1 + 1j, 1 + 0j, MetricMode.MODIFIED, pp)
        assert d == pytest.approx(math.log(2) + 0.25, abs=1e-12)
        assert d == pytest.approx(0.9431, abs=1e-4)

    @given(st.complex_numbers(max_magnitude=5), st.complex_numbers(max_magnitude=3),
           st.floats(0.01, 10))
    @settings(max_examples=100)
    def test_rho_one_is_scaled_euclidean(self, y, h, nv):
        pp = PosteriorParams.perfect(1.0, nv)
        s = QAM16.points
        mod = symbol_metric(y, s, h, MetricMode.MODIFIED, pp)
        eu = symbol_metric(y, s, h, MetricMode.PERFECT, pp)
        np.testing.assert_allclose(mod, math.log(nv) + eu / nv, rtol=1e-12, atol=1e-12)

    def test_zero_residual(self):
        pp = pp_for(0.8, 0.1)
        s = QAM16.points[5]
        assert symbol_metric(0.7j * s, s, 0.7j, MetricMode.MISMATCHED, pp) == pytest.approx(0.0, abs=1e-15)

    def test_converges_linearly_to_euclidean(self):
        rng = np.random.default_rng(1)
        y, h, nv = complex(*rng.normal(size=2)), complex(*rng.normal(size=2)), 0.3
        gaps = []
        for eps in (1e-2, 1e-3, 1e-4):
            pp = pp_for(1 - eps, nv)
            mod = symbol_metric(y, QAM16.points, h, MetricMode.MODIFIED, pp)
            eu = symbol_metric(y, QAM16.points, h, MetricMode.MISMATCHED, pp)
            gaps.append(np.max(np.abs(mod - (math.log(nv) + eu / nv))))
        assert gaps[0] / gaps[1] == pytest.approx(10, rel=0.1)
        assert gaps[1] / gaps[2] == pytest.approx(10, rel=0.05)

    def test_argmin_agrees_at_zero_error(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            y, h = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
            pp = PosteriorParams.perfect(1.0, 10 ** rng.uniform(-2, 1))
            a = np.argmin(symbol_metric(y, QAM16.points, h, MetricMode.MODIFIED, pp))
            b = np.argmin(symbol_metric(y, QAM16.points, h, MetricMode.PERFECT, pp))
            assert a == b


class TestBitMetrics:
    def test_noise_free_signs(self):
        pp = PosteriorParams.perfect(1.0, 1e-3)
        h = 0.9 - 0.4j
        for idx in range(16):
            llr = bit_metrics(h * QAM16.points[idx], h, QAM16, MetricMode.PERFECT, pp)
            assert np.array_equal((llr < 0).astype(int), QAM16.labels[idx])

    def test_modified_rho_one_equals_perfect(self):
        rng = np.random.default_rng(4)
        y = rng.normal(size=50) + 1j * rng.normal(size=50)
        h = rng.normal(size=50) + 1j * rng.normal(size=50)
        pp = PosteriorParams.perfect(1.0, 0.37)
        a = bit_metrics(y, h, QAM16, MetricMode.MODIFIED, pp)
        b = bit_metrics(y, h, QAM16, MetricMode.PERFECT, pp)
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9)

    def test_hand_case_against_enumeration(self):
        y, h, rho, nv = 0.3 + 0.1j, 0.8 - 0.2j, 0.9, 0.5
        got = bit_metrics(y, h, QAM16, MetricMode.MODIFIED, pp_for(rho, nv))
        want = bit_llrs_bruteforce(y, h, "modified", rho, nv)
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)

    @pytest.mark.parametrize("mode", MODES)
    def test_matches_enumeration_random(self, mode):
        rng = np.random.default_rng(hash(mode) % 2**32)
        for _ in range(200):
            rho = rng.uniform(0.05, 1.0)
            nv = 10 ** rng.uniform(-1.5, 0.5)
            y = complex(*rng.normal(size=2))
            h = complex(*rng.normal(size=2))
            La = rng.normal(scale=2, size=4) if rng.random() < 0.5 else None
            got = bit_metrics(y, h, QAM16, mode, pp_for(rho, nv), La)
            want = bit_llrs_bruteforce(y, h, mode, rho, nv, apriori=La)
            np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)

    def test_vectorised_shape(self):
        pp = pp_for(0.7, 0.2)
        y = np.zeros((3, 5), complex)
        h = np.ones(5, complex)
        assert bit_metrics(y, h, QAM16, MetricMode.MODIFIED, pp).shape == (3, 5, 4)

    def test_max_log_close_at_high_snr(self):
        pp = PosteriorParams.perfect(1.0, 1e-3)
        rng = np.random.default_rng(9)
        y = rng.normal(size=20) + 1j * rng.normal(size=20)
        exact = bit_metrics(y, 1.0, QAM16, MetricMode.PERFECT, pp)
        approx = bit_metrics(y, 1.0, QAM16, MetricMode.PERFECT, pp, max_log=True)
        assert np.array_equal(np.sign(exact), np.sign(approx))

    def test_non_finite_rejected(self):
        pp = pp_for(0.5, 1.0)
        with pytest.raises(ValueError):
            bit_metrics(np.nan + 0j, 1.0, QAM16, MetricMode.PERFECT, pp)
        with pytest.raises(ValueError):
            bit_metrics(0j, np.inf, QAM16, MetricMode.MODIFIED, pp)

    def test_sign_convention_end_to_end(self):
        rng = np.random.default_rng(10)
        info = rng.integers(0, 2, 198)
        coded = conv_encode(info)
        h = 0.6 + 0.8j
        y = h * qam_map(coded)
        pp = PosteriorParams.perfect(1.0, 1e-2)
        llr = bit_metrics(y, h, QAM16, MetricMode.MODIFIED, pp).ravel()
        dec, _ = trellis_decode(llr)
        assert np.array_equal(dec, info)
