import math

import numpy as np
import pytest

from bicmcee import rng as _rng
from bicmcee.channel import (
    FadeVector,
    LinkBudget,
    apply_channel,
    draw_estimates,
    draw_posterior,
    draw_rayleigh,
    estimate_channel,
    export_fade_vectors,
    import_fade_vectors,
    ml_estimate,
    posterior_of_true_channel,
)
from bicmcee.errors import ChannelFileError, ConfigError
from bicmcee.modem import QAM16, PosteriorParams, qam_map
from oracles import posterior_consistency_moments


class TestRayleigh:
    def test_second_moment(self):
        fv = draw_rayleigh(100_000, 1.0, _rng.stream(1, 0))
        assert 0.99 <= np.mean(np.abs(fv.h) ** 2) <= 1.01

    def test_circular(self):
        h = draw_rayleigh(200_000, 2.0, _rng.stream(2, 0)).h
        assert np.var(h.real) == pytest.approx(1.0, rel=0.02)
        assert np.var(h.imag) == pytest.approx(1.0, rel=0.02)
        assert abs(np.mean(h.real * h.imag)) < 0.01

    def test_deterministic(self):
        a = draw_rayleigh(64, 1.0, _rng.stream(7, 1, 3)).h
        b = draw_rayleigh(64, 1.0, _rng.stream(7, 1, 3)).h
        assert a.tobytes() == b.tobytes()

    @pytest.mark.parametrize("M,var", [(0, 1.0), (4, 0.0), (4, -1.0)])
    def test_bad_args(self, M, var):
        with pytest.raises(ConfigError):
            draw_rayleigh(M, var, _rng.stream(0))

    def test_fade_vector_validation(self):
        with pytest.raises(ConfigError):
            FadeVector(np.array([]))
        with pytest.raises(ConfigError):
            FadeVector(np.array([1.0, np.nan]))


class TestApplyChannel:
    def test_noiseless(self):
        fv = draw_rayleigh(32, 1.0, _rng.stream(3))
        s = qam_map(np.random.default_rng(0).integers(0, 2, 128))
        y = apply_channel(s, fv, 1e-30, _rng.stream(4))
        np.testing.assert_allclose(y, fv.h * s, atol=1e-10)

    def test_block_is_constant_over_rows(self):
        fv = draw_rayleigh(8, 1.0, _rng.stream(3))
        s = np.ones((5, 8), complex)
        y = apply_channel(s, fv, 1e-30, _rng.stream(4))
        np.testing.assert_allclose(y, np.tile(fv.h, (5, 1)), atol=1e-10)

    def test_pure_noise(self):
        fv = draw_rayleigh(100_000, 1.0, _rng.stream(5))
        y = apply_channel(np.zeros(100_000), fv, 0.3, _rng.stream(6))
        assert np.mean(np.abs(y) ** 2) == pytest.approx(0.3, rel=0.02)

    def test_received_power(self):
        n = 200_000
        fv = draw_rayleigh(n, 1.0, _rng.stream(8))
        s = qam_map(np.random.default_rng(1).integers(0, 2, 4 * n))
        y = apply_channel(s, fv, 0.5, _rng.stream(9))
        assert np.mean(np.abs(y) ** 2) == pytest.approx(1.0 * QAM16.symbol_energy + 0.5, rel=0.02)

    def test_length_mismatch(self):
        fv = draw_rayleigh(4, 1.0, _rng.stream(0))
        with pytest.raises(ConfigError):
            apply_channel(np.zeros(5), fv, 1.0, _rng.stream(1))


class TestEstimation:
    def test_noiseless(self):
        fv = draw_rayleigh(16, 1.0, _rng.stream(10))
        ce = estimate_channel(fv, 3, 1.0, 1e-30, _rng.stream(11))
        np.testing.assert_allclose(ce.h_hat, fv.h, atol=1e-12)

    def test_unit_case(self):
        fv = draw_rayleigh(4, 1.0, _rng.stream(10))
        ce = estimate_channel(fv, 1, 1.0, 1.0, _rng.stream(11))
        assert ce.pp.err_var == 1.0
        assert ce.pp.rho == 0.5

    def test_doubling_pilots(self):
        fv = draw_rayleigh(4, 1.0, _rng.stream(10))
        a = estimate_channel(fv, 2, 1.5, 0.7, _rng.stream(11)).pp
        b = estimate_channel(fv, 4, 1.5, 0.7, _rng.stream(11)).pp
        assert b.err_var == pytest.approx(a.err_var / 2, rel=1e-15)
        assert b.rho > a.rho
        assert a.err_var == pytest.approx(0.7 / (2 * 1.5), rel=1e-15)

    def test_pilot_identity(self):
        # the ML estimate equals H plus the pilot-noise average on the same draws
        fv = draw_rayleigh(50, 1.0, _rng.stream(12))
        N, P, nv = 3, 2.0, 0.4
        ce = estimate_channel(fv, N, P, nv, _rng.stream(13))
        z = _rng.complex_normal(_rng.stream(13), (N, 50), nv)
        np.testing.assert_allclose(ce.h_hat, fv.h + z.sum(axis=0) / (N * math.sqrt(P)), atol=1e-12, rtol=0)

    def test_ml_estimate_with_phased_pilots(self):
        h = np.array([0.3 - 0.2j, -1.0 + 0.5j])
        p = np.array([1.0, 1j, -1.0, -1j]) * math.sqrt(2)
        y = p[:, None] * h[None, :]
        np.testing.assert_allclose(ml_estimate(y, p), h, atol=1e-15)

    def test_error_statistics(self):
        n = 100_000
        fv = draw_rayleigh(n, 1.0, _rng.stream(14))
        ce = estimate_channel(fv, 2, 1.0, 0.8, _rng.stream(15))
        e = ce.h_hat - fv.h
        assert abs(np.mean(e)) < 0.01
        assert np.mean(np.abs(e) ** 2) == pytest.approx(0.4, rel=0.02)

    def test_error_whiteness(self):
        M, T = 4, 400_000
        fv = draw_rayleigh(M * T, 1.0, _rng.stream(16))
        ce = estimate_channel(fv, 1, 1.0, 1.0, _rng.stream(17))
        e = (ce.h_hat - fv.h).reshape(T, M)
        cov = e.T @ np.conj(e) / T
        off = cov[~np.eye(M, dtype=bool)]
        assert np.max(np.abs(off)) < 0.01 * ce.pp.err_var

    @pytest.mark.parametrize("N,P", [(0, 1.0), (1, 0.0)])
    def test_bad_args(self, N, P):
        fv = draw_rayleigh(4, 1.0, _rng.stream(0))
        with pytest.raises(ConfigError):
            estimate_channel(fv, N, P, 1.0, _rng.stream(1))


class TestLinkBudget:
    def test_ebn0_round_trip(self):
        lb = LinkBudget.from_ebn0(7.5)
        assert lb.ebn0_db() == pytest.approx(7.5, abs=1e-12)
        assert lb.pilot_energy == lb.symbol_energy
        assert lb.noise_var == pytest.approx(1 / (2 * 10**0.75), rel=1e-14)

    def test_rejects_non_positive(self):
        with pytest.raises(ConfigError):
            LinkBudget(0.0)


class TestPosterior:
    def test_hand_case(self):
        fv = FadeVector(np.array([1.0 + 0j]))
        ce = estimate_channel(fv, 1, 1.0, 1.0, _rng.stream(0))
        ce = type(ce)(np.array([2.0 + 0j]), ce.pp, 1, 1.0)
        mean, var = posterior_of_true_channel(ce, 0)
        assert mean == pytest.approx(1.0 + 0j)
        assert var == pytest.approx(0.5)

    def test_perfect_limit(self):
        pp = PosteriorParams.perfect(1.0, 1.0)
        h_hat = np.array([0.5 - 1j, 2.0])
        H = draw_posterior(h_hat, pp, 3, _rng.stream(0))
        np.testing.assert_array_equal(H, np.tile(h_hat, (3, 1)))

    def test_var_identity(self):
        for err in (0.01, 0.3, 5.0):
            pp = PosteriorParams.from_variances(1.7, err, 1.0)
            assert pp.posterior_var == pytest.approx(pp.rho * err, rel=1e-12)

    def test_draw_moments(self):
        pp = PosteriorParams.from_variances(1.0, 0.5, 1.0)
        H = draw_posterior(np.array([1.0 + 1j]), pp, 200_000, _rng.stream(1))[:, 0]
        assert np.mean(H) == pytest.approx(pp.rho * (1 + 1j), abs=0.01)
        assert np.var(H) == pytest.approx(pp.posterior_var, rel=0.02)

    def test_estimate_marginal(self):
        pp = PosteriorParams.from_variances(1.0, 0.25, 1.0)
        hh = draw_estimates(100_000, pp, _rng.stream(2))
        assert np.mean(np.abs(hh) ** 2) == pytest.approx(1.25, rel=0.02)

    def test_consistency_of_generative_orders(self):
        fwd, bwd = posterior_consistency_moments(100_000, 1.0, 1.0, 1, seed=2024)
        np.testing.assert_allclose(fwd, bwd, rtol=0.01)


class TestFadeFile:
    def test_example_line(self, tmp_path):
        p = tmp_path / "h.txt"
        p.write_text("# two subcarriers\n1.0 0.0 0.5 −0.5\n", encoding="utf-8")
        (fv,) = import_fade_vectors(p, M=2)
        assert fv.h.tolist() == [1 + 0j, 0.5 - 0.5j]

    def test_empty(self, tmp_path):
        p = tmp_path / "e.txt"
        p.write_text("")
        assert import_fade_vectors(p) == []

    def test_round_trip(self, tmp_path):
        p = tmp_path / "r.txt"
        vecs = [draw_rayleigh(7, 1.0, _rng.stream(3, i)) for i in range(5)]
        export_fade_vectors(p, vecs, header="seed 3\nM 7")
        back = import_fade_vectors(p, M=7)
        assert len(back) == 5
        for a, b in zip(vecs, back):
            assert a.h.tobytes() == b.h.tobytes()

    @pytest.mark.parametrize(
        "text,line",
        [
            ("1 0 1 0\n1 0 1\n", 2),
            ("# c\n\n1 0 abc 0\n", 3),
            ("1 0 1 0\n1 0 1 0 1 0\n", 2),
            ("1 0 nan 0\n", 1),
        ],
    )
    def test_errors_name_line(self, tmp_path, text, line):
        p = tmp_path / "bad.txt"
        p.write_text(text)
        with pytest.raises(ChannelFileError) as ei:
            import_fade_vectors(p, M=2)
        assert ei.value.line == line
        assert str(ei.value).startswith(f"line {line}:")
