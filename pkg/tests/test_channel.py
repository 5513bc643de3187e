import numpy as np
import pytest

from dnsptl.channel import (
    DomainScenario,
    default_scenarios,
    draw_channel,
    draw_taps,
    freq_response,
    snr_to_noise_var,
)
from dnsptl.errors import InputError
from dnsptl.ofdm import OfdmConfig


def _naive_dft(taps, n):
    k = np.arange(n)
    return np.array([sum(taps[l] * np.exp(-2j * np.pi * kk * l / n) for l in range(len(taps))) for kk in k])


class TestFreqResponse:
    def test_flat(self):
        np.testing.assert_allclose(freq_response([1, 0, 0, 0], 16), np.ones(16))

    def test_pure_delay(self):
        k = np.arange(16)
        np.testing.assert_allclose(freq_response([0, 1, 0], 16), np.exp(-2j * np.pi * k / 16), atol=1e-15)

    def test_matches_direct_summation(self):
        rng = np.random.default_rng(0)
        taps = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        assert np.max(np.abs(freq_response(taps, 16) - _naive_dft(taps, 16))) < 1e-12

    def test_too_many_taps(self):
        with pytest.raises(InputError):
            freq_response(np.ones(17), 16)


class TestSnr:
    @pytest.mark.parametrize("snr,expected", [(10, 0.1), (0, 1.0), (20, 0.01)])
    def test_values(self, snr, expected):
        assert snr_to_noise_var(snr, 1.0) == pytest.approx(expected, rel=1e-12)

    def test_scales_with_power(self):
        assert snr_to_noise_var(10, 2.0) == pytest.approx(0.2)


class TestDrawChannel:
    cfg = OfdmConfig(64, 8, n_slots=8, n_taps=8)

    def test_frozen_channel(self):
        sc = DomainScenario("x", 3.0, 8, slot_correlation=1.0)
        ch = draw_channel(sc, self.cfg, np.random.default_rng(0))
        assert np.all(ch.taps == ch.taps[:, :1])

    def test_freq_response_consistent(self):
        sc = DomainScenario("x", 3.0, 8)
        ch = draw_channel(sc, self.cfg, np.random.default_rng(1))
        for m in range(8):
            np.testing.assert_allclose(ch.freq_response[:, m], _naive_dft(ch.taps[:, m], 64), atol=1e-12)

    def test_tap_count_mismatch(self):
        with pytest.raises(InputError):
            draw_channel(DomainScenario("x", 3.0, 4), self.cfg, np.random.default_rng())

    def test_deterministic(self):
        sc = DomainScenario("x", 3.0, 8, 0.9)
        a = draw_channel(sc, self.cfg, np.random.default_rng(42))
        b = draw_channel(sc, self.cfg, np.random.default_rng(42))
        assert np.array_equal(a.taps, b.taps) and np.array_equal(a.freq_response, b.freq_response)

    def test_bad_scenario(self):
        with pytest.raises(InputError):
            DomainScenario("x", -1.0)
        with pytest.raises(InputError):
            DomainScenario("x", 1.0, slot_correlation=1.2)


def _many(sc, n_slots, draws=10_000, seed=0):
    rng = np.random.default_rng(seed)
    return np.stack([draw_taps(sc, n_slots, rng) for _ in range(draws)])


class TestStatistics:
    def test_uncorrelated_slots(self):
        taps = _many(DomainScenario("x", 3.0, 4, slot_correlation=0.0), 2)
        for l in range(4):
            a, b = taps[:, l, 0], taps[:, l, 1]
            corr = np.abs(np.mean(a * b.conj())) / np.sqrt(np.mean(np.abs(a) ** 2) * np.mean(np.abs(b) ** 2))
            assert corr < 0.03

    def test_uniform_pdp_limit(self):
        taps = _many(DomainScenario("x", 1e12, 8), 1)
        power = np.mean(np.abs(taps[:, :, 0]) ** 2, axis=0)
        np.testing.assert_allclose(power, 1 / 8, rtol=0.03)

    @pytest.mark.parametrize("sc", default_scenarios(8)[0] + [default_scenarios(8)[1]], ids=lambda s: s.scenario_id)
    def test_energy_normalized(self, sc):
        taps = _many(sc, 1)
        assert abs(np.mean(np.sum(np.abs(taps[:, :, 0]) ** 2, axis=1)) - 1) < 0.02

    @pytest.mark.parametrize("alpha", [0.5, 0.95, 0.99])
    def test_ar1_lag_correlation(self, alpha):
        taps = _many(DomainScenario("x", 2.0, 3, slot_correlation=alpha), 2)
        for l in range(3):
            a, b = taps[:, l, 0], taps[:, l, 1]
            corr = np.real(np.mean(b * a.conj())) / np.sqrt(np.mean(np.abs(a) ** 2) * np.mean(np.abs(b) ** 2))
            assert abs(corr - alpha) < 0.03

    def test_pdp_weights(self):
        w = DomainScenario("x", 2.0, 8).pdp_weights()
        assert w.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(w[1:] / w[:-1], np.exp(-1 / 2.0))
