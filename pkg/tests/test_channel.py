import math

import numpy as np
import pytest

from conftest import bottom_array, make_scenario
from reflectshare.channel import (
    DimensionError,
    channel_tensor,
    channel_vector,
    combined_gains,
    effective_gain,
    gain_matrix,
    scenario_tensor,
    simulate_received,
    wave_number,
)
from reflectshare.model import ChannelVector, LinkParams, PhaseVector, Point2D


def test_wave_number_at_default_carrier(params):
    assert wave_number(2.4e9) == pytest.approx(50.26548, abs=1e-5)
    assert params.wave_number == pytest.approx(wave_number(2.4e9))


def test_inconsistent_wave_number_rejected():
    with pytest.raises(ValueError):
        LinkParams(carrier_frequency=2.4e9, wave_number=40.0)


class TestChannelVector:

    def test_direct_only(self):
        h = channel_vector(Point2D(x=0, y=0), Point2D(x=0, y=2), [], LinkParams())
        assert len(h) == 1
        assert h.entries[0] == pytest.approx(2.0 ** -3)
        assert h.entries[0].imag == 0.0

    def test_reflected_entry(self):
        params = LinkParams(path_loss_exponent=2.0)
        h = channel_vector(Point2D(x=4, y=3), Point2D(x=6, y=3), [Point2D(x=5, y=0)], params)
        d1 = 2 * math.sqrt(10)
        assert abs(h.entries[1]) == pytest.approx(d1 ** -2)
        expected_phase = math.remainder(params.wave_number * (d1 - 2.0), 2 * math.pi)
        assert np.angle(h.entries[1]) == pytest.approx(expected_phase, abs=1e-9)

    def test_zero_exponent_has_unit_amplitude(self):
        params = LinkParams(path_loss_exponent=0.0)
        h = channel_vector(Point2D(x=1, y=7), Point2D(x=8, y=2), [Point2D(x=5, y=0), Point2D(x=6, y=0)], params)
        assert np.allclose(np.abs(h.entries), 1.0)

    def test_direct_phase_is_exactly_zero(self):
        d = np.array([[[3.7, 4.1, 5.2]]])
        H = channel_tensor(d, LinkParams())
        assert H[0, 0, 0].imag == 0.0
        assert H[0, 0, 0].real == pytest.approx(3.7 ** -3)


class TestEffectiveGain:

    def test_no_elements_is_direct_power(self):
        h = ChannelVector(entries=np.array([0.5 + 0j]))
        assert effective_gain(h, PhaseVector()) == pytest.approx(0.25)

    def test_aligned_phase_adds_amplitudes(self):
        h = ChannelVector(entries=np.array([1.0 + 0j, 0.5 * np.exp(1j * 0.3)]))
        assert effective_gain(h, PhaseVector(phases=(0.3,))) == pytest.approx(1.5 ** 2)
        assert effective_gain(h, PhaseVector(phases=(0.3 - math.pi,))) == pytest.approx(0.5 ** 2)

    def test_bounded_by_amplitude_sum(self):
        rng = np.random.default_rng(4)
        entries = rng.uniform(0.1, 1.0, 6) * np.exp(1j * rng.uniform(-math.pi, math.pi, 6))
        bound = np.sum(np.abs(entries)) ** 2
        for _ in range(20):
            phases = PhaseVector.from_array(rng.uniform(-math.pi, math.pi, 5))
            assert 0.0 <= effective_gain(entries, phases) <= bound * (1 + 1e-12)

    def test_length_mismatch(self):
        h = ChannelVector(entries=np.ones(3, dtype=complex))
        with pytest.raises(DimensionError):
            effective_gain(h, PhaseVector.zeros(1))
        with pytest.raises(DimensionError):
            combined_gains(h.entries.reshape(1, 1, 3), PhaseVector.zeros(3))


def test_gain_matrix_matches_effective_gain(two_links):
    H = scenario_tensor(two_links)
    assert H.shape == (2, 2, 3)
    phases = PhaseVector(phases=(0.4, -1.2))
    G = gain_matrix(H, phases)
    deployment = two_links.deployment
    elements = [Point2D(x=4.96875, y=0.0), Point2D(x=5.03125, y=0.0)]
    for l in range(2):
        for k in range(2):
            h = channel_vector(deployment.tx_positions[k], deployment.rx_positions[l], elements,
                               two_links.params)
            assert G[l, k] == pytest.approx(effective_gain(h, phases), rel=1e-12)


class TestSimulateReceived:

    def test_matches_analytic_sinr(self):
        scenario = make_scenario([(2.0, 3.0), (7.0, 6.0)], [(3.0, 5.0), (8.0, 4.0)],
                                 [bottom_array(8)], noise_power=1e-6)
        phases = PhaseVector.zeros(8)
        G = gain_matrix(scenario_tensor(scenario), phases)
        results = simulate_received(scenario, phases, 100_000, seed=1)
        assert len(results) == 2
        for l, estimate in enumerate(results):
            assert estimate.symbols_used == 100_000
            # BPSK symbols have exactly unit power
            assert estimate.signal_power == pytest.approx(G[l, l], rel=1e-12)
            assert estimate.noise_power == pytest.approx(1e-6, rel=0.05)
            assert estimate.interference_power == pytest.approx(G[l, 1 - l], rel=0.05)

    def test_interferers_accumulate_separately(self):
        scenario = make_scenario([(1.0, 2.0), (5.0, 7.0), (8.0, 3.0)], [(2.0, 4.0), (6.0, 5.0), (9.0, 6.0)],
                                 [bottom_array(4)], noise_power=1e-6)
        phases = PhaseVector(phases=(0.5, -1.0, 2.0, 0.0))
        G = gain_matrix(scenario_tensor(scenario), phases)
        results = simulate_received(scenario, phases, 2000, seed=4)
        for l, estimate in enumerate(results):
            others = [k for k in range(3) if k != l]
            assert estimate.interference_power == pytest.approx(G[l, others].sum(), rel=1e-12)

    def test_seeded(self, two_links):
        phases = PhaseVector.zeros(2)
        first = simulate_received(two_links, phases, 1000, seed=9)
        assert first == simulate_received(two_links, phases, 1000, seed=9)
        assert first != simulate_received(two_links, phases, 1000, seed=10)

    def test_single_link_has_no_interference(self, single_link):
        (estimate,) = simulate_received(single_link, PhaseVector.zeros(4), 5000, seed=0)
        assert estimate.interference_power == 0.0

    def test_noiseless_single_link_is_infinite(self):
        scenario = make_scenario([(4.0, 3.0)], [(6.0, 3.0)], noise_power=0.0)
        (estimate,) = simulate_received(scenario, PhaseVector(), 10, seed=0)
        assert estimate.sinr == math.inf

    def test_needs_symbols(self, single_link):
        with pytest.raises(ValueError):
            simulate_received(single_link, PhaseVector.zeros(4), 0, seed=0)
