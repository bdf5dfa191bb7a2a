"""
Complex channel construction and link-level Monte-Carlo simulation.

A channel tensor H has shape (L, K, N+1) and is indexed [receiver l,
transmitter k, path m]. Entry m = 0 is the direct path with phase 0; entry
m = i is the path reflected on pooled element i, with amplitude d^-alpha and
phase k0 * (d_i - d_0).
"""
import math

import numpy as np
from loguru import logger

from .geometry import element_array, path_geometry, path_lengths
from .model import (
    SPEED_OF_LIGHT,
    ChannelVector,
    EmpiricalSINR,
    LinkParams,
    PhaseVector,
    Point2D,
    Scenario,
)


class DimensionError(ValueError):
    """Raised when a channel vector and steering vector differ in length."""


def wave_number(carrier_frequency: float) -> float:
    return 2 * math.pi * carrier_frequency / SPEED_OF_LIGHT


def channel_tensor(d: np.ndarray, params: LinkParams) -> np.ndarray:
    """Complex path gains for an (L, K, N+1) array of path lengths."""
    d = np.asarray(d, dtype=float)
    amplitude = d ** (-params.path_loss_exponent)
    theta = params.wave_number * (d - d[..., :1])
    theta[..., 0] = 0.0
    return amplitude * np.exp(1j * theta)


def scenario_tensor(scenario: Scenario) -> np.ndarray:
    """Channel tensor of every receiver/transmitter pair of a scenario."""
    d = path_lengths(
        scenario.deployment.tx_array(),
        scenario.deployment.rx_array(),
        element_array(scenario.layouts),
    )
    return channel_tensor(d, scenario.params)


def channel_vector(tx: Point2D, rx: Point2D, elements, params: LinkParams) -> ChannelVector:
    geometry = path_geometry(tx, rx, elements)
    d = np.concatenate(([geometry.d0], geometry.d_reflected))
    return ChannelVector(entries=channel_tensor(d, params))


def _as_entries(h) -> np.ndarray:
    if isinstance(h, ChannelVector):
        return h.entries
    return np.asarray(h, dtype=complex)


def _as_steering(v) -> np.ndarray:
    if isinstance(v, PhaseVector):
        return v.steering()
    return np.asarray(v, dtype=complex)


def effective_gain(h, v) -> float:
    """|h^H v|^2 for a channel vector and a phase (or steering) vector."""
    entries = _as_entries(h)
    steering = _as_steering(v)
    if entries.shape != steering.shape:
        raise DimensionError(
            f"channel has {entries.size} entries but steering vector has {steering.size}"
        )
    return float(abs(np.vdot(entries, steering)) ** 2)


def combined_gains(H: np.ndarray, v) -> np.ndarray:
    """Complex combined gain h_{l,k}^H v for every pair, shape (L, K)."""
    steering = _as_steering(v)
    if H.shape[-1] != steering.size:
        raise DimensionError(
            f"channel has {H.shape[-1]} paths but steering vector has {steering.size}"
        )
    return H.conj() @ steering


def gain_matrix(H: np.ndarray, v) -> np.ndarray:
    """Power gain G[l, k] = |h_{l,k}^H v|^2 for every pair."""
    return np.abs(combined_gains(H, v)) ** 2


def simulate_received(scenario: Scenario, phases: PhaseVector, n_symbols: int,
                      seed: int) -> list[EmpiricalSINR]:
    """
    Estimate signal, interference and noise power at every receiver from
    simulated BPSK symbol streams.

    Transmitter k draws its symbols from default_rng([seed, 0, k]) and
    receiver l draws its noise from default_rng([seed, 1, l]), so every
    stream is fixed by the seed regardless of link count or order.
    """
    if n_symbols < 1:
        raise ValueError(f"n_symbols must be at least 1, got {n_symbols}")
    params = scenario.params
    L = scenario.pairs
    if L == 0:
        return []
    g = combined_gains(scenario_tensor(scenario), phases)

    amplitude = math.sqrt(params.tx_power)
    symbols = np.stack([
        amplitude * (2.0 * np.random.default_rng([seed, 0, k]).integers(0, 2, n_symbols) - 1.0)
        for k in range(L)
    ])

    results = []
    for l in range(L):
        signal = g[l, l] * symbols[l]
        others = [k for k in range(L) if k != l]
        rng = np.random.default_rng([seed, 1, l])
        noise = math.sqrt(params.noise_power / 2) * (
            rng.standard_normal(n_symbols) + 1j * rng.standard_normal(n_symbols)
        )
        signal_power = float(np.mean(np.abs(signal) ** 2))
        # Per-interferer powers, summed; no cross terms between interferers
        interference_power = float(sum(
            np.mean(np.abs(g[l, k] * symbols[k]) ** 2) for k in others
        ))
        noise_power = float(np.mean(np.abs(noise) ** 2))
        denominator = interference_power + noise_power
        sinr = signal_power / denominator if denominator > 0 else math.inf
        results.append(EmpiricalSINR(
            signal_power=signal_power,
            interference_power=interference_power,
            noise_power=noise_power,
            sinr=sinr,
            symbols_used=n_symbols,
        ))
    logger.debug(f"simulated {n_symbols} symbols on {L} link(s) with seed {seed}")
    return results
