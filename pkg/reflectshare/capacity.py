"""
SINR, feasibility, transport capacity and the closed-form capacity bounds.

Link indices are 0-based: link l pairs transmitter l with receiver l.
"""
import math
from typing import Optional

import numpy as np
from loguru import logger

from .channel import DimensionError, channel_tensor, gain_matrix
from .geometry import element_array, path_lengths
from .model import BoundTerms, CapacityReport, LinkParams, PhaseVector, Scenario

# 2 * sqrt(sqrt(2) + 2) = 4 cos(pi/8), the factor of the cosine-sum bound
_TRIG_FACTOR = 2.0 * math.sqrt(math.sqrt(2.0) + 2.0)


class BoundInvalid(ValueError):
    """Raised when the closed-form bound has a non-positive denominator."""
    def __init__(self, message: str, denominator: float):
        super().__init__(message)
        self.denominator = denominator


class LinkIndexError(IndexError):
    """Raised for a link index outside 0..L-1."""


def _check_link(scenario: Scenario, l: int):
    if not 0 <= l < scenario.pairs:
        raise LinkIndexError(f"link index {l} out of range for {scenario.pairs} link(s)")


def _scenario_lengths(scenario: Scenario) -> np.ndarray:
    return path_lengths(
        scenario.deployment.tx_array(),
        scenario.deployment.rx_array(),
        element_array(scenario.layouts),
    )


def sinr_from_gains(G: np.ndarray, params: LinkParams) -> np.ndarray:
    """
    SINR at every receiver from an (L, L) power-gain matrix.

    A zero denominator (no noise, no interference) gives inf, or 0 when the
    desired gain is also 0.
    """
    G = np.asarray(G, dtype=float)
    signal = params.tx_power * np.diagonal(G, axis1=-2, axis2=-1)
    interference = params.tx_power * (G.sum(axis=-1) - np.diagonal(G, axis1=-2, axis2=-1))
    denominator = params.noise_power + interference
    with np.errstate(divide='ignore', invalid='ignore'):
        values = signal / denominator
    values = np.where(denominator > 0, values, np.where(signal > 0, np.inf, 0.0))
    return values


def capacity_from_sinr(sinr_values: np.ndarray, direct_lengths: np.ndarray,
                       params: LinkParams) -> float:
    """R * sum(d_ll0^alpha) when every link meets the threshold, else 0."""
    if len(sinr_values) == 0:
        return 0.0
    if not np.all(np.asarray(sinr_values) >= params.sinr_threshold):
        return 0.0
    return params.rate * float(np.sum(np.asarray(direct_lengths) ** params.path_loss_exponent))


def sinr_all(scenario: Scenario, phases: PhaseVector) -> np.ndarray:
    if scenario.pairs == 0:
        return np.zeros(0)
    H = channel_tensor(_scenario_lengths(scenario), scenario.params)
    return sinr_from_gains(gain_matrix(H, phases), scenario.params)


def sinr(scenario: Scenario, phases: PhaseVector, l: int) -> float:
    """SINR of link l with the given phases."""
    _check_link(scenario, l)
    return float(sinr_all(scenario, phases)[l])


def transport_capacity(scenario: Scenario, phases: PhaseVector) -> CapacityReport:
    params = scenario.params
    if scenario.pairs == 0:
        return CapacityReport(per_link_sinr=[], feasible=True, transport_capacity=0.0, per_link_bound=[])
    d = _scenario_lengths(scenario)
    H = channel_tensor(d, params)
    values = sinr_from_gains(gain_matrix(H, phases), params)
    feasible = bool(np.all(values >= params.sinr_threshold))
    capacity = capacity_from_sinr(values, np.diagonal(d[:, :, 0]), params)
    bounds = [_link_distance_bound(d, phases, l, params) for l in range(scenario.pairs)]
    return CapacityReport(
        per_link_sinr=[float(v) for v in values],
        feasible=feasible,
        transport_capacity=capacity,
        per_link_bound=bounds,
    )


def _link_arrays(d: np.ndarray, phases: PhaseVector, params: LinkParams):
    """Amplitudes (L, L, N+1) and phase arguments x = k0 dd - phi (L, L, N)."""
    if len(phases) != d.shape[-1] - 1:
        raise DimensionError(f"{len(phases)} phases for {d.shape[-1] - 1} element(s)")
    amplitude = d ** (-params.path_loss_exponent)
    x = params.wave_number * (d[:, :, 1:] - d[:, :, :1]) - phases.as_array()
    return amplitude, x


def _bound_terms(d: np.ndarray, phases: PhaseVector, l: int, params: LinkParams) -> BoundTerms:
    amplitude, x = _link_arrays(d, phases, params)
    others = [k for k in range(d.shape[1]) if k != l]
    a0 = amplitude[l, others, 0]            # (K-1,)
    a = amplitude[l, others, 1:]            # (K-1, N)
    xk = x[l, others, :]                    # (K-1, N)
    cos_sum = np.sum(a * np.cos(xk), axis=-1)
    sin_sum = np.sum(a * np.sin(xk), axis=-1)
    interference = float(np.sum((a0 + cos_sum) ** 2 + sin_sum ** 2))
    am_gm = float(np.sum(
        a0 ** 2 + 2 * a0 * cos_sum + np.sum(a * np.sin(xk + math.pi / 4), axis=-1) ** 2
    ))
    trig = float(_TRIG_FACTOR * np.sum(a0[:, None] * a * np.cos(xk - math.pi / 8)))
    return BoundTerms(interference=interference, am_gm_bound=am_gm, trig_bound=trig, eta=params.eta)


def bound_terms(scenario: Scenario, phases: PhaseVector, l: int) -> BoundTerms:
    """Interference sum over the other links' transmitters at receiver l, and its lower bounds."""
    _check_link(scenario, l)
    return _bound_terms(_scenario_lengths(scenario), phases, l, scenario.params)


def _link_distance_bound(d: np.ndarray, phases: PhaseVector, l: int,
                         params: LinkParams) -> Optional[float]:
    terms = _bound_terms(d, phases, l, params)
    amplitude, x = _link_arrays(d, phases, params)
    eta = params.eta
    denominator = (
        math.sqrt(eta * params.noise_power / params.tx_power + eta * abs(terms.interference))
        - float(np.sum(amplitude[l, l, 1:] * np.cos(x[l, l, :])))
    )
    if denominator <= 0:
        return None
    return 1.0 / denominator


def link_distance_bound(scenario: Scenario, phases: PhaseVector, l: int) -> Optional[float]:
    """
    Largest d_ll0^alpha that link l can have while meeting the threshold,
    or None when the bound is vacuous (denominator <= 0).
    """
    _check_link(scenario, l)
    return _link_distance_bound(_scenario_lengths(scenario), phases, l, scenario.params)


def upper_bound(params: LinkParams, pairs: int, elements: int, d_min: float, d_max: float) -> float:
    """
    Closed-form transport capacity bound

        R L / (sqrt(eta s2/p2 + (sqrt(2) + 2) eta N L / d_max^(2 alpha)) - N / d_min^alpha)

    Raises BoundInvalid when the denominator is not positive.
    """
    if pairs < 1:
        raise ValueError(f"pairs must be at least 1, got {pairs}")
    if elements < 0:
        raise ValueError(f"element count must be non-negative, got {elements}")
    if not 0 < d_min < d_max:
        raise ValueError(f"need 0 < d_min < d_max, got d_min={d_min}, d_max={d_max}")
    eta = params.eta
    alpha = params.path_loss_exponent
    denominator = (
        math.sqrt(
            eta * params.noise_power / params.tx_power
            + (math.sqrt(2.0) + 2.0) * eta * elements * pairs / d_max ** (2 * alpha)
        )
        - elements / d_min ** alpha
    )
    if denominator <= 0:
        logger.debug(f"bound vacuous for L={pairs}, N={elements}: denominator {denominator:.6g}")
        raise BoundInvalid(
            f"bound denominator {denominator:.6g} is not positive for L={pairs}, N={elements}, "
            f"d_min={d_min}, d_max={d_max}",
            denominator,
        )
    return params.rate * pairs / denominator
