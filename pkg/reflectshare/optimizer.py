"""
Phase optimization and placement search.

Phases are searched on the uniform grid -pi, -pi + step, ..., pi - step,
either one element at a time (coordinate ascent) or over the joint grid for
a handful of elements. Placement search runs a phase search for every
candidate deployment and keeps the best transport capacity.

Transport capacity equals R * sum(d^alpha) when the smallest SINR reaches
the threshold and 0 otherwise, so it is a non-decreasing function of the
smallest SINR. Phase searches for that objective climb the smallest SINR
and report the capacity it yields.
"""
import itertools
import math
from enum import StrEnum
from typing import NamedTuple, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict

from .capacity import LinkIndexError, capacity_from_sinr, sinr_from_gains
from .channel import channel_tensor, gain_matrix
from .geometry import (
    DegenerateGeometryError,
    deployment_from_rank,
    element_array,
    enumerate_placements,
    path_lengths,
    placement_count,
    rank_space,
    sample_placements,
)
from .log import StageTimer
from .model import (
    ArrayLayout,
    Deployment,
    DemoResult,
    LinkParams,
    PhaseSearchConfig,
    PhaseVector,
    PlacementSearchConfig,
    Point2D,
    Room,
    Scenario,
    SearchResult,
    WallNormal,
)
from .settings import get_settings
from .utils import linear_to_db, mw_to_dbm
from .worker_pool import PlacementPool


class BudgetExceeded(RuntimeError):
    """Raised when an exhaustive search would exceed its configured size."""


class Objective(StrEnum):
    TRANSPORT_CAPACITY = "transport_capacity"
    MIN_SINR = "min_sinr"
    SINGLE_LINK_SINR = "single_link_sinr"


class AscentResult(NamedTuple):
    phases: np.ndarray
    score: float
    sweep_scores: list[float]


class _PhaseProblem:
    """Channel tensor and objective of one deployment."""

    def __init__(self, H: np.ndarray, direct_lengths: np.ndarray, params: LinkParams,
                 objective: Objective, link: int = 0):
        self.H = H
        self.Hc = H.conj()
        self.direct_lengths = direct_lengths
        self.params = params
        self.objective = Objective(objective)
        self.link = link
        self.elements = H.shape[-1] - 1
        if self.objective == Objective.SINGLE_LINK_SINR and not 0 <= link < H.shape[0]:
            raise LinkIndexError(f"link index {link} out of range for {H.shape[0]} link(s)")

    def score(self, G: np.ndarray) -> np.ndarray:
        """Search score for a batch of (..., L, L) gain matrices."""
        if G.shape[-1] == 0:
            return np.zeros(G.shape[:-2])
        values = sinr_from_gains(G, self.params)
        if self.objective == Objective.SINGLE_LINK_SINR:
            return values[..., self.link]
        return values.min(axis=-1)

    def value(self, phases: PhaseVector) -> float:
        """Reported objective value, evaluated from scratch."""
        if self.H.shape[0] == 0:
            return 0.0
        values = sinr_from_gains(gain_matrix(self.H, phases), self.params)
        if self.objective == Objective.TRANSPORT_CAPACITY:
            return capacity_from_sinr(values, self.direct_lengths, self.params)
        if self.objective == Objective.SINGLE_LINK_SINR:
            return float(values[self.link])
        return float(values.min())


def _steering(phases: np.ndarray) -> np.ndarray:
    v = np.empty(len(phases) + 1, dtype=complex)
    v[0] = 1.0
    v[1:] = np.exp(1j * phases)
    return v


def coordinate_ascent(problem: _PhaseProblem, grid: np.ndarray, initial: np.ndarray,
                      max_sweeps: int, convergence_tol: float) -> AscentResult:
    """
    Sweep elements in ascending order, moving each to the grid phase that
    maximizes the score with the others fixed. An element only moves on a
    strict improvement; among equal candidates the smallest phase wins.
    """
    phases = np.array(initial, dtype=float)
    v = _steering(phases)
    S = problem.Hc @ v
    current = float(problem.score(np.abs(S) ** 2))
    sweep_scores = [current]
    if problem.elements == 0 or not math.isfinite(current):
        return AscentResult(phases, current, sweep_scores)
    rotations = np.exp(1j * grid)
    for sweep in range(max_sweeps):
        start = current
        for m in range(1, problem.elements + 1):
            column = problem.Hc[:, :, m]
            candidates = (S - column * v[m])[None] + column[None] * rotations[:, None, None]
            scores = problem.score(np.abs(candidates) ** 2)
            best = int(np.argmax(scores))
            if scores[best] > current:
                phases[m - 1] = grid[best]
                v[m] = rotations[best]
                S = candidates[best]
                current = float(scores[best])
        # Resync the running sum to avoid drift
        S = problem.Hc @ v
        current = float(problem.score(np.abs(S) ** 2))
        sweep_scores.append(current)
        logger.trace(f"sweep {sweep + 1}: score {current:.9g}")
        if not math.isfinite(current):
            break
        if current - start <= convergence_tol * abs(start):
            break
    return AscentResult(phases, current, sweep_scores)


def exhaustive_phases(problem: _PhaseProblem, grid: np.ndarray) -> AscentResult:
    """Joint grid search; the first strict maximum in lexicographic order wins."""
    N = problem.elements
    max_elements = get_settings().exhaustive_phase_max_elements
    if N > max_elements:
        raise BudgetExceeded(
            f"exhaustive phase search supports at most {max_elements} elements, got {N}"
        )
    if N == 0:
        S = problem.Hc @ np.ones(1, dtype=complex)
        score = float(problem.score(np.abs(S) ** 2))
        return AscentResult(np.zeros(0), score, [score])
    rotations = np.exp(1j * grid)
    last = problem.Hc[:, :, N]
    best_score = -math.inf
    best = np.zeros(N)
    for leading in itertools.product(range(len(grid)), repeat=N - 1):
        lead_phases = grid[list(leading)]
        base = problem.Hc[:, :, :N] @ _steering(lead_phases)
        candidates = base[None] + last[None] * rotations[:, None, None]
        scores = problem.score(np.abs(candidates) ** 2)
        k = int(np.argmax(scores))
        if scores[k] > best_score:
            best_score = float(scores[k])
            best = np.append(lead_phases, grid[k])
    return AscentResult(best, best_score, [best_score])


def _is_better(value: float, score: float, phases: np.ndarray,
               best: Optional[tuple[float, float, np.ndarray]]) -> bool:
    if best is None:
        return True
    if (value, score) != (best[0], best[1]):
        return (value, score) > (best[0], best[1])
    return tuple(phases) < tuple(best[2])


def _search_phases(problem: _PhaseProblem, config: PhaseSearchConfig) -> tuple[PhaseVector, float]:
    grid = config.grid()
    if config.method == 'exhaustive':
        result = exhaustive_phases(problem, grid)
        vector = PhaseVector.from_array(result.phases)
        return vector, problem.value(vector)

    starts = [np.zeros(problem.elements)]
    rng = np.random.default_rng(config.seed)
    for _ in range(config.restarts):
        starts.append(grid[rng.integers(0, len(grid), problem.elements)])

    best: Optional[tuple[float, float, np.ndarray]] = None
    best_vector = PhaseVector.zeros(problem.elements)
    for i, initial in enumerate(starts):
        result = coordinate_ascent(problem, grid, initial, config.max_sweeps, config.convergence_tol)
        vector = PhaseVector.from_array(result.phases)
        value = problem.value(vector)
        if i:
            logger.trace(f"restart {i}: objective {value:.9g}")
        if _is_better(value, result.score, result.phases, best):
            best = (value, result.score, result.phases)
            best_vector = vector
    return best_vector, best[0]


def optimize_phases(scenario: Scenario, objective: Objective | str,
                    config: PhaseSearchConfig = PhaseSearchConfig(),
                    link: int = 0) -> tuple[PhaseVector, float]:
    """
    Search phases maximizing `objective` for a scenario. `link` selects the
    receiver for the single_link_sinr objective.

    Returns the phases and the objective value they achieve.
    """
    d = path_lengths(
        scenario.deployment.tx_array(),
        scenario.deployment.rx_array(),
        element_array(scenario.layouts),
    )
    problem = _PhaseProblem(
        channel_tensor(d, scenario.params),
        np.diagonal(d[:, :, 0]),
        scenario.params,
        Objective(objective),
        link,
    )
    return _search_phases(problem, config)


class SearchContext(BaseModel):
    """Everything a worker needs to evaluate placement statuses."""
    model_config = ConfigDict(frozen=True)

    room: Room
    layouts: tuple[ArrayLayout, ...]
    pairs: int
    params: LinkParams
    phase_config: PhaseSearchConfig


class StatusOutcome(NamedTuple):
    rank: int
    capacity: float
    phases: tuple[float, ...]
    valid: bool


def evaluate_status(context: SearchContext, elements: np.ndarray, rank: int,
                    deployment: Deployment) -> StatusOutcome:
    try:
        d = path_lengths(deployment.tx_array(), deployment.rx_array(), elements)
    except DegenerateGeometryError as e:
        logger.debug(f"status {rank} skipped: {e}")
        return StatusOutcome(rank, 0.0, (), False)
    problem = _PhaseProblem(
        channel_tensor(d, context.params),
        np.diagonal(d[:, :, 0]),
        context.params,
        Objective.TRANSPORT_CAPACITY,
    )
    phases, capacity = _search_phases(problem, context.phase_config)
    return StatusOutcome(rank, capacity, phases.phases, True)


def evaluate_batch(context: SearchContext, batch: range | Sequence[int]) -> list[StatusOutcome]:
    """
    Evaluate one batch of statuses. A range batch walks the loop nest over
    that rank range; a list batch names individual ranks.
    """
    elements = element_array(context.layouts, context.room)
    if isinstance(batch, range):
        statuses = enumerate_placements(context.room, context.pairs, batch.start, batch.stop)
    else:
        statuses = ((rank, deployment_from_rank(context.room, context.pairs, rank)) for rank in batch)
    return [evaluate_status(context, elements, rank, deployment) for rank, deployment in statuses]


def _batches(total_ranks: int, ranks: Optional[list[int]], workers: int):
    count = workers * 4 if workers > 1 else 1
    if ranks is None:
        size = max(1, -(-total_ranks // count))
        return [range(start, min(start + size, total_ranks)) for start in range(0, total_ranks, size)]
    size = max(1, -(-len(ranks) // count))
    return [ranks[i:i + size] for i in range(0, len(ranks), size)]


def search_placements(room: Room, layouts: Sequence[ArrayLayout], pairs: int, params: LinkParams,
                      phase_config: PhaseSearchConfig = PhaseSearchConfig(),
                      placement_config: PlacementSearchConfig = PlacementSearchConfig()) -> SearchResult:
    """
    Best transport capacity over node placements, each with its own
    optimized phases.

    The result does not depend on the worker count: ties between statuses
    go to the smallest status rank.
    """
    total = placement_count(room, pairs)
    layouts = tuple(layouts)
    elements = len(element_array(layouts, room))
    max_phase_elements = get_settings().exhaustive_phase_max_elements
    if phase_config.method == 'exhaustive' and elements > max_phase_elements:
        raise BudgetExceeded(
            f"exhaustive phase search supports at most {max_phase_elements} elements, got {elements}"
        )
    if placement_config.mode == 'exhaustive':
        cap = placement_config.exhaustive_cap or get_settings().exhaustive_cap
        if total > cap:
            raise BudgetExceeded(
                f"exhaustive placement search needs {total} statuses, above the cap of {cap}; "
                f"use randomized mode with a sample budget"
            )
        ranks = None
    else:
        ranks = sorted(rank for rank, _ in sample_placements(
            room, pairs, placement_config.sample_budget, placement_config.seed))

    context = SearchContext(
        room=room, layouts=layouts, pairs=pairs, params=params, phase_config=phase_config,
    )
    workers = placement_config.parallel_workers
    batches = _batches(rank_space(room, pairs), ranks, workers)
    logger.info(
        f"searching {total if ranks is None else len(ranks)} placement(s) of {pairs} pair(s) "
        f"with {elements} element(s) on {workers} worker(s)"
    )

    outcomes: list[StatusOutcome] = []
    with StageTimer(f"placement search L={pairs}", level="DEBUG"):
        with PlacementPool(workers) as pool:
            for batch_outcomes in pool.map(evaluate_batch, context, batches):
                outcomes.extend(batch_outcomes)

    outcomes.sort(key=lambda o: o.rank)
    best: Optional[StatusOutcome] = None
    for outcome in outcomes:
        if not outcome.valid:
            continue
        if best is None or outcome.capacity > best.capacity:
            best = outcome
    if best is None:
        raise DegenerateGeometryError("every candidate placement touches a reflector element")

    return SearchResult(
        best_capacity=best.capacity,
        best_deployment=deployment_from_rank(room, pairs, best.rank),
        best_phases=PhaseVector(phases=best.phases),
        statuses_evaluated=len(outcomes),
        objective_trace=[(o.rank, o.capacity) for o in outcomes],
    )


def cancellation_scenario(element_count: int = 48,
                          params: Optional[LinkParams] = None) -> Scenario:
    """
    Bench-scale scene with two transmitters 0.6 m either side of a receiver
    that sits 0.6 m in front of a wall-mounted array. The second
    transmitter's own receiver is further along the same line.
    """
    if params is None:
        params = LinkParams(path_loss_exponent=2.0)
    room = Room(edge_length=4.0, grid_divisions=20)
    layouts = ()
    if element_count:
        layouts = (ArrayLayout(
            center=Point2D(x=2.0, y=0.0),
            wall_normal=WallNormal.POS_Y,
            element_count=element_count,
        ),)
    deployment = Deployment(
        tx_positions=(Point2D(x=1.4, y=0.6), Point2D(x=2.6, y=0.6)),
        rx_positions=(Point2D(x=2.0, y=0.6), Point2D(x=3.2, y=0.6)),
    )
    return Scenario(room=room, layouts=layouts, deployment=deployment, params=params)


def interference_cancellation_demo(element_count: int = 48,
                                   phase_config: PhaseSearchConfig = PhaseSearchConfig(),
                                   params: Optional[LinkParams] = None) -> DemoResult:
    """
    Tune the array to favour transmitter 0 over transmitter 1 at receiver 0
    and report the SINR and received powers before and after.
    """
    scenario = cancellation_scenario(element_count, params)
    params = scenario.params
    H = channel_tensor(
        path_lengths(scenario.deployment.tx_array(), scenario.deployment.rx_array(),
                     element_array(scenario.layouts)),
        params,
    )
    zero = PhaseVector.zeros(scenario.element_count)
    optimized, _ = optimize_phases(scenario, Objective.SINGLE_LINK_SINR, phase_config, link=0)

    def link_zero(phases: PhaseVector) -> tuple[float, float, float]:
        G = gain_matrix(H, phases)
        sinr_value = float(sinr_from_gains(G, params)[0])
        return sinr_value, params.tx_power * G[0, 0], params.tx_power * G[0, 1]

    sinr_before, desired_before, interference_before = link_zero(zero)
    sinr_after, desired_after, interference_after = link_zero(optimized)
    result = DemoResult(
        element_count=scenario.element_count,
        baseline_sinr_db=linear_to_db(sinr_before),
        optimized_sinr_db=linear_to_db(sinr_after),
        desired_power_dbm_before=mw_to_dbm(desired_before),
        desired_power_dbm_after=mw_to_dbm(desired_after),
        interference_power_dbm_before=mw_to_dbm(interference_before),
        interference_power_dbm_after=mw_to_dbm(interference_after),
        phases=optimized,
    )
    logger.info(
        f"cancellation with {scenario.element_count} element(s): SINR "
        f"{result.baseline_sinr_db:.2f} dB -> {result.optimized_sinr_db:.2f} dB"
    )
    return result
