"""Cross-module property checks.

Each check builds its own seeded scenarios, evaluates one property across
modules and reports pass/fail with the first counterexample it found.

To add a new check:
  1. Subclass PropertyCheck
  2. Give it a `name` and implement run(options)
  3. Register it by adding an instance to the PROPERTY_CHECKS list below
"""

import cmath
import itertools
import math
from abc import ABC, abstractmethod
from typing import Any, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from .capacity import bound_terms, sinr_all, upper_bound
from .channel import gain_matrix, scenario_tensor, simulate_received
from .geometry import distance_extremes, element_array, path_lengths
from .log import StageTimer
from .model import (
    ArrayLayout,
    Deployment,
    LinkParams,
    PhaseSearchConfig,
    PhaseVector,
    PlacementSearchConfig,
    Point2D,
    Room,
    Scenario,
    WallNormal,
)
from .optimizer import Objective, interference_cancellation_demo, optimize_phases, search_placements
from .utils import dbm_to_mw, linear_to_db, phase_distance


class ValidationOptions(BaseModel):
    seed: int = Field(default=0, ge=0)
    mc_tolerance_db: float = Field(default=0.2, ge=0)
    symbols: int = Field(default=100_000, ge=1)


class PropertyResult(BaseModel):
    name: str
    passed: bool
    cases: int = Field(description="Number of cases checked")
    detail: str = ""
    counterexample: Optional[dict[str, Any]] = None


class ValidationReport(BaseModel):
    seed: int
    symbols: int = Field(description="Monte-Carlo symbols per scenario")
    passed: bool
    results: list[PropertyResult]


class PropertyCheck(ABC):
    """Base class for one property of the validation suite."""
    name: str

    @abstractmethod
    def run(self, options: ValidationOptions) -> PropertyResult:
        """Check the property and return the outcome; never raise for a failed case."""

    def _result(self, cases: int, counterexample: Optional[dict] = None, detail: str = "") -> PropertyResult:
        return PropertyResult(
            name=self.name,
            passed=counterexample is None,
            cases=cases,
            detail=detail,
            counterexample=counterexample,
        )


def _point_dump(points) -> list[list[float]]:
    return [[p.x, p.y] for p in points]


def random_scenario(rng: np.random.Generator, pairs: int, elements: int,
                    params: LinkParams, edge_length: float = 10.0) -> Scenario:
    """Nodes uniform in the room interior, one array centered on the bottom wall."""
    room = Room(edge_length=edge_length, grid_divisions=10)
    layouts = ()
    if elements:
        layouts = (ArrayLayout(
            center=Point2D(x=edge_length / 2, y=0.0),
            wall_normal=WallNormal.POS_Y,
            element_count=elements,
        ),)
    points = rng.uniform(0.5, edge_length - 0.5, size=(2 * pairs, 2))
    nodes = [Point2D(x=float(x), y=float(y)) for x, y in points]
    deployment = Deployment(tx_positions=tuple(nodes[:pairs]), rx_positions=tuple(nodes[pairs:]))
    return Scenario(room=room, layouts=layouts, deployment=deployment, params=params)


def random_phases(rng: np.random.Generator, n: int) -> PhaseVector:
    return PhaseVector.from_array(rng.uniform(-math.pi, math.pi, size=n))


def _scenario_dump(scenario: Scenario, phases: PhaseVector) -> dict:
    return {
        'tx': _point_dump(scenario.deployment.tx_positions),
        'rx': _point_dump(scenario.deployment.rx_positions),
        'elements': scenario.element_count,
        'phases': list(phases.phases),
    }


class InequalityChain(PropertyCheck):
    name = "inequality_chain"
    scenarios = 1000

    def run(self, options):
        rng = np.random.default_rng([options.seed, 100])
        params = LinkParams()
        cases = 0
        for _ in range(self.scenarios):
            scenario = random_scenario(rng, int(rng.integers(1, 5)), int(rng.integers(0, 17)), params)
            phases = random_phases(rng, scenario.element_count)
            for l in range(scenario.pairs):
                terms = bound_terms(scenario, phases, l)
                scale = max(abs(terms.interference), abs(terms.am_gm_bound), abs(terms.trig_bound), 1e-300)
                cases += 1
                if (terms.interference < terms.am_gm_bound - 1e-9 * scale
                        or terms.am_gm_bound < terms.trig_bound - 1e-9 * scale):
                    return self._result(cases, {**_scenario_dump(scenario, phases), 'link': l,
                                                **terms.model_dump()})
        return self._result(cases, detail=f"{cases} links in {self.scenarios} scenarios")


class MonteCarloSINR(PropertyCheck):
    name = "monte_carlo_sinr"
    scenarios = 20

    def run(self, options):
        rng = np.random.default_rng([options.seed, 200])
        params = LinkParams(noise_power=dbm_to_mw(-60.0))
        cases = 0
        worst = 0.0
        for k in range(self.scenarios):
            scenario = random_scenario(rng, 1 + k % 3, int(rng.integers(0, 9)), params)
            phases = random_phases(rng, scenario.element_count)
            analytic = sinr_all(scenario, phases)
            empirical = simulate_received(scenario, phases, options.symbols, options.seed + k)
            for l, estimate in enumerate(empirical):
                cases += 1
                error = abs(linear_to_db(estimate.sinr) - linear_to_db(float(analytic[l])))
                worst = max(worst, error)
                if not error <= options.mc_tolerance_db:
                    return self._result(cases, {
                        **_scenario_dump(scenario, phases), 'link': l,
                        'analytic_db': linear_to_db(float(analytic[l])),
                        'empirical_db': linear_to_db(estimate.sinr),
                        'tolerance_db': options.mc_tolerance_db,
                    })
        return self._result(cases, detail=f"largest deviation {worst:.4f} dB")


def alignment_tolerances(h: np.ndarray, phases: PhaseVector, step: float) -> np.ndarray:
    """
    Largest phase error each element may show after a converged ascent on one
    link: half a grid step plus the angle of the sum of every other path.
    """
    contributions = h.conj() * phases.steering()
    rest = contributions.sum() - contributions[1:]
    return step / 2 + np.abs(np.angle(rest))


class PhaseAlignment(PropertyCheck):
    name = "phase_alignment"
    element_counts = (4, 16, 48)

    def run(self, options):
        params = LinkParams()
        config = PhaseSearchConfig()
        step = config.phase_step
        cases = 0
        worst = 0.0
        for n in self.element_counts:
            scenario = Scenario(
                room=Room(edge_length=10.0, grid_divisions=10),
                layouts=(ArrayLayout(center=Point2D(x=5.0, y=0.0), wall_normal=WallNormal.POS_Y,
                                     element_count=n),),
                deployment=Deployment(tx_positions=(Point2D(x=4.0, y=3.0),),
                                      rx_positions=(Point2D(x=6.0, y=3.0),)),
                params=params,
            )
            phases, _ = optimize_phases(scenario, Objective.SINGLE_LINK_SINR, config)
            d = path_lengths(scenario.deployment.tx_array(), scenario.deployment.rx_array(),
                             element_array(scenario.layouts))[0, 0]
            amplitudes = d ** -params.path_loss_exponent
            coherent = float(np.sum(amplitudes)) ** 2
            H = scenario_tensor(scenario)
            tolerances = alignment_tolerances(H[0, 0], phases, step)
            gain = float(gain_matrix(H, phases)[0, 0])
            errors = phase_distance(phases.as_array(), params.wave_number * (d[1:] - d[0]))
            cases += 1
            largest = float(np.max(errors))
            worst = max(worst, largest / step)
            excess = errors - tolerances
            if float(np.max(excess)) > 1e-6 or gain < math.cos(largest) ** 2 * coherent * (1 - 1e-12):
                i = int(np.argmax(excess))
                return self._result(cases, {
                    'elements': n, 'gain': gain, 'coherent_gain': coherent,
                    'element': i, 'phase_error': float(errors[i]), 'tolerance': float(tolerances[i]),
                })
        return self._result(cases, detail=f"largest phase error {worst:.3f} steps")


def brute_force_min_sinr(H: np.ndarray, params: LinkParams, grid: Sequence[float]):
    """Joint grid search written with cmath; the first strict maximum wins."""
    L, _, paths = H.shape
    best_value, best_phases = -math.inf, None
    for phases in itertools.product(grid, repeat=paths - 1):
        steering = [1.0] + [cmath.exp(1j * p) for p in phases]
        gains = [[abs(sum(H[l, k, m].conjugate() * steering[m] for m in range(paths))) ** 2
                  for k in range(L)] for l in range(L)]
        values = []
        for l in range(L):
            interference = sum(gains[l][k] for k in range(L) if k != l)
            values.append(params.tx_power * gains[l][l] / (params.noise_power + params.tx_power * interference))
        if min(values) > best_value:
            best_value, best_phases = min(values), phases
    return best_value, best_phases


class ExhaustiveOracle(PropertyCheck):
    name = "exhaustive_oracle"
    scenarios = 10

    def run(self, options):
        rng = np.random.default_rng([options.seed, 300])
        params = LinkParams(noise_power=dbm_to_mw(-60.0))
        exhaustive = PhaseSearchConfig(method='exhaustive', phase_step=math.pi / 4)
        ascent = PhaseSearchConfig(phase_step=math.pi / 4, restarts=16, seed=options.seed)
        grid = list(exhaustive.grid())
        cases = 0
        for _ in range(self.scenarios):
            scenario = random_scenario(rng, 2, 2, params)
            phases, value = optimize_phases(scenario, Objective.MIN_SINR, exhaustive)
            oracle_value, oracle_phases = brute_force_min_sinr(scenario_tensor(scenario), params, grid)
            ascended, ascent_value = optimize_phases(scenario, Objective.MIN_SINR, ascent)
            cases += 1
            if (phases.phases != tuple(oracle_phases)
                    or not math.isclose(value, oracle_value, rel_tol=1e-12)
                    or ascent_value < 0.95 * value):
                return self._result(cases, {
                    **_scenario_dump(scenario, phases),
                    'value': value, 'oracle_value': oracle_value, 'oracle_phases': list(oracle_phases),
                    'ascent_value': ascent_value,
                })

        # Placement search on the 2 x 2 corner grid against all 12 ordered corner pairs
        room = Room(edge_length=10.0, grid_divisions=1)
        params = LinkParams(noise_power=dbm_to_mw(-90.0), sinr_threshold=1.0)
        result = search_placements(room, (), 1, params, PhaseSearchConfig(),
                                   PlacementSearchConfig(mode='exhaustive'))
        corners = [(x, y) for x in (0.0, 10.0) for y in (0.0, 10.0)]
        brute = 0.0
        for tx, rx in itertools.permutations(corners, 2):
            d = math.dist(tx, rx)
            if params.tx_power * d ** (-2 * params.path_loss_exponent) / params.noise_power >= params.sinr_threshold:
                brute = max(brute, params.rate * d ** params.path_loss_exponent)
        cases += 1
        if result.statuses_evaluated != 12 or not math.isclose(result.best_capacity, brute, rel_tol=1e-12):
            return self._result(cases, {
                'placement_capacity': result.best_capacity, 'brute_force_capacity': brute,
                'statuses_evaluated': result.statuses_evaluated,
            })
        return self._result(cases)


class BoundGap(PropertyCheck):
    """Achievable capacity never exceeds the closed-form bound without reflectors."""
    name = "bound_gap"

    def run(self, options):
        room = Room(edge_length=10.0, grid_divisions=2)
        params = LinkParams(noise_power=dbm_to_mw(-60.0))
        d_min, d_max = distance_extremes(room)
        cases = 0
        for pairs in (1, 2):
            bound = upper_bound(params, pairs, 0, d_min, d_max)
            result = search_placements(room, (), pairs, params, PhaseSearchConfig(),
                                       PlacementSearchConfig(mode='exhaustive'))
            cases += 1
            if result.best_capacity > bound:
                return self._result(cases, {
                    'pairs': pairs, 'achievable': result.best_capacity, 'upper_bound': bound,
                })
        return self._result(cases)


class CancellationDemo(PropertyCheck):
    name = "cancellation_demo"

    def run(self, options):
        result = interference_cancellation_demo(48)
        untouched = interference_cancellation_demo(0)
        if result.improvement_db < 20.0 or untouched.optimized_sinr_db != untouched.baseline_sinr_db:
            return self._result(2, {
                'baseline_db': result.baseline_sinr_db,
                'optimized_db': result.optimized_sinr_db,
                'no_array_baseline_db': untouched.baseline_sinr_db,
                'no_array_optimized_db': untouched.optimized_sinr_db,
            })
        return self._result(2, detail=f"improvement {result.improvement_db:.1f} dB")


# ---------------------------------------------------------------------------
# Property registry, run in order. Add new checks here.
# ---------------------------------------------------------------------------

PROPERTY_CHECKS: list[PropertyCheck] = [
    InequalityChain(),
    MonteCarloSINR(),
    PhaseAlignment(),
    ExhaustiveOracle(),
    BoundGap(),
    CancellationDemo(),
]


def property_names() -> list[str]:
    return [check.name for check in PROPERTY_CHECKS]


def run_validation_suite(seed: int = 0, properties: Optional[Sequence[str]] = None,
                         mc_tolerance_db: float = 0.2, symbols: int = 100_000) -> ValidationReport:
    """
    Run the selected property checks (all when `properties` is None, none
    when it is empty) and collect a pass/fail report.
    """
    options = ValidationOptions(seed=seed, mc_tolerance_db=mc_tolerance_db, symbols=symbols)
    selected = PROPERTY_CHECKS if properties is None else [
        check for check in PROPERTY_CHECKS if check.name in set(properties)
    ]
    unknown = set(properties or ()) - set(property_names())
    if unknown:
        raise ValueError(f"unknown properties: {', '.join(sorted(unknown))}")
    results = []
    for check in selected:
        with StageTimer(f"property {check.name}"):
            result = check.run(options)
        if not result.passed:
            logger.warning(f"property {check.name} failed: {result.counterexample}")
        results.append(result)
    return ValidationReport(seed=seed, symbols=symbols, passed=all(r.passed for r in results), results=results)
