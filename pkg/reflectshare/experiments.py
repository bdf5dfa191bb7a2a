"""
Experiment configuration and sweeps.

Experiment files are UTF-8 text with one `key = value` per line; `#` starts
a comment. Values are given in the units users think in (dBm, dB, meters)
and converted to linear units when the scenario is built. See docs/CLI.md
for the key reference.
"""
import io
import math
import sys
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, TextIO

import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .capacity import BoundInvalid, transport_capacity, upper_bound
from .geometry import distance_extremes, midpoint_layouts, status_rank
from .log import StageTimer
from .model import (
    DEFAULT_CARRIER_HZ,
    DEFAULT_ELEMENT_SPACING,
    ArrayLayout,
    CapacityReport,
    Deployment,
    LinkParams,
    PhaseSearchConfig,
    PhaseVector,
    PlacementSearchConfig,
    Point2D,
    Room,
    Scenario,
    SweepRow,
)
from .optimizer import Objective, optimize_phases, search_placements
from .settings import get_settings
from .utils import db_to_linear, dbm_to_mw, format_point_list, parse_point_list

REQUIRED_KEYS = ('edge_length', 'grid_divisions', 'pairs')

SweepAxis = Literal['pairs', 'edge', 'elements', 'arrays']

# Column name of the swept value in CSV output
AXIS_COLUMNS = {
    'pairs': 'pairs',
    'edge': 'edge_length',
    'elements': 'elements_per_array',
    'arrays': 'arrays',
}


class ConfigSyntaxError(ValueError):
    """Raised for a line that is not `key = value`."""
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ConfigError(ValueError):
    """Raised for an unknown, missing or invalid configuration key."""
    def __init__(self, message: str, key: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class ExperimentConfig(BaseModel):
    """A parsed experiment file, in the units it was written in"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    edge_length: float = Field(gt=0)
    grid_divisions: int = Field(ge=1)
    pairs: int = Field(ge=1)
    arrays: int = Field(default=1, ge=0, le=4)
    elements_per_array: int = Field(default=48, ge=0)
    element_spacing: float = Field(default=DEFAULT_ELEMENT_SPACING, gt=0)
    carrier_hz: float = Field(default=DEFAULT_CARRIER_HZ, gt=0)
    path_loss_exponent: float = Field(default=3.0, ge=0)
    tx_power_dbm: float = 0.0
    noise_dbm: float = -90.0
    beta_db: float = 5.0
    rate: float = Field(default=1e5, gt=0)
    d_min: Optional[float] = Field(default=None, gt=0)
    d_max: Optional[float] = Field(default=None, gt=0)
    sweep_axis: SweepAxis = 'pairs'
    sweep_values: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0)
    objective: Literal['transport_capacity', 'min_sinr'] = 'transport_capacity'
    phase_method: Literal['coordinate_ascent', 'exhaustive'] = 'coordinate_ascent'
    phase_levels: int = Field(default=360, ge=1)
    max_sweeps: int = Field(default=20, ge=1)
    convergence_tol: float = Field(default=1e-9, ge=0)
    restarts: int = Field(default=0, ge=0)
    placement_mode: Literal['exhaustive', 'randomized'] = 'randomized'
    sample_budget: int = Field(default=200, ge=1)
    exhaustive_cap: Optional[int] = Field(default=None, ge=1)
    workers: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0)
    symbols: int = Field(default=100_000, ge=1)
    tx_positions: Optional[tuple[tuple[float, float], ...]] = None
    rx_positions: Optional[tuple[tuple[float, float], ...]] = None
    output: Optional[str] = None

    @field_validator('sweep_values', mode='before')
    @classmethod
    def split_values(cls, v):
        if isinstance(v, str):
            return tuple(float(item) for item in v.split(',') if item.strip())
        return v

    @field_validator('tx_positions', 'rx_positions', mode='before')
    @classmethod
    def split_points(cls, v):
        if isinstance(v, str):
            return tuple(parse_point_list(v))
        return v

    @model_validator(mode='after')
    def validate_config(self):
        if not self.sweep_values:
            raise ConfigError("sweep range must not be empty", 'sweep_values')
        lowest = {'pairs': 1, 'elements': 0, 'arrays': 0}
        for value in self.sweep_values:
            if not math.isfinite(value):
                raise ConfigError(f"values must be finite, got {value}", 'sweep_values')
            if self.sweep_axis == 'edge':
                if not value > 0:
                    raise ConfigError(f"edge lengths must be positive, got {value}", 'sweep_values')
            elif value != int(value) or value < lowest[self.sweep_axis]:
                raise ConfigError(
                    f"{self.sweep_axis} values must be integers of at least "
                    f"{lowest[self.sweep_axis]}, got {value}",
                    'sweep_values',
                )
        if self.d_min is not None and self.d_max is not None and self.d_min >= self.d_max:
            raise ConfigError(f"must be below d_max ({self.d_max})", 'd_min')
        if (self.tx_positions is None) != (self.rx_positions is None):
            raise ConfigError("tx_positions and rx_positions must be given together", 'tx_positions')
        if self.tx_positions is not None and len(self.tx_positions) != len(self.rx_positions):
            raise ConfigError("needs as many transmitters as receivers", 'rx_positions')
        return self

    def link_params(self) -> LinkParams:
        return LinkParams(
            carrier_frequency=self.carrier_hz,
            path_loss_exponent=self.path_loss_exponent,
            tx_power=dbm_to_mw(self.tx_power_dbm),
            noise_power=dbm_to_mw(self.noise_dbm),
            sinr_threshold=db_to_linear(self.beta_db),
            rate=self.rate,
        )

    def phase_config(self) -> PhaseSearchConfig:
        return PhaseSearchConfig(
            method=self.phase_method,
            phase_step=2 * math.pi / self.phase_levels,
            max_sweeps=self.max_sweeps,
            convergence_tol=self.convergence_tol,
            restarts=self.restarts,
            seed=self.seed,
        )

    def placement_config(self, workers: Optional[int] = None) -> PlacementSearchConfig:
        return PlacementSearchConfig(
            mode=self.placement_mode,
            sample_budget=self.sample_budget,
            seed=self.seed,
            parallel_workers=workers or self.workers or get_settings().workers,
            exhaustive_cap=self.exhaustive_cap,
        )

    def at(self, value: float) -> "ExperimentConfig":
        """This config with the sweep axis set to `value`."""
        field = AXIS_COLUMNS[self.sweep_axis]
        update = {field: value if self.sweep_axis == 'edge' else int(value)}
        return self.model_copy(update=update)

    def room(self) -> Room:
        return Room(edge_length=self.edge_length, grid_divisions=self.grid_divisions)

    def layouts(self) -> tuple[ArrayLayout, ...]:
        if self.arrays == 0 or self.elements_per_array == 0:
            return ()
        return midpoint_layouts(self.room(), self.arrays, self.elements_per_array, self.element_spacing)

    def element_count(self) -> int:
        return len(self.layouts()) * self.elements_per_array


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate the `key = value` experiment format."""
    values: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigSyntaxError(f"expected 'key = value' but got '{raw.strip()}'", number)
        if not key.isidentifier() or key != key.lower():
            raise ConfigSyntaxError(f"'{key}' is not a snake_case key", number)
        if key not in ExperimentConfig.model_fields:
            raise ConfigError("unknown key", key)
        if key in values:
            raise ConfigError(f"repeated on line {number}", key)
        values[key] = value

    for key in REQUIRED_KEYS:
        if key not in values:
            raise ConfigError("required key is missing", key)

    try:
        config = ExperimentConfig(**values)
    except ConfigError:
        raise
    except ValidationError as e:
        error = e.errors()[0]
        key = str(error['loc'][0]) if error['loc'] else 'config'
        cause = error.get('ctx', {}).get('error')
        if isinstance(cause, ConfigError):
            raise cause from e
        raise ConfigError(error['msg'], key) from e
    except ValueError as e:
        raise ConfigError(str(e), 'config') from e

    try:
        config.link_params()
        for value in config.sweep_values:
            config.at(value).layouts()
    except ValueError as e:
        raise ConfigError(str(e), 'arrays') from e
    logger.trace(f"parsed experiment config: {config.model_dump()}")
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}", 'config') from e
    return parse_config(text)


def load_packaged_config(name: str) -> ExperimentConfig:
    """Load one of the configs shipped in reflectshare/configs."""
    return parse_config(resources.files('reflectshare.configs').joinpath(name).read_text(encoding='utf-8'))


def _format_value(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple) and value and isinstance(value[0], tuple):
        return format_point_list(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def serialize_config(config: ExperimentConfig) -> str:
    """Write a config back in the `key = value` format; parse_config reverses it."""
    lines = []
    for key in ExperimentConfig.model_fields:
        value = getattr(config, key)
        if value is None:
            continue
        lines.append(f"{key} = {_format_value(value)}")
    return "\n".join(lines) + "\n"


def _bound_or_none(params: LinkParams, pairs: int, elements: int,
                   d_min: float, d_max: float) -> Optional[float]:
    try:
        return upper_bound(params, pairs, elements, d_min, d_max)
    except BoundInvalid as e:
        logger.warning(f"upper bound invalid: {e}")
        return None


def run_upper_bound_sweep(config: ExperimentConfig, baseline: bool = False) -> list[SweepRow]:
    """Closed-form bound at every sweep value; vacuous bounds are left empty."""
    rows = []
    for value in config.sweep_values:
        point = config.at(value)
        with StageTimer(f"upper bound {config.sweep_axis}={value:g}", level="DEBUG") as timer:
            room = point.room()
            layouts = point.layouts()
            d_min, d_max = distance_extremes(room, layouts, point.d_min, point.d_max)
            params = point.link_params()
            bound = _bound_or_none(params, point.pairs, point.element_count(), d_min, d_max)
            no_array = _bound_or_none(params, point.pairs, 0, d_min, d_max) if baseline else None
        rows.append(SweepRow(
            sweep_value=value,
            upper_bound=bound,
            baseline_upper_bound=no_array,
            wall_time=timer.elapsed,
        ))
    return rows


def _log_array_positions(layouts: tuple[ArrayLayout, ...]):
    if layouts:
        centers = ", ".join(f"({l.center.x:g}, {l.center.y:g})" for l in layouts)
        logger.info(f"arrays at wall midpoints {centers}")


def run_achievable_sweep(config: ExperimentConfig, baseline: bool = False,
                         workers: Optional[int] = None) -> list[SweepRow]:
    """
    Placement search at every sweep value, next to the closed-form bound.

    Every sweep value uses the same seed, so randomized searches at
    different values draw their candidates the same way.
    """
    rows = []
    phase_config = config.phase_config()
    placement_config = config.placement_config(workers)
    for value in config.sweep_values:
        point = config.at(value)
        room = point.room()
        layouts = point.layouts()
        _log_array_positions(layouts)
        params = point.link_params()
        with StageTimer(f"achievable {config.sweep_axis}={value:g}") as timer:
            result = search_placements(room, layouts, point.pairs, params, phase_config, placement_config)
            no_array = None
            if baseline:
                no_array = search_placements(
                    room, (), point.pairs, params, phase_config, placement_config
                ).best_capacity
        d_min, d_max = distance_extremes(room, layouts, point.d_min, point.d_max)
        bound = _bound_or_none(params, point.pairs, point.element_count(), d_min, d_max)
        if bound is not None and result.best_capacity > bound:
            logger.warning(
                f"{config.sweep_axis}={value:g}: achievable {result.best_capacity:.6g} "
                f"exceeds the closed-form bound {bound:.6g}"
            )
        rows.append(SweepRow(
            sweep_value=value,
            upper_bound=bound,
            achievable=result.best_capacity,
            baseline_achievable=no_array,
            statuses_evaluated=result.statuses_evaluated,
            wall_time=timer.elapsed,
        ))
    return rows


class PhaseOptimization(BaseModel):
    """Phases found for an explicit deployment, with the capacity report before and after"""
    scenario: Scenario
    phases: PhaseVector
    objective_value: float
    baseline: CapacityReport
    report: CapacityReport
    status_rank: Optional[int] = Field(
        default=None, description="Placement-search rank of the deployment, when it lies on the grid"
    )


def config_scenario(config: ExperimentConfig) -> Scenario:
    """Scenario for the explicit deployment named by tx_positions / rx_positions."""
    if config.tx_positions is None:
        raise ConfigError("an explicit deployment is required", 'tx_positions')
    try:
        deployment = Deployment(
            tx_positions=tuple(Point2D(x=x, y=y) for x, y in config.tx_positions),
            rx_positions=tuple(Point2D(x=x, y=y) for x, y in config.rx_positions),
        )
    except ValidationError as e:
        raise ConfigError(e.errors()[0]['msg'], 'tx_positions') from e
    return Scenario(
        room=config.room(),
        layouts=config.layouts(),
        deployment=deployment,
        params=config.link_params(),
    )


def run_phase_optimization(config: ExperimentConfig) -> PhaseOptimization:
    scenario = config_scenario(config)
    rank = None
    if scenario.deployment.on_grid(scenario.room):
        rank = status_rank(scenario.room, scenario.deployment)
        logger.info(f"deployment is placement status {rank} of the grid search")
    with StageTimer(f"phase optimization ({config.objective})"):
        phases, value = optimize_phases(scenario, Objective(config.objective), config.phase_config())
    return PhaseOptimization(
        scenario=scenario,
        phases=phases,
        objective_value=value,
        baseline=transport_capacity(scenario, PhaseVector.zeros(scenario.element_count)),
        report=transport_capacity(scenario, phases),
        status_rank=rank,
    )


def sweep_frame(rows: list[SweepRow], axis: str, baseline: bool = False,
                timing: bool = False, achievable: bool = True) -> pd.DataFrame:
    """One CSV-ready row per sweep value; missing bounds stay empty (NaN)."""
    records = []
    for row in rows:
        record = {AXIS_COLUMNS[axis]: row.sweep_value, 'upper_bound': row.upper_bound}
        if baseline:
            record['baseline_upper_bound'] = row.baseline_upper_bound
        if achievable:
            record['achievable'] = row.achievable
            if baseline:
                record['baseline_achievable'] = row.baseline_achievable
            record['gap'] = row.gap
            record['statuses_evaluated'] = row.statuses_evaluated
        if timing:
            record['wall_time'] = row.wall_time
        records.append(record)
    frame = pd.DataFrame.from_records(records)
    if 'statuses_evaluated' in frame:
        frame['statuses_evaluated'] = frame['statuses_evaluated'].astype('Int64')
    return frame


def phase_frame(result: PhaseOptimization) -> pd.DataFrame:
    """Per-link SINR before and after optimization."""
    deployment = result.scenario.deployment
    records = []
    for l in range(deployment.pairs):
        tx, rx = deployment.tx_positions[l], deployment.rx_positions[l]
        records.append({
            'link': l,
            'tx_x': tx.x, 'tx_y': tx.y,
            'rx_x': rx.x, 'rx_y': rx.y,
            'baseline_sinr': result.baseline.per_link_sinr[l],
            'sinr': result.report.per_link_sinr[l],
            'distance_bound': result.report.per_link_bound[l],
            'transport_capacity': result.report.transport_capacity,
        })
    return pd.DataFrame.from_records(records)


def phases_frame(phases: PhaseVector) -> pd.DataFrame:
    return pd.DataFrame({'element': range(len(phases)), 'phase': list(phases.phases)})


def write_csv(frame: pd.DataFrame, out: Optional[str | Path] = None,
              stream: Optional[TextIO] = None) -> str:
    """
    Render a frame as CSV (17 significant digits, `\\n` line endings, empty
    values as INVALID) and write it to `out`, or to `stream` / stdout.
    """
    digits = get_settings().csv_float_digits
    buffer = io.StringIO()
    frame.to_csv(
        buffer,
        index=False,
        float_format=f"%.{digits}g",
        na_rep="INVALID",
        lineterminator="\n",
    )
    text = buffer.getvalue()
    if out is not None:
        Path(out).write_text(text, encoding='utf-8', newline='')
        logger.info(f"wrote {len(frame)} row(s) to {out}")
    else:
        (stream or sys.stdout).write(text)
    return text
