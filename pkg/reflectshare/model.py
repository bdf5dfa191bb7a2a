import math
from enum import StrEnum
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Propagation speed used to derive the wave number. 3e8 keeps the default
# element spacing (0.0625 m) exactly half a wavelength at 2.4 GHz.
SPEED_OF_LIGHT = 3.0e8

DEFAULT_CARRIER_HZ = 2.4e9
DEFAULT_ELEMENT_SPACING = SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ / 2


class Point2D(BaseModel):
    """A position in the room plane, in meters"""
    model_config = ConfigDict(frozen=True)

    x: float = Field(description="x coordinate in meters")
    y: float = Field(description="y coordinate in meters")

    @field_validator('x', 'y')
    @classmethod
    def validate_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError('coordinates must be finite')
        return v

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


class Room(BaseModel):
    """A square D x D room divided into an M x M grid of node positions"""
    model_config = ConfigDict(frozen=True)

    edge_length: float = Field(
        description="Edge length D of the square room, in meters",
        gt=0
    )
    grid_divisions: int = Field(
        description="Number of grid divisions M per edge; grid points include both walls",
        ge=1
    )

    @property
    def grid_spacing(self) -> float:
        return self.edge_length / self.grid_divisions

    @property
    def grid_points_per_axis(self) -> int:
        return self.grid_divisions + 1

    def grid_axis(self) -> np.ndarray:
        """Grid coordinates along one axis, 0 and D included."""
        return np.linspace(0.0, self.edge_length, self.grid_divisions + 1)


class WallNormal(StrEnum):
    """Direction pointing from the wall an array is mounted on into the room"""
    POS_X = "+x"
    NEG_X = "-x"
    POS_Y = "+y"
    NEG_Y = "-y"

    @property
    def wall_axis(self) -> int:
        """Index of the coordinate that varies along the wall (0 for x, 1 for y)."""
        return 0 if self in (WallNormal.POS_Y, WallNormal.NEG_Y) else 1


class ArrayLayout(BaseModel):
    """A reflect-array flattened to a line of elements along one wall"""
    model_config = ConfigDict(frozen=True)

    center: Point2D = Field(
        description="Center of the array on its wall"
    )
    wall_normal: WallNormal = Field(
        description="Unit direction from the wall into the room"
    )
    element_count: int = Field(
        description="Number of reflector elements N_j",
        ge=1
    )
    element_spacing: float = Field(
        description="Distance between adjacent elements, in meters",
        default=DEFAULT_ELEMENT_SPACING,
        gt=0
    )

    @property
    def span(self) -> float:
        return (self.element_count - 1) * self.element_spacing


class Deployment(BaseModel):
    """One placement status: L transmitters and their L receivers"""
    model_config = ConfigDict(frozen=True)

    tx_positions: Tuple[Point2D, ...] = Field(
        description="Transmitter positions, slot order tx_1..tx_L"
    )
    rx_positions: Tuple[Point2D, ...] = Field(
        description="Receiver positions, slot order rx_1..rx_L; rx_l is served by tx_l"
    )

    @model_validator(mode='after')
    def validate_positions(self):
        if len(self.tx_positions) != len(self.rx_positions):
            raise ValueError(
                f"{len(self.tx_positions)} transmitters but {len(self.rx_positions)} receivers"
            )
        points = [p.as_tuple() for p in (*self.tx_positions, *self.rx_positions)]
        if len(set(points)) != len(points):
            raise ValueError("node positions must be pairwise distinct")
        return self

    @property
    def pairs(self) -> int:
        return len(self.tx_positions)

    def tx_array(self) -> np.ndarray:
        return np.array([p.as_tuple() for p in self.tx_positions], dtype=float).reshape(-1, 2)

    def rx_array(self) -> np.ndarray:
        return np.array([p.as_tuple() for p in self.rx_positions], dtype=float).reshape(-1, 2)

    def on_grid(self, room: Room, tol: float = 1e-9) -> bool:
        """True when every node sits on a grid intersection of the room."""
        step = room.grid_spacing
        for p in (*self.tx_positions, *self.rx_positions):
            for value in (p.x, p.y):
                k = round(value / step)
                if k < 0 or k > room.grid_divisions or abs(k * step - value) > tol:
                    return False
        return True


class PathGeometry(BaseModel):
    """Direct and reflected path lengths for one transmitter/receiver pair"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    d0: float = Field(description="Direct path length in meters", gt=0)
    d_reflected: np.ndarray = Field(description="Path length via each pooled element, in meters")
    delta_d: np.ndarray = Field(description="Excess length of each reflected path over the direct path")


class LinkParams(BaseModel):
    """Link budget shared by every transmitter and receiver, in linear units"""
    model_config = ConfigDict(frozen=True)

    carrier_frequency: float = Field(
        description="Carrier frequency f_c in hertz",
        default=DEFAULT_CARRIER_HZ,
        gt=0
    )
    wave_number: Optional[float] = Field(
        description="Wave number k0 = 2 pi f_c / c in rad/m; derived from f_c when omitted",
        default=None
    )
    path_loss_exponent: float = Field(
        description="Amplitude decay exponent alpha, a = d^-alpha",
        default=3.0,
        ge=0
    )
    tx_power: float = Field(
        description="Transmit symbol power rho^2 in milliwatts",
        default=1.0,
        gt=0
    )
    noise_power: float = Field(
        description="Receiver noise power sigma^2 in milliwatts; 0 disables noise",
        default=1e-9,
        ge=0
    )
    sinr_threshold: float = Field(
        description="Linear SINR threshold beta for a feasible link",
        default=10 ** 0.5,
        gt=0
    )
    rate: float = Field(
        description="Per-link data rate R in bits/second",
        default=1e5,
        gt=0
    )

    @model_validator(mode='after')
    def derive_wave_number(self):
        expected = 2 * math.pi * self.carrier_frequency / SPEED_OF_LIGHT
        if self.wave_number is None:
            object.__setattr__(self, 'wave_number', expected)
        elif abs(self.wave_number - expected) > 1e-9 * expected:
            raise ValueError(
                f"wave_number {self.wave_number} inconsistent with carrier_frequency "
                f"{self.carrier_frequency} (expected {expected})"
            )
        return self

    @property
    def eta(self) -> float:
        """(beta + 1) / beta"""
        return (self.sinr_threshold + 1) / self.sinr_threshold


class ChannelVector(BaseModel):
    """Complex path gains of the direct path (entry 0) and each pooled element"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    entries: np.ndarray = Field(description="N+1 complex amplitudes a e^{j theta}")

    def __len__(self) -> int:
        return len(self.entries)


class PhaseVector(BaseModel):
    """Controllable phase of every pooled element"""
    model_config = ConfigDict(frozen=True)

    phases: Tuple[float, ...] = Field(
        description="Per-element phase in radians, within [-pi, pi]",
        default=()
    )

    @field_validator('phases')
    @classmethod
    def validate_range(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        for phase in v:
            if not (-math.pi - 1e-12 <= phase <= math.pi + 1e-12):
                raise ValueError(f"phase {phase} outside [-pi, pi]")
        return v

    @classmethod
    def zeros(cls, n: int) -> "PhaseVector":
        return cls(phases=(0.0,) * n)

    @classmethod
    def from_array(cls, phases) -> "PhaseVector":
        return cls(phases=tuple(float(p) for p in np.asarray(phases, dtype=float)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.phases, dtype=float)

    def steering(self) -> np.ndarray:
        """Steering vector [1, e^{j phi_1}, ..., e^{j phi_N}]."""
        v = np.empty(len(self.phases) + 1, dtype=complex)
        v[0] = 1.0
        v[1:] = np.exp(1j * self.as_array())
        return v

    def __len__(self) -> int:
        return len(self.phases)


class EmpiricalSINR(BaseModel):
    """Monte-Carlo power estimates at one receiver"""
    signal_power: float = Field(description="Desired-signal power in milliwatts", ge=0)
    interference_power: float = Field(description="Aggregate interference power in milliwatts", ge=0)
    noise_power: float = Field(description="Noise power in milliwatts", ge=0)
    sinr: float = Field(description="signal / (interference + noise)", ge=0)
    symbols_used: int = Field(description="Number of symbols simulated", ge=1)


class Scenario(BaseModel):
    """Everything one evaluation needs: room, arrays, nodes and link budget"""
    model_config = ConfigDict(frozen=True)

    room: Room
    layouts: Tuple[ArrayLayout, ...] = ()
    deployment: Deployment
    params: LinkParams = LinkParams()

    @model_validator(mode='after')
    def validate_layouts_fit(self):
        from reflectshare.geometry import element_positions
        for layout in self.layouts:
            element_positions(layout, self.room)
        return self

    @property
    def element_count(self) -> int:
        return sum(layout.element_count for layout in self.layouts)

    @property
    def pairs(self) -> int:
        return self.deployment.pairs


class BoundTerms(BaseModel):
    """Interference term of the per-link bound and its two lower bounds"""
    interference: float = Field(description="I, the exact interference sum")
    am_gm_bound: float = Field(description="Lower bound on I from x1^2 + x2^2 >= (x1 + x2)^2 / 2")
    trig_bound: float = Field(description="Lower bound from x1^2 + x2^2 >= 2 x1 x2 and the cosine sum identity")
    eta: float = Field(description="(beta + 1) / beta")


class CapacityReport(BaseModel):
    """SINR, feasibility and transport capacity for one phase configuration"""
    per_link_sinr: List[float] = Field(description="Linear SINR at every receiver")
    feasible: bool = Field(description="True when every link reaches the SINR threshold")
    transport_capacity: float = Field(description="R * sum d^alpha when feasible, else 0", ge=0)
    per_link_bound: List[Optional[float]] = Field(
        description="Per-link bound on d^alpha; None where the bound is vacuous"
    )


class PhaseSearchConfig(BaseModel):
    """How phases are searched for one deployment"""
    model_config = ConfigDict(frozen=True)

    method: Literal['coordinate_ascent', 'exhaustive'] = 'coordinate_ascent'
    phase_step: float = Field(
        description="Phase grid step in radians; must divide 2 pi",
        default=math.pi / 180,
        gt=0
    )
    max_sweeps: int = Field(description="Upper limit on full element sweeps", default=20, ge=1)
    convergence_tol: float = Field(
        description="Stop when a sweep improves the objective by less than this relative amount",
        default=1e-9,
        ge=0
    )
    restarts: int = Field(description="Extra ascents from seeded random grid phases", default=0, ge=0)
    seed: int = Field(description="Seed for restart phases", default=0, ge=0)

    @field_validator('phase_step')
    @classmethod
    def validate_divides_circle(cls, v: float) -> float:
        levels = 2 * math.pi / v
        if abs(levels - round(levels)) > 1e-9 * levels:
            raise ValueError(f"phase_step {v} does not divide 2 pi into whole levels")
        return v

    @property
    def levels(self) -> int:
        return round(2 * math.pi / self.phase_step)

    def grid(self) -> np.ndarray:
        """Phase levels -pi, -pi + step, ..., pi - step."""
        return -math.pi + self.phase_step * np.arange(self.levels)


class PlacementSearchConfig(BaseModel):
    """How node placements are searched"""
    model_config = ConfigDict(frozen=True)

    mode: Literal['exhaustive', 'randomized'] = 'exhaustive'
    sample_budget: int = Field(description="Distinct statuses sampled in randomized mode", default=200, ge=1)
    seed: int = Field(description="Sampling seed", default=0, ge=0)
    parallel_workers: int = Field(description="Worker processes evaluating statuses", default=1, ge=1)
    exhaustive_cap: Optional[int] = Field(
        description="Refuse exhaustive searches with more statuses; defaults to settings",
        default=None,
        ge=1
    )


class SearchResult(BaseModel):
    """Best placement and phases found by a placement search"""
    best_capacity: float = Field(description="C_T_max in bits m^alpha / s", ge=0)
    best_deployment: Deployment
    best_phases: PhaseVector
    statuses_evaluated: int = Field(description="Number of statuses K evaluated", ge=0)
    objective_trace: List[Tuple[int, float]] = Field(
        description="(status index, optimized capacity) for every evaluated status, by index",
        default=[]
    )


class SweepRow(BaseModel):
    """One point of an experiment sweep"""
    sweep_value: float
    upper_bound: Optional[float] = Field(description="Closed-form bound; None when vacuous", default=None)
    achievable: Optional[float] = Field(description="C_T_max from the placement search", default=None)
    baseline_upper_bound: Optional[float] = Field(description="Bound without any reflect-array", default=None)
    baseline_achievable: Optional[float] = Field(description="C_T_max without any reflect-array", default=None)
    statuses_evaluated: Optional[int] = None
    wall_time: float = 0.0

    @property
    def gap(self) -> Optional[float]:
        if self.upper_bound is None or self.achievable is None:
            return None
        return self.upper_bound - self.achievable


class DemoResult(BaseModel):
    """Outcome of the two-transmitter interference cancellation scenario"""
    element_count: int = Field(description="Reflector elements in the array", ge=0)
    baseline_sinr_db: float = Field(description="SINR of the desired link with all phases 0, in dB")
    optimized_sinr_db: float = Field(description="SINR of the desired link after phase optimization, in dB")
    desired_power_dbm_before: float = Field(description="Desired-signal received power with zero phases, in dBm")
    desired_power_dbm_after: float = Field(description="Desired-signal received power after optimization, in dBm")
    interference_power_dbm_before: float = Field(description="Interferer received power with zero phases, in dBm")
    interference_power_dbm_after: float = Field(description="Interferer received power after optimization, in dBm")
    phases: PhaseVector

    @property
    def improvement_db(self) -> float:
        return self.optimized_sinr_db - self.baseline_sinr_db
