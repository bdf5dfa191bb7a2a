import math
import re

import numpy as np


def dbm_to_mw(p_dbm: float) -> float:
    """Convert a power in dBm to linear milliwatts."""
    return 10.0 ** (p_dbm / 10.0)


def mw_to_dbm(p_mw: float) -> float:
    """Convert linear milliwatts to dBm. Zero power maps to -inf."""
    if p_mw <= 0:
        return -math.inf
    return 10.0 * math.log10(p_mw)


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    """Convert a linear power ratio to dB, mapping 0 to -inf and inf to inf."""
    if value <= 0:
        return -math.inf
    if math.isinf(value):
        return math.inf
    return 10.0 * math.log10(value)


def wrap_phase(phase):
    """Wrap phases (scalar or array) into [-pi, pi)."""
    return np.mod(np.asarray(phase) + np.pi, 2.0 * np.pi) - np.pi


def phase_distance(a, b):
    """Smallest absolute angular difference between two phases, in [0, pi]."""
    return np.abs(wrap_phase(np.asarray(a) - np.asarray(b)))


_POINT_RE = re.compile(r'^\s*(-?[0-9.eE+-]+)\s*,\s*(-?[0-9.eE+-]+)\s*$')


def parse_point_list(text: str) -> list[tuple[float, float]]:
    """
    Parse a list of points written as "x,y; x,y; ...".

    Raises ValueError naming the offending item when an entry is not two
    comma-separated numbers.
    """
    points = []
    for item in text.split(';'):
        if not item.strip():
            continue
        match = _POINT_RE.match(item)
        if not match:
            raise ValueError(f"expected 'x,y' but got '{item.strip()}'")
        points.append((float(match.group(1)), float(match.group(2))))
    return points


def format_point_list(points) -> str:
    return "; ".join(f"{x!r},{y!r}" for x, y in points)
