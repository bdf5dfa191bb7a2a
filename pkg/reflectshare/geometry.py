"""
Room geometry, reflect-array layouts, node placements and path lengths.

Node placements ("statuses") are identified by their rank in the loop nest
that walks the coordinate tuple (x_1, ..., x_2L, y_1, ..., y_2L) over the
grid, x_1 outermost. Each coordinate is a digit in 0..M, so the rank is the
mixed-radix number formed by those digits in base M+1. Tuples that place two
nodes on the same grid point have a rank but are skipped. Ranks are monotone
in enumeration order, so workers can split the status space by rank range
and restart an enumeration from any rank.
"""

import math
from typing import Iterator, Optional, Sequence

import numpy as np
from loguru import logger

from .model import ArrayLayout, Deployment, PathGeometry, Point2D, Room, WallNormal


class LayoutError(ValueError):
    """Raised when a reflect-array does not fit on its wall."""


class DegenerateGeometryError(ValueError):
    """Raised when a path has zero length (coincident nodes or a node on an element)."""


class InfeasibleGridError(ValueError):
    """Raised when the grid has fewer points than the nodes to place."""


class InvalidBoundsError(ValueError):
    """Raised when distance extremes do not satisfy 0 < d_min < d_max."""


# Wall midpoints in the order arrays are added: bottom, left, top, right.
_MIDPOINT_ORDER = (
    (0.5, 0.0, WallNormal.POS_Y),
    (0.0, 0.5, WallNormal.POS_X),
    (0.5, 1.0, WallNormal.NEG_Y),
    (1.0, 0.5, WallNormal.NEG_X),
)

_WALL_TOL = 1e-9


def _element_offsets(layout: ArrayLayout) -> np.ndarray:
    n = layout.element_count
    return (np.arange(n) - (n - 1) / 2) * layout.element_spacing


def element_positions(layout: ArrayLayout, room: Optional[Room] = None) -> list[Point2D]:
    """
    Positions of the elements of one array, symmetric about its center and
    ordered by ascending coordinate along the wall.

    When a room is given, the array must sit on the wall its normal points
    away from and its span must stay within [0, D].
    """
    offsets = _element_offsets(layout)
    axis = layout.wall_normal.wall_axis
    if room is not None:
        _check_layout_fits(layout, room, offsets)
    points = []
    for offset in offsets:
        if axis == 0:
            points.append(Point2D(x=layout.center.x + offset, y=layout.center.y))
        else:
            points.append(Point2D(x=layout.center.x, y=layout.center.y + offset))
    return points


def _check_layout_fits(layout: ArrayLayout, room: Room, offsets: np.ndarray):
    D = room.edge_length
    normal = layout.wall_normal
    wall_coord = {
        WallNormal.POS_Y: (layout.center.y, 0.0),
        WallNormal.NEG_Y: (layout.center.y, D),
        WallNormal.POS_X: (layout.center.x, 0.0),
        WallNormal.NEG_X: (layout.center.x, D),
    }[normal]
    if abs(wall_coord[0] - wall_coord[1]) > _WALL_TOL:
        raise LayoutError(
            f"array centered at ({layout.center.x}, {layout.center.y}) with normal {normal} "
            f"is not on the wall at {wall_coord[1]}"
        )
    along = layout.center.x if normal.wall_axis == 0 else layout.center.y
    low, high = along + offsets[0], along + offsets[-1]
    if low < -_WALL_TOL or high > D + _WALL_TOL:
        raise LayoutError(
            f"array span {layout.span:.6g} m centered at {along} does not fit on a "
            f"{D} m wall (elements from {low:.6g} to {high:.6g})"
        )


def element_array(layouts: Sequence[ArrayLayout], room: Optional[Room] = None) -> np.ndarray:
    """Pooled element positions of all arrays as an (N, 2) array, in layout order."""
    if not layouts:
        return np.zeros((0, 2))
    return np.array([
        p.as_tuple() for layout in layouts for p in element_positions(layout, room)
    ], dtype=float)


def midpoint_layouts(room: Room, count: int, element_count: int,
                     element_spacing: float) -> tuple[ArrayLayout, ...]:
    """
    Up to four arrays at wall midpoints, added in the order
    (D/2, 0), (0, D/2), (D/2, D), (D, D/2).
    """
    if not 0 <= count <= len(_MIDPOINT_ORDER):
        raise LayoutError(f"array count must be between 0 and 4, got {count}")
    D = room.edge_length
    layouts = tuple(
        ArrayLayout(
            center=Point2D(x=fx * D, y=fy * D),
            wall_normal=normal,
            element_count=element_count,
            element_spacing=element_spacing,
        )
        for fx, fy, normal in _MIDPOINT_ORDER[:count]
    )
    for layout in layouts:
        element_positions(layout, room)
    return layouts


def _as_points(elements) -> np.ndarray:
    if isinstance(elements, np.ndarray):
        return elements.reshape(-1, 2).astype(float)
    return np.array([p.as_tuple() for p in elements], dtype=float).reshape(-1, 2)


def path_geometry(tx: Point2D, rx: Point2D, elements) -> PathGeometry:
    """Direct and per-element reflected path lengths from tx to rx."""
    t = np.array(tx.as_tuple())
    r = np.array(rx.as_tuple())
    e = _as_points(elements)
    d0 = float(np.hypot(*(t - r)))
    if d0 == 0.0:
        raise DegenerateGeometryError(f"transmitter and receiver coincide at ({tx.x}, {tx.y})")
    to_element = np.hypot(e[:, 0] - t[0], e[:, 1] - t[1])
    from_element = np.hypot(e[:, 0] - r[0], e[:, 1] - r[1])
    if np.any(to_element == 0.0) or np.any(from_element == 0.0):
        raise DegenerateGeometryError("a node coincides with a reflector element")
    d_reflected = to_element + from_element
    return PathGeometry(d0=d0, d_reflected=d_reflected, delta_d=d_reflected - d0)


def path_lengths(tx: np.ndarray, rx: np.ndarray, elements: np.ndarray) -> np.ndarray:
    """
    All path lengths of a deployment as an (L, L, N+1) array indexed
    [receiver l, transmitter k, path m], where m = 0 is the direct path and
    m = i is the path reflected on element i.
    """
    tx = np.asarray(tx, dtype=float).reshape(-1, 2)
    rx = np.asarray(rx, dtype=float).reshape(-1, 2)
    elements = np.asarray(elements, dtype=float).reshape(-1, 2)
    L, N = len(rx), len(elements)
    d = np.empty((L, len(tx), N + 1))
    d[:, :, 0] = np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=-1)
    if N:
        tx_to_e = np.linalg.norm(tx[:, None, :] - elements[None, :, :], axis=-1)  # (K, N)
        e_to_rx = np.linalg.norm(rx[:, None, :] - elements[None, :, :], axis=-1)  # (L, N)
        if np.any(tx_to_e == 0.0) or np.any(e_to_rx == 0.0):
            raise DegenerateGeometryError("a node coincides with a reflector element")
        d[:, :, 1:] = e_to_rx[:, None, :] + tx_to_e[None, :, :]
    if np.any(d[:, :, 0] == 0.0):
        raise DegenerateGeometryError("a transmitter coincides with a receiver")
    return d


def grid_point_count(room: Room) -> int:
    return (room.grid_divisions + 1) ** 2


def placement_count(room: Room, pairs: int) -> int:
    """K = P! / (P - 2L)! with P = (M+1)^2 grid points."""
    points = grid_point_count(room)
    if points < 2 * pairs:
        raise InfeasibleGridError(
            f"{points} grid point(s) cannot hold {2 * pairs} distinct nodes"
        )
    return math.perm(points, 2 * pairs)


def rank_space(room: Room, pairs: int) -> int:
    """Number of loop-nest ranks, including skipped coincident tuples."""
    return (room.grid_divisions + 1) ** (4 * pairs)


def _digits_from_rank(rank: int, base: int, width: int) -> list[int]:
    digits = [0] * width
    for pos in range(width - 1, -1, -1):
        rank, digits[pos] = divmod(rank, base)
    return digits


def _rank_from_digits(digits: Sequence[int], base: int) -> int:
    rank = 0
    for digit in digits:
        rank = rank * base + digit
    return rank


def _deployment_from_digits(digits: Sequence[int], axis: np.ndarray, pairs: int) -> Deployment:
    n = 2 * pairs
    points = [Point2D(x=float(axis[digits[i]]), y=float(axis[digits[n + i]])) for i in range(n)]
    return Deployment(tx_positions=tuple(points[:pairs]), rx_positions=tuple(points[pairs:]))


def deployment_from_rank(room: Room, pairs: int, rank: int) -> Optional[Deployment]:
    """The deployment with the given loop-nest rank, or None for a coincident tuple."""
    n = 2 * pairs
    digits = _digits_from_rank(rank, room.grid_divisions + 1, 2 * n)
    cells = set(zip(digits[:n], digits[n:]))
    if len(cells) != n:
        return None
    return _deployment_from_digits(digits, room.grid_axis(), pairs)


def status_rank(room: Room, deployment: Deployment) -> int:
    """Loop-nest rank of a deployment whose nodes all lie on the grid."""
    if not deployment.on_grid(room):
        raise ValueError("deployment is not on the room grid")
    step = room.grid_spacing
    points = (*deployment.tx_positions, *deployment.rx_positions)
    digits = [round(p.x / step) for p in points] + [round(p.y / step) for p in points]
    return _rank_from_digits(digits, room.grid_divisions + 1)


def enumerate_placements(room: Room, pairs: int, start: int = 0,
                         stop: Optional[int] = None) -> Iterator[tuple[int, Deployment]]:
    """
    Yield (rank, deployment) for every placement of 2L distinct grid points,
    in loop-nest order, restricted to ranks in [start, stop).
    """
    placement_count(room, pairs)
    base = room.grid_divisions + 1
    n = 2 * pairs
    total = rank_space(room, pairs)
    stop = total if stop is None else min(stop, total)
    if start >= stop:
        return
    axis = room.grid_axis()
    rank = start
    for digits in _product_from(_digits_from_rank(start, base, 2 * n), base):
        if rank >= stop:
            return
        if len(set(zip(digits[:n], digits[n:]))) == n:
            yield rank, _deployment_from_digits(digits, axis, pairs)
        rank += 1


def _product_from(first: Sequence[int], base: int) -> Iterator[tuple[int, ...]]:
    """Odometer over digits in base `base`, starting at `first` and ending after all digits roll to base-1."""
    digits = list(first)
    width = len(digits)
    while True:
        yield tuple(digits)
        pos = width - 1
        while pos >= 0:
            digits[pos] += 1
            if digits[pos] < base:
                break
            digits[pos] = 0
            pos -= 1
        if pos < 0:
            return


def sample_placements(room: Room, pairs: int, budget: int,
                      seed: int) -> list[tuple[int, Deployment]]:
    """
    Draw `budget` distinct placements uniformly at random.

    Draws are sequential from one seeded generator, so a smaller budget with
    the same seed yields a prefix of a larger one. A budget covering every
    placement returns the full enumeration instead.
    """
    total = placement_count(room, pairs)
    if budget >= total:
        logger.debug(f"sample budget {budget} covers all {total} placements; enumerating")
        return list(enumerate_placements(room, pairs))
    base = room.grid_divisions + 1
    n = 2 * pairs
    axis = room.grid_axis()
    rng = np.random.default_rng(seed)
    seen: set[int] = set()
    sampled = []
    while len(sampled) < budget:
        cells = rng.choice(base * base, size=n, replace=False)
        digits = [int(c) // base for c in cells] + [int(c) % base for c in cells]
        rank = _rank_from_digits(digits, base)
        if rank in seen:
            continue
        seen.add(rank)
        sampled.append((rank, _deployment_from_digits(digits, axis, pairs)))
    return sampled


def distance_extremes(room: Room, layouts: Sequence[ArrayLayout] = (),
                      d_min: Optional[float] = None,
                      d_max: Optional[float] = None) -> tuple[float, float]:
    """
    Shortest and longest propagation lengths used by the closed-form bound.

    d_min defaults to the grid spacing D/M. d_max defaults to sqrt(5) D,
    which covers the room diagonal and the longest corner to mid-wall array
    to corner path. Overrides are returned unchanged.
    """
    low = room.grid_spacing if d_min is None else float(d_min)
    high = math.sqrt(5.0) * room.edge_length if d_max is None else float(d_max)
    if not 0 < low < high:
        raise InvalidBoundsError(f"need 0 < d_min < d_max, got d_min={low}, d_max={high}")
    return low, high
