import multiprocessing
import os

import pytest

from reflectshare.model import ArrayLayout, Deployment, LinkParams, Point2D, Room, Scenario, WallNormal


def _can_start_processes():
    """Check whether the platform provides the semaphores process pools need."""
    try:
        multiprocessing.get_context().Lock()
        return True
    except (OSError, ImportError, NotImplementedError):
        return False


# Skip marker for tests that spawn worker processes
requires_processes = pytest.mark.skipif(
    not _can_start_processes(),
    reason="Process pools not supported here (no working multiprocessing semaphores)"
)


def pytest_sessionstart(session):
    """
    Called after the Session object has been created and before performing collection
    and entering the run test loop.
    """
    os.environ['RSH_LOG_LEVEL'] = 'WARNING'
    os.environ['RSH_WORKERS'] = '1'


def make_scenario(tx, rx, layouts=(), edge_length=10.0, grid_divisions=10, **params):
    """Scenario from lists of (x, y) tuples."""
    return Scenario(
        room=Room(edge_length=edge_length, grid_divisions=grid_divisions),
        layouts=tuple(layouts),
        deployment=Deployment(
            tx_positions=tuple(Point2D(x=x, y=y) for x, y in tx),
            rx_positions=tuple(Point2D(x=x, y=y) for x, y in rx),
        ),
        params=LinkParams(**params),
    )


def bottom_array(n, center_x=5.0, spacing=0.0625):
    return ArrayLayout(center=Point2D(x=center_x, y=0.0), wall_normal=WallNormal.POS_Y,
                       element_count=n, element_spacing=spacing)


@pytest.fixture
def room():
    return Room(edge_length=10.0, grid_divisions=10)


@pytest.fixture
def params():
    return LinkParams()


@pytest.fixture
def single_link():
    """One link 2 m long, 3 m in front of a 4-element array."""
    return make_scenario([(4.0, 3.0)], [(6.0, 3.0)], [bottom_array(4)])


@pytest.fixture
def two_links():
    return make_scenario([(2.0, 3.0), (7.0, 6.0)], [(3.0, 5.0), (8.0, 4.0)], [bottom_array(2)],
                         noise_power=1e-6)
