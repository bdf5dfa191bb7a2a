import math

import numpy as np
import pytest

from reflectshare.utils import (
    db_to_linear,
    dbm_to_mw,
    format_point_list,
    linear_to_db,
    mw_to_dbm,
    parse_point_list,
    phase_distance,
    wrap_phase,
)


def test_dbm_to_mw():
    """Test converting dBm to milliwatts"""
    assert dbm_to_mw(0) == 1.0
    assert dbm_to_mw(-90) == pytest.approx(1e-9)
    assert dbm_to_mw(-20) == pytest.approx(0.01)


def test_mw_to_dbm():
    """Test converting milliwatts to dBm, including zero power"""
    assert mw_to_dbm(1.0) == 0.0
    assert mw_to_dbm(1e-9) == pytest.approx(-90.0)
    assert mw_to_dbm(0.0) == -math.inf


def test_db_to_linear():
    """Test the SINR threshold conversion"""
    assert db_to_linear(5) == pytest.approx(3.16228, abs=1e-5)
    assert db_to_linear(0) == 1.0


def test_linear_to_db_edges():
    """Test that zero and infinite ratios map to infinities"""
    assert linear_to_db(100.0) == pytest.approx(20.0)
    assert linear_to_db(0.0) == -math.inf
    assert linear_to_db(math.inf) == math.inf


def test_wrap_phase_range():
    """Test wrapping phases into [-pi, pi)"""
    wrapped = wrap_phase(np.array([0.0, math.pi, -math.pi, 3 * math.pi / 2, 7.0]))
    assert wrapped[0] == 0.0
    assert wrapped[1] == pytest.approx(-math.pi)
    assert wrapped[2] == pytest.approx(-math.pi)
    assert wrapped[3] == pytest.approx(-math.pi / 2)
    assert wrapped[4] == pytest.approx(7.0 - 2 * math.pi)


def test_phase_distance():
    """Test the shortest angular distance across the wrap point"""
    assert phase_distance(math.pi - 0.1, -math.pi + 0.1) == pytest.approx(0.2)
    assert phase_distance(1.0, 1.0) == 0.0


def test_parse_point_list():
    """Test parsing a semicolon-separated list of points"""
    assert parse_point_list("1,2; 3.5, -4 ;5e-1,6") == [(1.0, 2.0), (3.5, -4.0), (0.5, 6.0)]
    assert parse_point_list("") == []


def test_parse_point_list_rejects_bad_item():
    """Test that a malformed entry is named in the error"""
    with pytest.raises(ValueError, match="got '1'"):
        parse_point_list("0,0; 1;2")
    with pytest.raises(ValueError):
        parse_point_list("a,b")


def test_format_point_list():
    """Test formatting points so they parse back unchanged"""
    points = [(0.1, 2.0), (-3.25, 1e-7)]
    assert parse_point_list(format_point_list(points)) == points
