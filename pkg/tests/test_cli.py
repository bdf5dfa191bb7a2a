"""Tests for the reflectshare command line.

Logs go to stderr, so tests that inspect CSV or JSON content write it to a
file with --out rather than reading the mixed runner output.
"""

import json
from pathlib import Path

import pandas as pd
import pytest
from click.testing import CliRunner

import reflectshare
from reflectshare.cli import (
    EXIT_BUDGET_EXCEEDED,
    EXIT_CONFIG_ERROR,
    EXIT_VALIDATION_FAILED,
    cli,
)

VALID_REGIME = str(Path(reflectshare.__file__).parent / 'configs' / 'valid-regime.conf')

SMALL = """\
edge_length = 2
grid_divisions = 1
pairs = 1
arrays = 0
placement_mode = exhaustive
sweep_axis = pairs
sweep_values = 1, 2
phase_levels = 8
"""

PHASE_OPT = """\
edge_length = 10
grid_divisions = 10
pairs = 2
elements_per_array = 4
noise_dbm = -60
phase_levels = 16
tx_positions = 2,3; 7,6
rx_positions = 3,5; 8,4
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def write_config(tmp_path):
    def write(text, name="experiment.conf"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


def invoke(runner, *args):
    return runner.invoke(cli, ['--log-level', 'ERROR', *args])


def test_help_lists_commands(runner):
    result = runner.invoke(cli, ['--help'])
    assert result.exit_code == 0
    for command in ('upper-bound', 'achievable', 'phase-opt', 'demo-cancel', 'validate'):
        assert command in result.output


class TestUpperBound:

    def test_valid_regime(self, runner, tmp_path):
        out = tmp_path / "bound.csv"
        result = invoke(runner, 'upper-bound', '--config', VALID_REGIME,
                        '--out', str(out))
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(out)
        assert list(frame.columns) == ['elements_per_array', 'upper_bound']
        assert list(frame['elements_per_array']) == [24, 36, 48]
        assert frame['upper_bound'].is_monotonic_increasing

    def test_default_config_marks_invalid_bounds(self, runner, tmp_path):
        out = tmp_path / "bound.csv"
        result = invoke(runner, 'upper-bound', '--baseline', '--timing', '--out', str(out))
        assert result.exit_code == 0, result.output
        lines = out.read_text().splitlines()
        assert lines[0] == "pairs,upper_bound,baseline_upper_bound,wall_time"
        assert all(line.split(',')[1] == 'INVALID' for line in lines[1:])
        assert len(lines) == 6

    def test_output_is_deterministic(self, runner, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (first, second):
            invoke(runner, 'upper-bound', '--config', VALID_REGIME,
                   '--baseline', '--out', str(out))
        assert first.read_bytes() == second.read_bytes()

    def test_config_error_exit_code(self, runner, write_config):
        result = invoke(runner, 'upper-bound', '--config', write_config("edge_length = 10\npairs = 0\n"))
        assert result.exit_code == EXIT_CONFIG_ERROR
        assert "Error:" in result.output

    def test_syntax_error_exit_code(self, runner, write_config):
        result = invoke(runner, 'upper-bound', '--config', write_config("edge_length 10\n"))
        assert result.exit_code == EXIT_CONFIG_ERROR
        assert "line 1" in result.output


class TestAchievable:

    def test_small_grid(self, runner, write_config, tmp_path):
        out = tmp_path / "achievable.csv"
        result = invoke(runner, 'achievable', '--config', write_config(SMALL), '--baseline', '--out', str(out))
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(out)
        assert list(frame.columns) == [
            'pairs', 'upper_bound', 'baseline_upper_bound', 'achievable',
            'baseline_achievable', 'gap', 'statuses_evaluated',
        ]
        assert list(frame['statuses_evaluated']) == [12, 24]
        assert (frame['achievable'] <= frame['upper_bound']).all()

    def test_seed_override_is_reproducible(self, runner, write_config, tmp_path):
        config = write_config(SMALL.replace("exhaustive", "randomized") + "sample_budget = 4\n")
        outputs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            result = invoke(runner, 'achievable', '--config', config, '--seed', '5', '--out', str(out))
            assert result.exit_code == 0, result.output
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]

    def test_exhaustive_over_cap(self, runner, write_config):
        config = write_config("edge_length = 10\ngrid_divisions = 10\npairs = 2\nsweep_values = 2\n"
                              "placement_mode = exhaustive\n")
        result = invoke(runner, 'achievable', '--config', config)
        assert result.exit_code == EXIT_BUDGET_EXCEEDED
        assert "randomized" in result.output


class TestPhaseOpt:

    def test_requires_config(self, runner):
        result = invoke(runner, 'phase-opt')
        assert result.exit_code == EXIT_CONFIG_ERROR

    def test_writes_links_and_phases(self, runner, write_config, tmp_path):
        out, phases_out = tmp_path / "links.csv", tmp_path / "phases.csv"
        result = invoke(runner, 'phase-opt', '--config', write_config(PHASE_OPT),
                        '--out', str(out), '--phases-out', str(phases_out))
        assert result.exit_code == 0, result.output
        links = pd.read_csv(out)
        assert list(links['link']) == [0, 1]
        phases = pd.read_csv(phases_out)
        assert list(phases['element']) == [0, 1, 2, 3]
        assert phases['phase'].between(-3.1416, 3.1416).all()


def test_demo_cancel(runner, tmp_path):
    out = tmp_path / "demo.csv"
    result = invoke(runner, 'demo-cancel', '--elements', '8', '--phase-levels', '36', '--out', str(out))
    assert result.exit_code == 0, result.output
    (row,) = pd.read_csv(out).to_dict('records')
    assert row['elements'] == 8
    assert row['optimized_sinr_db'] >= row['baseline_sinr_db']
    assert row['improvement_db'] == pytest.approx(row['optimized_sinr_db'] - row['baseline_sinr_db'])


class TestValidate:

    def test_none_selected(self, runner):
        result = invoke(runner, 'validate', '--none')
        assert result.exit_code == 0
        assert json.loads(result.output) == {'seed': 0, 'symbols': 100000, 'passed': True, 'results': []}

    def test_single_property_to_file(self, runner, tmp_path):
        out = tmp_path / "report.json"
        result = invoke(runner, 'validate', '--property', 'inequality_chain', '--seed', '2', '--out', str(out))
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert report['seed'] == 2
        assert [r['name'] for r in report['results']] == ['inequality_chain']

    def test_failure_exit_code(self, runner, tmp_path):
        out = tmp_path / "report.json"
        result = invoke(runner, 'validate', '--property', 'monte_carlo_sinr', '--mc-tolerance-db', '0',
                        '--symbols', '1000', '--out', str(out))
        assert result.exit_code == EXIT_VALIDATION_FAILED
        report = json.loads(out.read_text())
        assert report['passed'] is False
        assert report['results'][0]['counterexample'] is not None

    def test_config_supplies_seed_and_symbols(self, runner, write_config, tmp_path):
        out = tmp_path / "report.json"
        path = write_config(SMALL + "seed = 7\nsymbols = 500\n")
        result = invoke(runner, 'validate', '--config', path, '--none', '--out', str(out))
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert (report['seed'], report['symbols']) == (7, 500)

    def test_flags_override_config(self, runner, write_config, tmp_path):
        out = tmp_path / "report.json"
        path = write_config(SMALL + "seed = 7\nsymbols = 500\n")
        result = invoke(runner, 'validate', '--config', path, '--seed', '1', '--symbols', '20', '--none',
                        '--out', str(out))
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert (report['seed'], report['symbols']) == (1, 20)

    def test_unknown_property_is_usage_error(self, runner):
        result = invoke(runner, 'validate', '--property', 'nonsense')
        assert result.exit_code == 2
