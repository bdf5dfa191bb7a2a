"""
Command-line interface for reflectshare
"""
import functools
import math
import sys
from pathlib import Path
from typing import Optional

import click
import pandas as pd
from loguru import logger
from pydantic import ValidationError

from reflectshare.capacity import BoundInvalid
from reflectshare.experiments import (
    ConfigError,
    ConfigSyntaxError,
    ExperimentConfig,
    load_config,
    load_packaged_config,
    phase_frame,
    phases_frame,
    run_achievable_sweep,
    run_phase_optimization,
    run_upper_bound_sweep,
    sweep_frame,
    write_csv,
)
from reflectshare.geometry import InfeasibleGridError, InvalidBoundsError, LayoutError
from reflectshare.log import configure_logging
from reflectshare.model import LinkParams, PhaseSearchConfig
from reflectshare.optimizer import BudgetExceeded, interference_cancellation_demo
from reflectshare.settings import get_settings
from reflectshare.validation import property_names, run_validation_suite
from reflectshare.worker_pool import WorkerDead, WorkerError

EXIT_VALIDATION_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_BUDGET_EXCEEDED = 3

_CONFIG_ERRORS = (
    ConfigSyntaxError, ConfigError, ValidationError, InfeasibleGridError,
    LayoutError, InvalidBoundsError, BoundInvalid,
)


def _exit_code(error: BaseException) -> Optional[int]:
    while isinstance(error, WorkerError) and error.__cause__ is not None:
        error = error.__cause__
    if isinstance(error, BudgetExceeded):
        return EXIT_BUDGET_EXCEEDED
    if isinstance(error, _CONFIG_ERRORS):
        return EXIT_CONFIG_ERROR
    return None


def handle_errors(command):
    """Turn domain errors into a one-line message and the documented exit code."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (WorkerError, WorkerDead, *_CONFIG_ERRORS, BudgetExceeded) as e:
            code = _exit_code(e)
            if code is None:
                raise
            click.echo(f"Error: {e}", err=True)
            if code == EXIT_BUDGET_EXCEEDED:
                click.echo("Hint: set placement_mode = randomized and a sample_budget", err=True)
            sys.exit(code)
    return wrapper


def _load(config_path: Optional[str], seed: Optional[int], default: Optional[str] = 'indoor.conf') -> ExperimentConfig:
    if config_path is not None:
        config = load_config(config_path)
    elif default is not None:
        logger.info(f"no --config given, using the shipped {default}")
        config = load_packaged_config(default)
    else:
        raise ConfigError("this command needs --config", 'config')
    if seed is not None:
        config = config.model_copy(update={'seed': seed})
    return config


def _output_path(out: Optional[str], config: Optional[ExperimentConfig]) -> Optional[str]:
    if out is not None:
        return out
    return config.output if config is not None else None


def experiment_options(command):
    command = click.option('--out', type=click.Path(dir_okay=False),
                           help='Write CSV here instead of stdout')(command)
    command = click.option('--workers', type=click.IntRange(min=1), default=None,
                           help='Worker processes for placement search')(command)
    command = click.option('--seed', type=click.IntRange(min=0), default=None,
                           help='Override the seed from the config')(command)
    command = click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
                           help='Experiment config file (key = value lines)')(command)
    return command


@click.group(epilog="Run 'reflectshare COMMAND --help' for more information on a command.")
@click.version_option()
@click.option('--log-level', default=None,
              type=click.Choice(['TRACE', 'DEBUG', 'INFO', 'SUCCESS', 'WARNING', 'ERROR'], case_sensitive=False),
              help='Log level for messages on stderr (default from settings)')
def cli(log_level):
    """Indoor spectrum sharing with programmable reflect-arrays"""
    configure_logging((log_level or get_settings().log_level).upper())


@cli.command('upper-bound')
@experiment_options
@click.option('--baseline', is_flag=True, default=False, help='Add a column for the bound without arrays')
@click.option('--timing', is_flag=True, default=False, help='Add a wall_time column')
@handle_errors
def upper_bound_command(config_path, seed, workers, out, baseline, timing):
    """Evaluate the closed-form capacity bound over the sweep axis."""
    config = _load(config_path, seed)
    rows = run_upper_bound_sweep(config, baseline=baseline)
    frame = sweep_frame(rows, config.sweep_axis, baseline=baseline, timing=timing, achievable=False)
    write_csv(frame, _output_path(out, config))


@cli.command('achievable')
@experiment_options
@click.option('--baseline', is_flag=True, default=False, help='Also search placements without arrays')
@click.option('--timing', is_flag=True, default=False, help='Add a wall_time column')
@handle_errors
def achievable_command(config_path, seed, workers, out, baseline, timing):
    """Search placements and phases for the achievable capacity over the sweep axis."""
    config = _load(config_path, seed)
    rows = run_achievable_sweep(config, baseline=baseline, workers=workers)
    frame = sweep_frame(rows, config.sweep_axis, baseline=baseline, timing=timing)
    write_csv(frame, _output_path(out, config))


@cli.command('phase-opt')
@experiment_options
@click.option('--phases-out', type=click.Path(dir_okay=False),
              help='Also write the optimized phase of every element as CSV')
@handle_errors
def phase_opt_command(config_path, seed, workers, out, phases_out):
    """Optimize phases for the deployment given by tx_positions / rx_positions."""
    config = _load(config_path, seed, default=None)
    result = run_phase_optimization(config)
    logger.info(
        f"transport capacity {result.baseline.transport_capacity:.6g} -> "
        f"{result.report.transport_capacity:.6g}"
    )
    write_csv(phase_frame(result), _output_path(out, config))
    if phases_out:
        write_csv(phases_frame(result.phases), phases_out)


@cli.command('demo-cancel')
@click.option('--elements', type=click.IntRange(min=0), default=48, show_default=True,
              help='Reflector elements in the array')
@click.option('--path-loss-exponent', type=click.FloatRange(min=0), default=2.0, show_default=True,
              help='Amplitude decay exponent of the bench scene')
@click.option('--phase-levels', type=click.IntRange(min=1), default=360, show_default=True,
              help='Phase grid levels per element')
@click.option('--restarts', type=click.IntRange(min=0), default=0, show_default=True,
              help='Extra ascents from random phases')
@click.option('--seed', type=click.IntRange(min=0), default=0, show_default=True,
              help='Seed for restart phases')
@click.option('--out', type=click.Path(dir_okay=False), help='Write CSV here instead of stdout')
@handle_errors
def demo_cancel_command(elements, path_loss_exponent, phase_levels, restarts, seed, out):
    """Cancel an equal-strength interferer at one receiver by tuning the array."""
    phase_config = PhaseSearchConfig(phase_step=2 * math.pi / phase_levels, restarts=restarts, seed=seed)
    result = interference_cancellation_demo(
        elements, phase_config, LinkParams(path_loss_exponent=path_loss_exponent)
    )
    frame = pd.DataFrame([{
        'elements': result.element_count,
        'baseline_sinr_db': result.baseline_sinr_db,
        'optimized_sinr_db': result.optimized_sinr_db,
        'improvement_db': result.improvement_db,
        'desired_dbm_before': result.desired_power_dbm_before,
        'desired_dbm_after': result.desired_power_dbm_after,
        'interference_dbm_before': result.interference_power_dbm_before,
        'interference_dbm_after': result.interference_power_dbm_after,
    }])
    write_csv(frame, out)


@cli.command('validate')
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
              help='Experiment config supplying seed and symbols')
@click.option('--seed', type=click.IntRange(min=0), default=None,
              help='Seed for every generated scenario (default: config seed, else 0)')
@click.option('--property', 'properties', multiple=True, type=click.Choice(property_names()),
              help='Run only this property (repeatable; default all)')
@click.option('--none', 'select_none', is_flag=True, default=False,
              help='Select no properties (empty report)')
@click.option('--mc-tolerance-db', type=click.FloatRange(min=0), default=0.2, show_default=True,
              help='Allowed Monte-Carlo SINR deviation')
@click.option('--symbols', type=click.IntRange(min=1), default=None,
              help='Monte-Carlo symbols per scenario (default: config symbols, else 100000)')
@click.option('--out', type=click.Path(dir_okay=False), help='Write the JSON report here instead of stdout')
@handle_errors
def validate_command(config_path, seed, properties, select_none, mc_tolerance_db, symbols, out):
    """Run the cross-module property checks and print a JSON report."""
    if config_path is not None:
        config = load_config(config_path)
        seed = config.seed if seed is None else seed
        symbols = symbols or config.symbols
    seed = seed or 0
    symbols = symbols or ExperimentConfig.model_fields['symbols'].default
    selection = [] if select_none else (list(properties) or None)
    report = run_validation_suite(seed, selection, mc_tolerance_db=mc_tolerance_db, symbols=symbols)
    text = report.model_dump_json(indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding='utf-8')
    else:
        click.echo(text, nl=False)
    if not report.passed:
        failed = [r.name for r in report.results if not r.passed]
        logger.error(f"validation failed: {', '.join(failed)}")
        sys.exit(EXIT_VALIDATION_FAILED)


if __name__ == "__main__":
    cli()
