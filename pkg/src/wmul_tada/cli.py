"""
@Author = 'Michael Stanley'

Command-Line-Interface for the various modules in this package.

Exit status is 0 on success, 2 for a bad configuration or argument, and 1 when a run aborts on non-finite values,
a singular covariance, or a failed verification check.

============ Change Log ============
2026-Oct-18 = Created.

============ License ============
Copyright (C) 2026 Michael Stanley

This file is part of wmul_tada.

wmul_tada is free software: you can redistribute it and/or modify it
under the terms of the GNU General Public License as published by the Free
Software Foundation, either version 3 of the License, or (at your option) any
later version.

wmul_tada is distributed in the hope that it will be useful, but WITHOUT
ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS
FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.

You should have received a copy of the GNU General Public License along with
wmul_tada. If not, see <https://www.gnu.org/licenses/>.
"""
import contextlib
from pathlib import Path

import click
import numpy as np

from wmul_tada import __version__
from wmul_tada.AugmentedDynamics import CovarianceConditionError, MAX_VARS, injected_transition_fault
from wmul_tada.ExperimentConfig import load_experiment_config
from wmul_tada.ExperimentRunner import dump_coeffs, run_sample, run_sweep_k, run_sweep_nfe
from wmul_tada.TadaSampler import NonFiniteSampleError
from wmul_tada.VerifySuite import run_checks
from wmul_tada import WriteResults

import wmul_logger


_logger = wmul_logger.get_logger()

EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
DEFAULT_DUMP_POINTS = 21


@click.group()
@click.version_option()
@click.option('--log_name', type=click.Path(exists=False, file_okay=True, dir_okay=False, writable=True), default=None,
              required=False, help="The path to the log file.")
@click.option('--log_level', type=click.IntRange(10, 50, clamp=True), required=False, default=30,
              help="The log level: 10: Debug, 20: Info, 30: Warning, 40: Error, 50: Critical. "
                   "Intermediate values (E.G. 32) are permitted, but will essentially be rounded up (E.G. Entering 32 "
                   "is the same as entering 40. Logging messages lower than the log level will not be written to the "
                   "log.")
def wmul_tada_cli(log_name, log_level):
    if log_name:
        global _logger
        _logger = wmul_logger.setup_logger(file_name=log_name, log_level=log_level)
        _logger.warning(f"Version: {__version__}")
        _logger.warning("In command_line_interface")


def run_guarded(ctx, work):
    """Runs work(), mapping the package's failures onto exit codes. Returns work's result on success."""
    try:
        return work()
    except (NonFiniteSampleError, CovarianceConditionError) as e:
        _logger.exception(f"Final crash: {e}")
        click.echo(f"Run aborted: {e}", err=True)
        code = EXIT_FAILURE
    except ValueError as e:
        _logger.error(f"Configuration error: {e}")
        click.echo(f"Configuration error: {e}", err=True)
        code = EXIT_CONFIG_ERROR
    ctx.exit(code)


def _load(config, seed, out):
    return load_experiment_config(config).with_overrides(seed=seed, out=out)


def experiment_options(function):
    function = click.option('--out', type=click.Path(file_okay=False, dir_okay=True, writable=True), default=None,
                            help="Directory for the output files. Overrides output.directory in the config.")(function)
    function = click.option('--seed', type=click.IntRange(min=0), default=None,
                            help="The sampler seed. Overrides sampler.seed in the config.")(function)
    function = click.option('--config', 'config', required=True,
                            type=click.Path(exists=True, file_okay=True, dir_okay=False, readable=True),
                            help="The JSON experiment file. See README.md for the format.")(function)
    return function


@wmul_tada_cli.command()
@click.option('--filter', 'filter_pattern', type=str, default=None,
              help="Only run checks whose names contain this text. Glob wildcards (*, ?, [) switch to glob "
                   "matching against the whole name.")
@click.option('--out', type=click.Path(file_okay=False, dir_okay=True, writable=True), default=".",
              help="Directory for verify_report.csv. Defaults to the current directory.")
@click.option('--inject_fault', is_flag=True, hidden=True,
              help="Perturb every entry of the controlled transition by 1e-3 while the checks run.")
@click.pass_context
def verify(ctx, filter_pattern, out, inject_fault):
    _logger.debug(f"With {locals()}")

    def work():
        fault = injected_transition_fault(1e-3) if inject_fault else contextlib.nullcontext()
        with fault:
            results = run_checks(filter_pattern=filter_pattern)
        WriteResults.write_verify_report(results, Path(out) / "verify_report.csv")
        return results

    results = run_guarded(ctx, work)
    failed = [result.name for result in results if not result.passed]
    click.echo(f"{len(results) - len(failed)} passed, {len(failed)} failed")
    if failed:
        click.echo("Failed: " + ", ".join(failed), err=True)
        ctx.exit(EXIT_FAILURE)


def _sample_command(ctx, config, seed, out, mode):
    result = run_guarded(ctx, lambda: run_sample(_load(config, seed, out), mode=mode))
    click.echo(f"Wrote {len(result.samples)} samples ({result.nfe} NFE) to {result.output_directory}")


@wmul_tada_cli.command()
@experiment_options
@click.pass_context
def sample(ctx, config, seed, out):
    _logger.debug(f"With {locals()}")
    _sample_command(ctx, config, seed, out, mode="tada")


@wmul_tada_cli.command(name="fm-baseline")
@experiment_options
@click.pass_context
def fm_baseline(ctx, config, seed, out):
    _logger.debug(f"With {locals()}")
    _sample_command(ctx, config, seed, out, mode="fm")


@wmul_tada_cli.command(name="sweep-nfe")
@experiment_options
@click.option('--nfe', type=int, multiple=True, required=True,
              help="An NFE budget to run. Repeat the option for each budget, E.G. --nfe 5 --nfe 10 --nfe 20.")
@click.pass_context
def sweep_nfe(ctx, config, seed, out, nfe):
    _logger.debug(f"With {locals()}")
    rows = run_guarded(ctx, lambda: run_sweep_nfe(_load(config, seed, out), list(nfe)))
    click.echo(f"Wrote {len(rows)} metric rows for NFE {list(nfe)}")


@wmul_tada_cli.command(name="sweep-k")
@experiment_options
@click.option('--k', 'k_values', type=float, multiple=True, required=True,
              help="A prior scale to run. Repeat the option for each value, E.G. --k 0.1 --k 1 --k 10.")
@click.pass_context
def sweep_k(ctx, config, seed, out, k_values):
    _logger.debug(f"With {locals()}")
    spreads = run_guarded(ctx, lambda: run_sweep_k(_load(config, seed, out), list(k_values)))
    for k, spread in zip(k_values, spreads):
        click.echo(f"k = {k:g}: diversity spread {spread:.6g}")


@wmul_tada_cli.command(name="dump-coeffs")
@click.option('--n_vars', type=click.IntRange(1, MAX_VARS), default=2, help="Number of augmented variables N.")
@click.option('--k_scale', type=float, default=1.0, help="Prior scale k on the last variable. Defaults to 1.")
@click.option('--time', 'times', type=float, multiple=True,
              help="A time to tabulate. Repeat for each time. Defaults to 21 evenly spaced times on [0, 1 - delta].")
@click.option('--delta', type=float, default=1e-3, help="End-time clamp; the grid must end by 1 - delta.")
@click.option('--out', type=click.Path(file_okay=False, dir_okay=True, writable=True), default=".",
              help="Directory for coeffs.csv. Defaults to the current directory.")
@click.pass_context
def dump_coefficients(ctx, n_vars, k_scale, times, delta, out):
    _logger.debug(f"With {locals()}")
    if not times:
        times = np.linspace(0.0, 1.0 - delta, DEFAULT_DUMP_POINTS).tolist()
    path, rows = run_guarded(ctx, lambda: dump_coeffs(n_vars, k_scale, list(times), delta, out))
    click.echo(f"Wrote {len(rows)} rows to {path}")
