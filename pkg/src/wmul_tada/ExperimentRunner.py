"""
@Author = 'Michael Stanley'

The work behind each CLI command: a single sampling run, the NFE sweep, the prior-scale (k) sweep, and the
coefficient dump. Each writes its files under the experiment's output directory.

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
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from wmul_tada import __version__
from wmul_tada.AugmentedDynamics import AugmentedConfig, coefficients
from wmul_tada.BayesDenoisers import CountingDenoiser
from wmul_tada.DynamicsAnalysis import gamma_dot, y_dyn_coefficients
from wmul_tada.ExperimentConfig import SamplerSpec
from wmul_tada.SampleMetrics import METRICS, SampleBatch, diversity_spread
from wmul_tada.TadaSampler import TrajectoryRecorder, fm_baseline_sample, tada_sample
from wmul_tada import WriteResults

import wmul_logger

_logger = wmul_logger.get_logger()

MODES = ("tada", "fm")


@dataclass
class RunResult:
    samples: np.ndarray
    nfe: int
    output_directory: Path


def _reference_samples(experiment, dataset):
    rng = np.random.Generator(np.random.Philox(key=experiment.sampler.seed, counter=[0, 1, 0, 0]))
    return dataset.sample(experiment.metrics.reference_size, rng)


def _metric_names(experiment):
    return experiment.metrics.names or sorted(METRICS)


def _score(experiment, samples, reference, label):
    batch = SampleBatch(samples=samples, label=label)
    reference_batch = SampleBatch(samples=reference, label="reference")
    return [
        (name, METRICS[name](batch, reference_batch, experiment.metrics.projections, experiment.sampler.seed))
        for name in _metric_names(experiment)
    ]


def run_sample(experiment, mode="tada"):
    if mode not in MODES:
        raise ValueError(f"Unknown sampling mode: {mode}. Expected one of {MODES}.")
    spec = experiment.sampler
    output_directory = Path(experiment.output.directory)
    dataset = experiment.build_dataset()
    denoiser = CountingDenoiser(experiment.build_denoiser(dataset))
    recorder = TrajectoryRecorder() if experiment.output.trajectory else None
    d = dataset.dimension

    if mode == "tada":
        samples = tada_sample(denoiser, spec.sampler_run(), d, recorder=recorder)
    else:
        schedule = spec.schedule(AugmentedConfig(n_vars=1, t_clamp_delta=spec.delta))
        samples = fm_baseline_sample(denoiser, schedule, spec.order, d, spec.seed, spec.batch, recorder=recorder)

    WriteResults.write_samples_csv(samples, output_directory / "samples.csv")
    WriteResults.write_run_meta(
        {
            "config": experiment.model_dump(mode="json"),
            "mode": mode,
            "nfe": denoiser.calls,
            "batch": spec.batch,
            "dimension": d,
            "version": __version__,
        },
        output_directory / "run_meta.json"
    )
    if recorder is not None:
        WriteResults.write_trajectory_csv(recorder, output_directory / "trajectory.csv")
    if experiment.output.plot:
        WriteResults.write_scatter_image(samples, output_directory / "samples.png", title=f"{mode}, NFE {denoiser.calls}")
    if experiment.metrics.names:
        scores = _score(experiment, samples, _reference_samples(experiment, dataset), mode)
        WriteResults.write_metrics_csv([(mode, name, value) for name, value in scores],
                                       output_directory / "metrics.csv")

    _logger.info(f"Finished {mode} run with {denoiser.calls} denoiser calls per sample")
    return RunResult(samples=samples, nfe=denoiser.calls, output_directory=output_directory)


def _respecified(experiment, directory, **changes):
    sampler = SamplerSpec.model_validate({**experiment.sampler.model_dump(), **changes})
    output = experiment.output.model_copy(update={"directory": directory})
    metrics = experiment.metrics.model_copy(update={"names": []})
    return experiment.model_copy(update={"sampler": sampler, "output": output, "metrics": metrics})


def run_sweep_nfe(experiment, nfe_list):
    if not nfe_list:
        raise ValueError("The NFE sweep needs at least one NFE value.")
    output_directory = Path(experiment.output.directory)
    runs = [_respecified(experiment, output_directory / f"nfe_{nfe}", steps=nfe - 1) for nfe in nfe_list]

    reference = _reference_samples(experiment, experiment.build_dataset())
    rows = []
    for nfe, run in zip(nfe_list, runs):
        _logger.info(f"NFE sweep: running NFE {nfe}")
        result = run_sample(run)
        rows.extend((nfe, name, value) for name, value in _score(experiment, result.samples, reference, f"nfe_{nfe}"))
    WriteResults.write_metrics_csv(rows, output_directory / "metrics.csv", key_columns=("nfe",))
    return rows


def run_sweep_k(experiment, k_list):
    """Samples once per k with the last prior variable's noise shared by every sample and every k."""
    if not k_list:
        raise ValueError("The k sweep needs at least one k value.")
    bad = [k for k in k_list if not k > 0]
    if bad:
        raise ValueError(f"Every k must be positive, got {bad}.")
    spec = experiment.sampler
    if spec.sigma0 is not None and np.count_nonzero(np.array(spec.sigma0) - np.diag(np.diag(spec.sigma0))):
        _logger.warning("The prior covariance is not diagonal, so sharing the last noise component does not fully "
                        "fix y_0.")

    output_directory = Path(experiment.output.directory)
    runs = [_respecified(experiment, output_directory / f"k_{k:g}", k_scale=k) for k in k_list]
    dataset = experiment.build_dataset()
    shared = (spec.n_vars - 1,)

    groups = []
    for k, run in zip(k_list, runs):
        _logger.info(f"k sweep: running k = {k}")
        denoiser = experiment.build_denoiser(dataset)
        samples = tada_sample(denoiser, run.sampler.sampler_run(shared_variables=shared), dataset.dimension)
        WriteResults.write_samples_csv(samples, run.output.directory / "samples.csv")
        if experiment.output.plot:
            WriteResults.write_scatter_image(samples, run.output.directory / "samples.png", title=f"k = {k:g}")
        groups.append(SampleBatch(samples=samples, label=f"k_{k:g}"))

    spreads = diversity_spread(groups)
    rows = [(k, "diversity_spread", spread) for k, spread in zip(k_list, spreads)]
    WriteResults.write_metrics_csv(rows, output_directory / "metrics.csv", key_columns=("k",))
    return spreads


def coefficient_row(config, t):
    bundle = coefficients(config, t)
    n_vars = config.n_vars
    row = {"t": float(t)}
    row.update({f"mu_{i}": bundle.mu[i] for i in range(n_vars)})
    row.update({f"sigma_{i}_{j}": bundle.sigma[i, j] for i in range(n_vars) for j in range(n_vars)})
    row.update({f"r_{i}": bundle.r[i] for i in range(n_vars)})
    row["gamma"] = bundle.gamma
    if t > 0:
        y_dyn = y_dyn_coefficients(config, t)
        row["gamma_dot"] = gamma_dot(config, t)
        row["alpha"] = y_dyn.alpha
        row["beta"] = y_dyn.beta
        row.update({f"w_{i}": y_dyn.w[i] for i in range(n_vars)})
    else:
        row["gamma_dot"] = 0.0
        row["alpha"] = math.nan
        row["beta"] = math.nan
        row.update({f"w_{i}": math.nan for i in range(n_vars)})
    return row


def dump_coeffs(n_vars, k_scale, times, delta, output_directory):
    config = AugmentedConfig(n_vars=n_vars, k_scale=k_scale, t_clamp_delta=delta)
    t_end = 1.0 - delta
    outside = [t for t in times if not 0 <= t <= t_end]
    if outside:
        raise ValueError(f"Times must lie in [0, {t_end}], got {outside}.")
    rows = [coefficient_row(config, t) for t in sorted(times)]
    return WriteResults.write_table_csv(rows, Path(output_directory) / "coeffs.csv"), rows
