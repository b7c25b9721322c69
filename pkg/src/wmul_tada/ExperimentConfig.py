"""
@Author = 'Michael Stanley'

The experiment file. It is JSON, validated strictly: unknown keys anywhere are an error. See README.md for the
layout and example_files/ for working examples.

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
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from wmul_tada.AugmentedDynamics import AugmentedConfig, MAX_VARS
from wmul_tada.BayesDenoisers import GaussianMixture, GaussianMixtureDenoiser, PointDataset, PointSetDenoiser, \
    checkerboard_points, ring_mixture
from wmul_tada.SampleMetrics import METRICS
from wmul_tada.TadaSampler import MAX_ORDER, SCHEMES, SamplerRun, ScheduleParams, make_schedule

import wmul_logger

_logger = wmul_logger.get_logger()


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GmmSpec(StrictModel):
    kind: Literal["gmm"]
    weights: list[float]
    means: list[list[float]]
    variances: list[list[float]]

    def build(self):
        return GaussianMixture(weights=self.weights, means=self.means, variances=self.variances)


class PointsetSpec(StrictModel):
    kind: Literal["pointset"]
    points: list[list[float]] = Field(min_length=1)

    def build(self):
        return PointDataset(points=self.points)


class RingSpec(StrictModel):
    kind: Literal["ring"]
    modes: int = Field(default=8, ge=1)
    radius: float = Field(default=2.0, gt=0)
    component_std: float = Field(default=0.1, gt=0)

    def build(self):
        return ring_mixture(modes=self.modes, radius=self.radius, component_std=self.component_std)


class CheckerboardSpec(StrictModel):
    kind: Literal["checkerboard"]
    n: int = Field(default=2048, ge=1)
    seed: int = Field(default=0, ge=0)

    def build(self):
        return checkerboard_points(n=self.n, seed=self.seed)


DatasetSpec = Annotated[Union[GmmSpec, PointsetSpec, RingSpec, CheckerboardSpec], Field(discriminator="kind")]


class SamplerSpec(StrictModel):
    n_vars: int = Field(default=2, ge=1, le=MAX_VARS)
    k_scale: float = Field(default=1.0, gt=0)
    sigma0: Optional[list[list[float]]] = None
    order: int = Field(default=3, ge=1, le=MAX_ORDER)
    scheme: str = "polynomial-t"
    power: float = Field(default=2.0, gt=0)
    steps: int = Field(default=15, ge=1)
    delta: float = Field(default=1e-3, gt=0, lt=0.5)
    t_floor: float = Field(default=1e-3, gt=0)
    seed: int = Field(default=0, ge=0)
    batch: int = Field(default=1000, ge=1)

    @field_validator("scheme")
    @classmethod
    def _known_scheme(cls, value):
        if value not in SCHEMES:
            raise ValueError(f"Unknown schedule scheme: {value}. Expected one of {SCHEMES}.")
        return value

    @model_validator(mode="after")
    def _order_fits_steps(self):
        if self.steps < self.order:
            raise ValueError(f"steps ({self.steps}) must be at least the solver order ({self.order}).")
        return self

    @property
    def nfe(self):
        return self.steps + 1

    def augmented_config(self):
        base = None if self.sigma0 is None else np.array(self.sigma0, dtype=float)
        return AugmentedConfig(n_vars=self.n_vars, k_scale=self.k_scale, t_clamp_delta=self.delta,
                               base_sigma0=base)

    def schedule(self, config=None):
        config = config or self.augmented_config()
        params = ScheduleParams(power=self.power, t_floor=self.t_floor, order=self.order, config=config)
        return make_schedule(self.scheme, self.steps, params=params, delta=self.delta)

    def sampler_run(self, shared_variables=()):
        config = self.augmented_config()
        return SamplerRun(config=config, schedule=self.schedule(config), order=self.order, seed=self.seed,
                          batch=self.batch, shared_variables=tuple(shared_variables))


class MetricsSpec(StrictModel):
    names: list[str] = Field(default_factory=list)
    projections: int = Field(default=128, ge=1)
    reference_size: int = Field(default=10_000, ge=2)

    @field_validator("names")
    @classmethod
    def _known_metrics(cls, value):
        unknown = [name for name in value if name not in METRICS]
        if unknown:
            raise ValueError(f"Unknown metrics: {unknown}. Expected names from {sorted(METRICS)}.")
        return value


class OutputSpec(StrictModel):
    directory: Path = Path(".")
    trajectory: bool = False
    plot: bool = False


class ExperimentConfig(StrictModel):
    dataset: DatasetSpec
    sampler: SamplerSpec = Field(default_factory=SamplerSpec)
    metrics: MetricsSpec = Field(default_factory=MetricsSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)

    def build_dataset(self):
        return self.dataset.build()

    def build_denoiser(self, dataset=None):
        dataset = dataset if dataset is not None else self.build_dataset()
        if isinstance(dataset, GaussianMixture):
            return GaussianMixtureDenoiser(dataset)
        return PointSetDenoiser(dataset)

    def with_overrides(self, seed=None, out=None):
        update = {}
        if seed is not None:
            update["sampler"] = self.sampler.model_copy(update={"seed": seed})
        if out is not None:
            update["output"] = self.output.model_copy(update={"directory": Path(out)})
        return self.model_copy(update=update)


def load_experiment_config(file_name):
    file_name = Path(file_name)
    _logger.debug(f"Loading experiment config from {file_name}")
    experiment = ExperimentConfig.model_validate_json(file_name.read_text())
    _logger.info(f"Loaded experiment config: {experiment}")
    return experiment
