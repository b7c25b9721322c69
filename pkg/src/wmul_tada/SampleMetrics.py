"""
@Author = 'Michael Stanley'

Distances between sample batches (sliced Wasserstein-2 and energy distance) and the within-group spread used
for the diversity experiment.

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
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

import wmul_logger

_logger = wmul_logger.get_logger()

ENERGY_SUBSAMPLE_CAP = 4096


@dataclass(frozen=True, eq=False)
class SampleBatch:
    samples: np.ndarray
    label: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise ValueError(f"A sample batch needs shape (n, d) with n >= 1, got {samples.shape}.")
        object.__setattr__(self, "samples", samples)

    @property
    def dimension(self):
        return self.samples.shape[1]

    def __len__(self):
        return self.samples.shape[0]


def _require_same_dimension(a, b):
    if a.dimension != b.dimension:
        raise ValueError(f"Sample batches {a.label!r} and {b.label!r} have dimensions {a.dimension} and "
                         f"{b.dimension}.")


def wasserstein2_squared_1d(u, v):
    """Exact W2^2 between two 1-D empirical distributions, matching quantiles over merged breakpoints."""
    u = np.sort(u)
    v = np.sort(v)
    levels = np.union1d(np.arange(1, u.size + 1) / u.size, np.arange(1, v.size + 1) / v.size)
    widths = np.diff(levels, prepend=0.0)
    middles = levels - widths / 2.0
    u_at = u[np.minimum((middles * u.size).astype(int), u.size - 1)]
    v_at = v[np.minimum((middles * v.size).astype(int), v.size - 1)]
    return float(np.sum(widths * (u_at - v_at) ** 2))


def sliced_wasserstein2(a, b, projections=128, seed=0):
    _require_same_dimension(a, b)
    if projections < 1:
        raise ValueError(f"Need at least one projection, got {projections}.")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((projections, a.dimension))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    projected_a = a.samples @ directions.T
    projected_b = b.samples @ directions.T
    squared = [wasserstein2_squared_1d(projected_a[:, p], projected_b[:, p]) for p in range(projections)]
    return float(np.sqrt(np.mean(squared)))


def _subsample(samples, rng):
    if samples.shape[0] <= ENERGY_SUBSAMPLE_CAP:
        return samples
    return samples[rng.choice(samples.shape[0], size=ENERGY_SUBSAMPLE_CAP, replace=False)]


def energy_distance(a, b, seed=0):
    """2 E|X - Y| - E|X - X'| - E|Y - Y'|, each batch capped at ENERGY_SUBSAMPLE_CAP rows."""
    _require_same_dimension(a, b)
    rng = np.random.default_rng(seed)
    x = _subsample(a.samples, rng)
    y = _subsample(b.samples, rng)
    value = 2.0 * cdist(x, y).mean() - cdist(x, x).mean() - cdist(y, y).mean()
    return max(0.0, float(value))


def diversity_spread(groups):
    spreads = []
    for group in groups:
        if len(group) < 2:
            raise ValueError(f"Group {group.label!r} needs at least two samples to measure spread.")
        spreads.append(float(pdist(group.samples).mean()))
    return spreads


METRICS = {
    "sliced_w2": lambda a, b, projections, seed: sliced_wasserstein2(a, b, projections=projections, seed=seed),
    "energy": lambda a, b, projections, seed: energy_distance(a, b, seed=seed),
}
