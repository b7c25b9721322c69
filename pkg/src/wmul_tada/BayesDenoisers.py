"""
@Author = 'Michael Stanley'

Data-prediction denoisers. A denoiser takes a DenoiseQuery (the reweighted input y and its effective noise level
sigma_bar = 1 / sqrt(gamma)) and returns an estimate of E[x_1 | y]. The analytic ones here are exact posterior
means for axis-aligned Gaussian mixtures and for finite point sets, and stand in for pretrained networks.

ModelTimeDenoiser adapts an external model trained under the flow-matching, variance-preserving or EDM
convention by mapping the effective SNR onto that model's time conditioning and input scaling.

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
from typing import Callable, Optional, Protocol

import numpy as np
from scipy.optimize import brentq
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

import wmul_logger

_logger = wmul_logger.get_logger()

CONVENTIONS = ("fm", "vp", "edm-sigma")


@dataclass(frozen=True, eq=False)
class DenoiseQuery:
    y: np.ndarray
    sigma_bar: float
    t: float = 0.0

    def __post_init__(self):
        if math.isnan(self.sigma_bar) or self.sigma_bar < 0:
            raise ValueError(f"sigma_bar must be >= 0 or infinite, got {self.sigma_bar}.")
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))


class Denoiser(Protocol):
    def __call__(self, query: DenoiseQuery) -> np.ndarray:
        ...


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        variances = np.atleast_2d(np.asarray(self.variances, dtype=float))
        if weights.ndim != 1 or weights.size == 0:
            raise ValueError("A Gaussian mixture needs a non-empty list of weights.")
        if np.any(weights <= 0):
            raise ValueError(f"Mixture weights must be positive, got {weights}.")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"Mixture weights must sum to 1, they sum to {weights.sum()}.")
        if means.shape[0] != weights.size or variances.shape != means.shape:
            raise ValueError(f"Mixture shapes disagree: weights {weights.shape}, means {means.shape}, "
                             f"variances {variances.shape}.")
        if np.any(variances <= 0):
            raise ValueError("Mixture variances must be positive.")
        for array in (weights, means, variances):
            array.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def dimension(self):
        return self.means.shape[1]

    def mean(self):
        return self.weights @ self.means

    def sample(self, count, rng):
        components = rng.choice(self.weights.size, size=count, p=self.weights)
        noise = rng.standard_normal((count, self.dimension))
        return self.means[components] + np.sqrt(self.variances[components]) * noise


@dataclass(frozen=True, eq=False)
class PointDataset:
    points: np.ndarray

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if points.shape[0] == 0:
            raise ValueError("A point dataset must not be empty.")
        if not np.all(np.isfinite(points)):
            raise ValueError("A point dataset must only contain finite entries.")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @property
    def dimension(self):
        return self.points.shape[1]

    def mean(self):
        return self.points.mean(axis=0)

    def sample(self, count, rng):
        return self.points[rng.integers(0, self.points.shape[0], size=count)]


def ring_mixture(modes=8, radius=2.0, component_std=0.1):
    if modes < 1:
        raise ValueError(f"A ring needs at least one mode, got {modes}.")
    angles = 2.0 * np.pi * np.arange(modes) / modes
    means = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return GaussianMixture(
        weights=np.full(modes, 1.0 / modes),
        means=means,
        variances=np.full_like(means, component_std ** 2)
    )


def checkerboard_points(n, seed=0):
    """n points spread uniformly over the dark cells of a 4x4 board covering [-2, 2]^2."""
    if n < 1:
        raise ValueError(f"A checkerboard needs at least one point, got {n}.")
    rng = np.random.default_rng(seed)
    dark_cells = np.array([(i, j) for i in range(4) for j in range(4) if (i + j) % 2 == 0], dtype=float)
    chosen = dark_cells[rng.integers(0, len(dark_cells), size=n)]
    return PointDataset(points=chosen - 2.0 + rng.random((n, 2)))


def _as_batch(y):
    y = np.asarray(y, dtype=float)
    return y.reshape(-1, y.shape[-1]), y.shape


def gmm_posterior_mean(gmm, query):
    y = query.y
    if math.isinf(query.sigma_bar):
        return np.broadcast_to(gmm.mean(), y.shape).copy()
    if query.sigma_bar == 0:
        return y.copy()

    noise_var = query.sigma_bar ** 2
    total_var = gmm.variances + noise_var
    diff = y[..., None, :] - gmm.means
    log_resp = np.log(gmm.weights) - 0.5 * np.sum(np.log(2.0 * np.pi * total_var) + diff ** 2 / total_var, axis=-1)
    resp = np.exp(log_resp - logsumexp(log_resp, axis=-1, keepdims=True))
    component_means = (gmm.variances * y[..., None, :] + noise_var * gmm.means) / total_var
    return np.einsum("...k,...kd->...d", resp, component_means)


def pointset_posterior_mean(data, query):
    y_flat, shape = _as_batch(query.y)
    if math.isinf(query.sigma_bar):
        return np.broadcast_to(data.mean(), shape).copy()
    squared = cdist(y_flat, data.points, "sqeuclidean")
    if query.sigma_bar == 0:
        return data.points[np.argmin(squared, axis=1)].reshape(shape)
    logits = -squared / (2.0 * query.sigma_bar ** 2)
    resp = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
    return (resp @ data.points).reshape(shape)


def snr_to_sigma(gamma):
    if math.isnan(gamma) or gamma < 0:
        raise ValueError(f"The effective SNR must be non-negative, got {gamma}.")
    if gamma == 0:
        return math.inf
    return 1.0 / math.sqrt(gamma)


@dataclass(frozen=True)
class VpCurve:
    """A variance-preserving noise curve. Model time 0 is clean data and model time 1 is pure noise."""
    kind: str
    beta_min: Optional[float] = None
    beta_max: Optional[float] = None
    cosine_s: float = 0.008

    _EDGE = 1e-9

    def __post_init__(self):
        if self.kind == "linear":
            if self.beta_min is None or self.beta_max is None:
                raise ValueError("A linear VP curve needs both beta_min and beta_max.")
            if not 0 <= self.beta_min < self.beta_max:
                raise ValueError(f"A linear VP curve needs 0 <= beta_min < beta_max, got {self.beta_min}, "
                                 f"{self.beta_max}.")
        elif self.kind == "cosine":
            if not self.cosine_s > 0:
                raise ValueError(f"cosine_s must be positive, got {self.cosine_s}.")
        else:
            raise ValueError(f"Unknown VP curve kind: {self.kind}.")

    def log_snr(self, model_time):
        if self.kind == "linear":
            integral = self.beta_min * model_time + 0.5 * (self.beta_max - self.beta_min) * model_time ** 2
            return -integral - math.log(-math.expm1(-integral))
        angle = (model_time + self.cosine_s) / (1 + self.cosine_s) * math.pi / 2
        start = self.cosine_s / (1 + self.cosine_s) * math.pi / 2
        alpha_bar = (math.cos(angle) / math.cos(start)) ** 2
        return math.log(alpha_bar) - math.log1p(-alpha_bar)

    def time_for_snr(self, gamma):
        if gamma == 0:
            return 1.0
        if math.isinf(gamma):
            return 0.0
        target = math.log(gamma)
        low, high = self._EDGE, 1.0 - self._EDGE
        if self.log_snr(low) <= target:
            return 0.0
        if self.log_snr(high) >= target:
            return 1.0
        return brentq(lambda tau: self.log_snr(tau) - target, low, high, xtol=1e-14, rtol=1e-12)


def snr_to_model_time(gamma, convention, vp_curve=None):
    if convention not in CONVENTIONS:
        raise ValueError(f"Unknown model convention: {convention}. Expected one of {CONVENTIONS}.")
    if math.isnan(gamma) or gamma < 0:
        raise ValueError(f"The effective SNR must be non-negative, got {gamma}.")
    if convention == "fm":
        if math.isinf(gamma):
            return 1.0
        root = math.sqrt(gamma)
        return root / (1.0 + root)
    if convention == "edm-sigma":
        return snr_to_sigma(gamma)
    if vp_curve is None:
        raise ValueError("The vp convention needs an explicit VpCurve.")
    return vp_curve.time_for_snr(gamma)


def snr_to_input_scale(gamma, convention):
    """The factor taking y = x_1 + sigma_bar * eps onto the model's own noisy input."""
    if gamma == 0 or math.isinf(gamma):
        return 1.0
    if convention == "fm":
        return snr_to_model_time(gamma, "fm")
    if convention == "vp":
        return math.sqrt(gamma / (1.0 + gamma))
    return 1.0


@dataclass(frozen=True, eq=False)
class GaussianMixtureDenoiser:
    gmm: GaussianMixture

    def __call__(self, query):
        return gmm_posterior_mean(self.gmm, query)


@dataclass(frozen=True, eq=False)
class PointSetDenoiser:
    data: PointDataset

    def __call__(self, query):
        return pointset_posterior_mean(self.data, query)


@dataclass(frozen=True, eq=False)
class ConstantDenoiser:
    value: np.ndarray

    def __call__(self, query):
        return np.broadcast_to(np.asarray(self.value, dtype=float), query.y.shape).copy()


@dataclass(frozen=True, eq=False)
class ModelTimeDenoiser:
    model: Callable[[np.ndarray, float], np.ndarray]
    convention: str
    vp_curve: Optional[VpCurve] = None

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ValueError(f"Unknown model convention: {self.convention}.")
        if self.convention == "vp" and self.vp_curve is None:
            raise ValueError("The vp convention needs an explicit VpCurve.")

    def __call__(self, query):
        gamma = 0.0 if math.isinf(query.sigma_bar) else (
            math.inf if query.sigma_bar == 0 else query.sigma_bar ** -2)
        model_time = snr_to_model_time(gamma, self.convention, self.vp_curve)
        scale = snr_to_input_scale(gamma, self.convention)
        return self.model(scale * query.y, model_time)


class CountingDenoiser:

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def __call__(self, query):
        self.calls += 1
        return self.inner(query)
