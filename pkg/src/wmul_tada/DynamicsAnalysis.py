"""
@Author = 'Michael Stanley'

Executable checks of the identities behind the sampler: how the network input y evolves along a conditional
trajectory, the split of that evolution into a part driven by (y, x_1) and a whitened residual channel, the
reparameterization of the N-variable regression loss, and the equivalence between conditioning on the full
augmented state and conditioning on y alone.

All Monte Carlo helpers take a caller-supplied numpy Generator and work on scalar data (d = 1).

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

import numpy as np
from scipy import linalg
from scipy.integrate import trapezoid
from scipy.special import logsumexp
from scipy.stats import norm

from wmul_tada.AugmentedDynamics import AugmentedState, coefficients, controlled_transition, hat_matrices, \
    mean_vector, precision_solve, project_y, whiten
from wmul_tada.BayesDenoisers import DenoiseQuery, gmm_posterior_mean, snr_to_sigma

import wmul_logger

_logger = wmul_logger.get_logger()


def _require_open_interval(t, name):
    if not 0 < t < 1:
        raise ValueError(f"{name} requires 0 < t < 1, got {t}.")


def gamma_dot(config, t):
    _require_open_interval(t, "gamma_dot")
    bundle = coefficients(config, t)
    _, b_hat = hat_matrices(config.n_vars, t)
    # Sigma^-1 mu = gamma r
    return 2.0 * bundle.gamma * (b_hat @ bundle.r)


def y_dot_exact(state, x1, config):
    """
    dy/dt along the conditional flow dx/dt = A_hat x + b_hat x_1:
    (b_hat^T Sigma^-1 x + x_1 mu^T Sigma^-1 b_hat) / gamma - y gamma_dot / gamma.
    """
    t = state.t
    _require_open_interval(t, "y_dot_exact")
    bundle = coefficients(config, t)
    _, b_hat = hat_matrices(config.n_vars, t)
    sigma_inv_b = precision_solve(config, t, b_hat)
    gamma = bundle.gamma
    mu_sigma_inv_b = gamma * (b_hat @ bundle.r)
    g_dot = 2.0 * mu_sigma_inv_b
    y = project_y(state, bundle.r)
    drive = np.einsum("n,...nd->...d", sigma_inv_b, state.vars) + np.asarray(x1) * mu_sigma_inv_b
    return drive / gamma - y * g_dot / gamma


@dataclass(frozen=True, eq=False)
class YDynCoefficients:
    t: float
    alpha: float
    beta: float
    w: np.ndarray
    e: np.ndarray
    perp_cov: np.ndarray


def y_dyn_coefficients(config, t):
    """
    dy/dt = alpha y + beta x_1 + w^T P eps along x_t = mu x_1 + root eps, with P = perp_cov. Sigma r = mu / gamma,
    r^T mu = 1 and r^T Sigma r = 1 / gamma turn the general alpha = e^T Sigma r / r^T Sigma r - gamma_dot / gamma
    and beta = e^T mu into -b_hat^T r and b_hat^T r.
    """
    _require_open_interval(t, "y_dyn_coefficients")
    bundle = coefficients(config, t)
    _, b_hat = hat_matrices(config.n_vars, t)
    gamma = bundle.gamma

    whitened_b = whiten(config, t, b_hat)
    e = precision_solve(config, t, b_hat) / gamma
    drive = b_hat @ bundle.r
    g_dot = 2.0 * gamma * drive
    alpha = drive - g_dot / gamma
    beta = drive

    whitened_r = bundle.whitened_r
    perp_cov = np.eye(config.n_vars) - np.outer(whitened_r, whitened_r) / (whitened_r @ whitened_r)
    return YDynCoefficients(t=float(t), alpha=float(alpha), beta=float(beta), w=whitened_b / gamma, e=e,
                            perp_cov=perp_cov)


def whitened_decomposition(mu, sigma, r, e, x1, x):
    """
    Splits z = e^T x into the part fixed by (x_1, y = r^T x) and a residual. Returns (z_pred, z_actual); the
    difference is the residual channel, independent of y under x = mu x_1 + L eps.
    """
    mu, sigma, r, e = (np.asarray(a, dtype=float) for a in (mu, sigma, r, e))
    x = np.asarray(x, dtype=float)
    r_sigma_r = r @ sigma @ r
    coupling = e @ sigma @ r / r_sigma_r
    offset = e @ (mu - sigma @ r * (r @ mu) / r_sigma_r)
    z_actual = x @ e
    z_pred = offset * np.asarray(x1) + coupling * (x @ r)
    return z_pred, z_actual


def conditional_trajectory(config, x0, x1, t):
    """The exact solution at t of the conditional flow, started from x0 (shape (..., N, d)) at t = 0."""
    phi = controlled_transition(config.n_vars, t)
    mu = mean_vector(config.n_vars, t)
    x0 = np.asarray(x0, dtype=float)
    return np.einsum("km,...md->...kd", phi, x0) + mu[:, None] * np.asarray(x1)[..., None, :]


def _conditional_draws(bundle, x1, draws, rng):
    eps = rng.standard_normal((draws, bundle.mu.size))
    x = bundle.mu * x1 + eps @ bundle.root.T
    return eps, x


@dataclass(frozen=True)
class YDynamicsResidual:
    max_discrepancy: float
    residual_variance: float
    predicted_variance: float

    @property
    def variance_ratio(self):
        if self.predicted_variance == 0:
            return math.nan
        return self.residual_variance / self.predicted_variance


def y_dynamics_residual(config, t, x1, draws, rng):
    """
    Draws x = mu x_1 + L eps, and compares dy/dt - alpha y - beta x_1 with w^T P eps, where P is perp_cov.
    max_discrepancy is relative to the largest |dy/dt|.
    """
    bundle = coefficients(config, t)
    coeffs = y_dyn_coefficients(config, t)
    eps, x = _conditional_draws(bundle, x1, draws, rng)
    state = AugmentedState(vars=x[:, :, None], t=t)

    y_dot = y_dot_exact(state, np.full((draws, 1), x1), config)[:, 0]
    y = project_y(state, bundle.r)[:, 0]
    residual = y_dot - coeffs.alpha * y - coeffs.beta * x1
    channel = eps @ (coeffs.perp_cov @ coeffs.w)

    scale = max(1.0, float(np.max(np.abs(y_dot))))
    predicted_variance = float(coeffs.w @ coeffs.perp_cov @ coeffs.w)
    if predicted_variance < 1e-14 * max(1.0, float(coeffs.w @ coeffs.w)):
        predicted_variance = 0.0
    return YDynamicsResidual(
        max_discrepancy=float(np.max(np.abs(residual - channel))) / scale,
        residual_variance=float(np.var(residual)),
        predicted_variance=predicted_variance
    )


@dataclass(frozen=True)
class WhitenedNoiseStatistics:
    covariance_error: float
    correlation: float


def whitened_noise_statistics(config, t, draws, rng, x1=0.0):
    bundle = coefficients(config, t)
    coeffs = y_dyn_coefficients(config, t)
    eps, x = _conditional_draws(bundle, x1, draws, rng)
    eps_perp = eps @ coeffs.perp_cov
    empirical = eps_perp.T @ eps_perp / draws
    covariance_error = float(np.max(np.abs(empirical - coeffs.perp_cov)))

    y = x @ bundle.r
    channel = eps_perp @ coeffs.w
    if np.std(channel) == 0 or np.std(y) == 0:
        correlation = 0.0
    else:
        correlation = float(np.corrcoef(y, channel)[0, 1])
    return WhitenedNoiseStatistics(covariance_error=covariance_error, correlation=correlation)


def mdm_loss_reparam(n_vars, t, L, mu):
    """a = L^-T e_(N-1) and b = a^T mu, so that eps^(N-1) = a^T x_t - b x_1."""
    L = np.asarray(L, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if L.shape != (n_vars, n_vars) or mu.shape != (n_vars,):
        raise ValueError(f"Expected a {n_vars}x{n_vars} factor and a length {n_vars} mean, got {L.shape} and "
                         f"{mu.shape}.")
    if not np.allclose(L, np.tril(L)):
        raise ValueError("The factor must be lower triangular.")
    if np.any(np.diag(L) == 0):
        raise ValueError(f"The factor is singular at t = {t}.")
    last = np.zeros(n_vars)
    last[-1] = 1.0
    a = linalg.solve_triangular(L, last, lower=True, trans="T")
    return a, float(a @ mu)


@dataclass(frozen=True)
class N2LossCoefficients:
    eps: float
    x0: float
    x1: float
    loss_weight: float
    denominator: float

    def target(self, eps, x0, x1):
        """The x_1 regression target rebuilt from a noise prediction and the two state variables."""
        return self.eps * eps + self.x0 * x0 + self.x1 * x1


def n2_loss_coeffs(Lxx, Lxv, Lvv, mu0, mu1):
    """
    With L = [[Lxx, 0], [Lxv, Lvv]] and kappa = Lxv / Lxx the data point is recovered as
    x_1 = (Lvv eps - x^(1) + kappa x^(0)) / (kappa mu^(0) - mu^(1)).
    """
    if Lxx == 0 or Lvv == 0:
        raise ValueError(f"Both diagonal entries of the factor must be non-zero, got {Lxx} and {Lvv}.")
    kappa = Lxv / Lxx
    denominator = kappa * mu0 - mu1
    if abs(denominator) <= 1e-14 * max(abs(kappa * mu0), abs(mu1), 1e-300):
        raise ValueError(f"The loss reparameterization is degenerate: kappa * mu0 = mu1 = {mu1}.")
    return N2LossCoefficients(
        eps=Lvv / denominator,
        x0=kappa / denominator,
        x1=-1.0 / denominator,
        loss_weight=denominator ** 2 / Lvv ** 2,
        denominator=denominator
    )


def _require_scalar_mixture(gmm):
    if gmm.dimension != 1:
        raise ValueError(f"Posterior equivalence is checked on 1-D data, got dimension {gmm.dimension}.")


def full_state_posterior_mean(gmm, bundle, x):
    """E[x_1 | x_t] by joint-Gaussian conditioning on the whole N-vector, per mixture component."""
    mu, sigma = bundle.mu, bundle.sigma
    n_vars = mu.size
    log_terms = []
    means = []
    for weight, mean, variance in zip(gmm.weights, gmm.means[:, 0], gmm.variances[:, 0]):
        joint = variance * np.outer(mu, mu) + sigma
        factor = linalg.cho_factor(joint, lower=True)
        centered = x - mu * mean
        solved = linalg.cho_solve(factor, centered.T).T
        log_det = 2.0 * np.sum(np.log(np.diag(factor[0])))
        log_terms.append(math.log(weight) - 0.5 * np.sum(centered * solved, axis=1) - 0.5 * log_det
                         - 0.5 * n_vars * math.log(2.0 * math.pi))
        means.append(mean + variance * solved @ mu)
    log_terms = np.stack(log_terms, axis=1)
    resp = np.exp(log_terms - logsumexp(log_terms, axis=1, keepdims=True))
    return np.sum(resp * np.stack(means, axis=1), axis=1)


def posterior_mean_by_quadrature(gmm, bundle, x, grid_points=100_001, chunk=64):
    """E[x_1 | x_t] by trapezoid integration of prior times likelihood over a grid in x_1."""
    _require_scalar_mixture(gmm)
    stds = np.sqrt(gmm.variances[:, 0])
    grid = np.linspace(np.min(gmm.means[:, 0] - 12 * stds), np.max(gmm.means[:, 0] + 12 * stds), grid_points)
    log_prior = logsumexp(np.log(gmm.weights)[:, None] + norm.logpdf(grid[None, :], gmm.means, stds[:, None]),
                          axis=0)
    projected = x @ (bundle.gamma * bundle.r)
    results = np.empty(len(x))
    for start in range(0, len(x), chunk):
        stop = start + chunk
        log_weight = log_prior[None, :] - 0.5 * bundle.gamma * grid[None, :] ** 2 \
            + projected[start:stop, None] * grid[None, :]
        weight = np.exp(log_weight - np.max(log_weight, axis=1, keepdims=True))
        results[start:stop] = trapezoid(weight * grid, grid, axis=1) / trapezoid(weight, grid, axis=1)
    return results


@dataclass(frozen=True)
class PosteriorComparison:
    against_y: float
    against_quadrature: float


def compare_posteriors(gmm, config, t, trials, rng, with_quadrature=False):
    _require_scalar_mixture(gmm)
    if config.n_vars > 3:
        raise ValueError(f"Posterior equivalence is checked for N <= 3, got {config.n_vars}.")
    _require_open_interval(t, "posterior_equivalence_check")

    bundle = coefficients(config, t)
    x1 = gmm.sample(trials, rng)[:, 0]
    eps = rng.standard_normal((trials, config.n_vars))
    x = np.outer(x1, bundle.mu) + eps @ bundle.root.T

    full = full_state_posterior_mean(gmm, bundle, x)
    y = x @ bundle.r
    reduced = gmm_posterior_mean(gmm, DenoiseQuery(y=y[:, None], sigma_bar=snr_to_sigma(bundle.gamma), t=t))[:, 0]
    against_quadrature = math.nan
    if with_quadrature:
        against_quadrature = float(np.max(np.abs(posterior_mean_by_quadrature(gmm, bundle, x) - full)))
    return PosteriorComparison(against_y=float(np.max(np.abs(full - reduced))),
                               against_quadrature=against_quadrature)


def posterior_equivalence_check(gmm, config, t, trials, rng):
    """Max |E[x_1 | x_t] - E[x_1 | y_t]| over random draws of x_t."""
    return compare_posteriors(gmm, config, t, trials, rng).against_y
