"""
@Author = 'Michael Stanley'

The registered numerical checks behind `wmul_tada verify`. Each check measures one observed value (an error, a
z-score, a count) and passes when that value is at or below its tolerance. Closed forms are compared against
independent integrations, identities are evaluated over the N / k / t grid, and the statistical claims are
checked by seeded Monte Carlo.

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
import fnmatch
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial
from scipy import linalg
from scipy.integrate import solve_ivp, trapezoid
from scipy.special import factorial

from wmul_tada.AugmentedDynamics import AugmentedConfig, AugmentedState, coefficients, controlled_transition, \
    controlled_transition_determinant, hat_matrices, project_y, shift_transition
from wmul_tada.BayesDenoisers import GaussianMixture, GaussianMixtureDenoiser
from wmul_tada.DynamicsAnalysis import compare_posteriors, conditional_trajectory, gamma_dot, mdm_loss_reparam, \
    n2_loss_coeffs, whitened_decomposition, whitened_noise_statistics, y_dot_exact, y_dyn_coefficients, \
    y_dynamics_residual
from wmul_tada.TadaSampler import HistoryCache, SamplerRun, ScheduleParams, fm_baseline_sample, make_schedule, \
    psi_integral, tada_sample

import wmul_logger

_logger = wmul_logger.get_logger()

GRID_N = (1, 2, 3, 4)
GRID_K = (0.1, 1.0, 10.0)
GRID_T = (0.1, 0.3, 0.5, 0.7, 0.9)
VERIFY_SEED = 20261018
FINITE_DIFFERENCE_STEP = 1e-6


@dataclass(frozen=True)
class VerifyCheck:
    name: str
    tolerance: float
    measure: Callable[[], float]


@dataclass(frozen=True)
class CheckResult:
    name: str
    tolerance: float
    observed: float
    passed: bool


def _grid_configs(n_values=GRID_N, k_values=GRID_K):
    for n_vars in n_values:
        for k_scale in k_values:
            yield AugmentedConfig.default_family(n_vars, k_scale=k_scale)


def _relative_error(observed, expected):
    expected = np.asarray(expected, dtype=float)
    return float(np.max(np.abs(np.asarray(observed) - expected)) / max(1.0, float(np.max(np.abs(expected)))))


def _two_mode_mixture():
    return GaussianMixture(weights=[0.5, 0.5], means=[[-1.0], [1.0]], variances=[[0.25], [0.25]])


def _rng(offset=0):
    return np.random.default_rng(VERIFY_SEED + offset)


def _integrate_flow(n_vars, sigma0s):
    """Integrates Phi, mu (with x_1 = 1) and one Sigma per prior from t = 0, reporting at GRID_T."""
    size = n_vars * n_vars

    def rhs(t, packed):
        a_hat, b_hat = hat_matrices(n_vars, t)
        phi = packed[:size].reshape(n_vars, n_vars)
        mu = packed[size:size + n_vars]
        sigmas = packed[size + n_vars:].reshape(-1, n_vars, n_vars)
        d_sigmas = a_hat @ sigmas + sigmas @ a_hat.T
        return np.concatenate([(a_hat @ phi).ravel(), a_hat @ mu + b_hat, d_sigmas.ravel()])

    start = np.concatenate([np.eye(n_vars).ravel(), np.zeros(n_vars), np.stack(sigma0s).ravel()])
    solution = solve_ivp(rhs, (0.0, GRID_T[-1]), start, method="DOP853", t_eval=GRID_T, rtol=1e-12, atol=1e-12)
    if not solution.success:
        raise ArithmeticError(f"ODE integration failed for N = {n_vars}: {solution.message}")

    for column, t in enumerate(solution.t):
        packed = solution.y[:, column]
        phi = packed[:size].reshape(n_vars, n_vars)
        mu = packed[size:size + n_vars]
        sigmas = packed[size + n_vars:].reshape(-1, n_vars, n_vars)
        yield t, phi, mu, sigmas


def _closed_form_errors(part):
    errors = []
    for n_vars in GRID_N:
        configs = [AugmentedConfig.default_family(n_vars, k_scale=k) for k in GRID_K]
        for t, phi, mu, sigmas in _integrate_flow(n_vars, [config.sigma0 for config in configs]):
            if part == "transition":
                errors.append(_relative_error(controlled_transition(n_vars, t), phi))
            elif part == "mean":
                errors.append(_relative_error(coefficients(configs[0], t).mu, mu))
            else:
                errors.extend(_relative_error(coefficients(config, t).sigma, sigma)
                              for config, sigma in zip(configs, sigmas))
    return max(errors)


def _shift_semigroup():
    errors = []
    for n_vars in range(1, 9):
        for a in (0.1, 0.35, 0.7):
            for b in (0.05, 0.2, 0.6):
                combined = shift_transition(n_vars, a) @ shift_transition(n_vars, b)
                errors.append(_relative_error(combined, shift_transition(n_vars, a + b)))
    return max(errors)


def _transition_determinant():
    return max(
        abs(np.linalg.det(controlled_transition(n_vars, t)) - controlled_transition_determinant(n_vars, t))
        for n_vars in GRID_N for t in GRID_T
    )


def _backward_error(matrix, solution, rhs):
    """Componentwise backward error of matrix @ solution = rhs."""
    residual = np.abs(matrix @ solution - rhs)
    scale = np.abs(matrix) @ np.abs(solution) + np.abs(rhs)
    return float(np.max(residual / scale))


def _reweight_identities():
    """
    r^T mu = 1, gamma |root^T r|^2 = 1, and Sigma (gamma r) = mu as a backward error. The plain product
    gamma r^T Sigma r sums terms up to 1e11 times larger than 1 / gamma on this grid, so its rounding alone
    exceeds the tolerance.
    """
    worst = 0.0
    for config in _grid_configs():
        for t in GRID_T:
            bundle = coefficients(config, t)
            worst = max(worst, abs(bundle.r @ bundle.mu - 1.0),
                        abs(bundle.gamma * (bundle.whitened_r @ bundle.whitened_r) - 1.0),
                        _backward_error(bundle.sigma, bundle.gamma * bundle.r, bundle.mu))
    return worst


def _gamma_monotone():
    """Number of non-increasing steps of gamma along a 50-step polynomial schedule."""
    failures = 0
    for config in _grid_configs():
        schedule = make_schedule("polynomial-t", 50, ScheduleParams(power=2.0), delta=config.t_clamp_delta)
        gammas = np.array([coefficients(config, t).gamma for t in schedule.times])
        failures += int(np.count_nonzero(np.diff(gammas) <= 0))
    return failures


def _projection_draws(config, t, draws, rng, x1):
    bundle = coefficients(config, t)
    eps = rng.standard_normal((draws, config.n_vars))
    x = bundle.mu * x1 + eps @ bundle.root.T
    return bundle, x @ bundle.r


def _y_projection_mean():
    """Largest z-score of the sample mean of y around x_1, in units of sigma_bar / sqrt(M)."""
    draws = 1_000_000
    rng = _rng(1)
    worst = 0.0
    for config in _grid_configs():
        for t in (0.1, 0.5, 0.9):
            bundle, y = _projection_draws(config, t, draws, rng, x1=0.7)
            sigma_bar = 1.0 / math.sqrt(bundle.gamma)
            worst = max(worst, abs(y.mean() - 0.7) * math.sqrt(draws) / sigma_bar)
    return worst


def _y_projection_variance():
    draws = 1_000_000
    rng = _rng(2)
    worst = 0.0
    for config in _grid_configs():
        for t in (0.1, 0.5, 0.9):
            bundle, y = _projection_draws(config, t, draws, rng, x1=0.7)
            worst = max(worst, abs(np.var(y) * bundle.gamma - 1.0))
    return worst


def _gamma_dot_finite_difference():
    h = FINITE_DIFFERENCE_STEP
    worst = 0.0
    for config in _grid_configs():
        for t in GRID_T:
            numeric = (coefficients(config, t + h).gamma - coefficients(config, t - h).gamma) / (2.0 * h)
            exact = gamma_dot(config, t)
            worst = max(worst, abs(numeric - exact) / abs(exact))
    return worst


def _y_dot_exact_vs_trajectory():
    h = FINITE_DIFFERENCE_STEP
    rng = _rng(3)
    worst = 0.0
    for config in _grid_configs():
        x0 = np.einsum("nm,bmd->bnd", config.prior_factor, rng.standard_normal((8, config.n_vars, 1)))
        x1 = rng.standard_normal((8, 1))
        for t in GRID_T:
            def y_at(s):
                return project_y(AugmentedState(vars=conditional_trajectory(config, x0, x1, s), t=s),
                                 coefficients(config, s).r)

            numeric = (y_at(t + h) - y_at(t - h)) / (2.0 * h)
            state = AugmentedState(vars=conditional_trajectory(config, x0, x1, t), t=t)
            exact = y_dot_exact(state, x1, config)
            worst = max(worst, _relative_error(numeric, exact))
    return worst


def _y_dynamics_identity():
    rng = _rng(4)
    return max(
        y_dynamics_residual(config, t, 0.4, 10_000, rng).max_discrepancy
        for config in _grid_configs() for t in GRID_T
    )


def _y_dynamics_variance():
    """Worst |residual variance / w^T perp_cov w - 1|. N = 1 has no residual channel and is left out."""
    rng = _rng(5)
    return max(
        abs(y_dynamics_residual(config, t, 0.4, 1_000_000, rng).variance_ratio - 1.0)
        for config in _grid_configs(n_values=(2, 3, 4)) for t in (0.3, 0.7)
    )


def _perp_cov_projector():
    worst = 0.0
    for config in _grid_configs():
        for t in GRID_T:
            perp_cov = y_dyn_coefficients(config, t).perp_cov
            worst = max(worst,
                        float(np.max(np.abs(perp_cov @ perp_cov - perp_cov))),
                        abs(np.trace(perp_cov) - (config.n_vars - 1)),
                        max(0.0, -float(np.min(np.linalg.eigvalsh(perp_cov)))))
    return worst


def _whitened_noise_covariance():
    rng = _rng(6)
    return max(
        whitened_noise_statistics(config, t, 100_000, rng).covariance_error
        for config in _grid_configs() for t in (0.3, 0.7)
    )


def _whitened_noise_correlation():
    rng = _rng(7)
    return max(
        abs(whitened_noise_statistics(config, t, 1_000_000, rng).correlation)
        for config in _grid_configs() for t in (0.3, 0.7)
    )


def _whitened_decomposition_binned():
    """Largest bin mean of z_actual - z_pred over five quantile bins of y, in residual standard deviations."""
    draws = 1_000_000
    x1 = 0.3
    rng = _rng(8)
    worst = 0.0
    for n_vars in (2, 3):
        config = AugmentedConfig.default_family(n_vars)
        bundle = coefficients(config, 0.5)
        coeffs = y_dyn_coefficients(config, 0.5)
        x = bundle.mu * x1 + rng.standard_normal((draws, n_vars)) @ bundle.root.T
        z_pred, z_actual = whitened_decomposition(bundle.mu, bundle.sigma, bundle.r, coeffs.e, x1, x)
        residual = z_actual - z_pred
        spread = np.std(residual)
        edges = np.quantile(x @ bundle.r, np.linspace(0.0, 1.0, 6))
        bins = np.clip(np.searchsorted(edges, x @ bundle.r, side="right") - 1, 0, 4)
        for index in range(5):
            worst = max(worst, abs(residual[bins == index].mean()) / spread)
    return worst


def _mdm_loss_identity():
    rng = _rng(9)
    worst = 0.0
    for n_vars in (2, 3, 4):
        config = AugmentedConfig.default_family(n_vars)
        for t in (0.3, 0.5, 0.7):
            bundle = coefficients(config, t)
            a, b = mdm_loss_reparam(n_vars, t, bundle.chol, bundle.mu)
            eps = rng.standard_normal((10_000, n_vars))
            x1 = rng.standard_normal(10_000)
            x = np.outer(x1, bundle.mu) + eps @ bundle.chol.T
            worst = max(worst, float(np.max(np.abs(eps[:, -1] - (x @ a - b * x1)))))
    return worst


def _n2_loss_agreement():
    rng = _rng(10)
    worst = 0.0
    compared = 0
    while compared < 1000:
        l_xx, l_vv = rng.uniform(0.2, 2.0, size=2)
        l_xv = rng.standard_normal()
        mu = rng.uniform(0.1, 2.0, size=2)
        if abs(l_xv / l_xx * mu[0] - mu[1]) < 1e-3:
            continue
        a, b = mdm_loss_reparam(2, 0.5, np.array([[l_xx, 0.0], [l_xv, l_vv]]), mu)
        n2 = n2_loss_coeffs(l_xx, l_xv, l_vv, mu[0], mu[1])
        worst = max(worst,
                    _relative_error(n2.eps, -1.0 / b),
                    _relative_error([n2.x0, n2.x1], a / b))
        compared += 1
    return worst


def _posterior_equivalence():
    rng = _rng(11)
    config = AugmentedConfig.default_family(2)
    return max(compare_posteriors(_two_mode_mixture(), config, t, 1000, rng).against_y for t in (0.25, 0.5, 0.75))


def _posterior_equivalence_quadrature():
    rng = _rng(12)
    config = AugmentedConfig.default_family(2)
    return max(
        compare_posteriors(_two_mode_mixture(), config, t, 200, rng, with_quadrature=True).against_quadrature
        for t in (0.25, 0.5, 0.75)
    )


def _psi_exact_quadrature():
    rng = _rng(13)
    t_from, t_to = 0.3, 0.37
    tau = np.linspace(t_from, t_to, 100_001)
    worst = 0.0
    for order in (1, 2, 3):
        times = t_from - 0.04 * np.arange(order)[::-1]
        forces = rng.standard_normal(order)
        cache = HistoryCache(order=order)
        for t, force in zip(times, forces):
            cache = cache.appended(t, np.array([force]))
        interpolant = polynomial.polyval(tau, polynomial.polyfit(times, forces, order - 1))
        for n_vars in GRID_N:
            exact = psi_integral(cache, t_from, t_to, n_vars)[:, 0]
            powers = n_vars - 1 - np.arange(n_vars)
            kernels = (t_to - tau[None, :]) ** powers[:, None] / factorial(powers)[:, None]
            quadrature = trapezoid(kernels * interpolant[None, :], tau, axis=1)
            scale = trapezoid(kernels * np.abs(interpolant)[None, :], tau, axis=1)
            worst = max(worst, float(np.max(np.abs(exact - quadrature) / scale)))
    return worst


def _fm_equivalence():
    denoiser = GaussianMixtureDenoiser(_two_mode_mixture())
    config = AugmentedConfig(n_vars=1)
    worst = 0.0
    for order in (1, 2, 3):
        schedule = make_schedule("polynomial-t", 50, ScheduleParams(power=2.0, order=order),
                                 delta=config.t_clamp_delta)
        run = SamplerRun(config=config, schedule=schedule, order=order, seed=VERIFY_SEED, batch=1000)
        augmented = tada_sample(denoiser, run, 1)
        baseline = fm_baseline_sample(denoiser, schedule, order, 1, VERIFY_SEED, 1000)
        worst = max(worst, float(np.max(np.abs(augmented - baseline))))
    return worst


def registered_checks():
    return [
        VerifyCheck("dynamics.controlled_transition_vs_ode", 1e-6, lambda: _closed_form_errors("transition")),
        VerifyCheck("dynamics.mean_vector_vs_ode", 1e-6, lambda: _closed_form_errors("mean")),
        VerifyCheck("dynamics.covariance_vs_ode", 1e-6, lambda: _closed_form_errors("covariance")),
        VerifyCheck("dynamics.shift_semigroup", 1e-12, _shift_semigroup),
        VerifyCheck("dynamics.transition_determinant", 1e-9, _transition_determinant),
        VerifyCheck("dynamics.reweight_identities", 1e-12, _reweight_identities),
        VerifyCheck("dynamics.gamma_monotone", 0.0, _gamma_monotone),
        VerifyCheck("dynamics.y_projection_mean", 4.0, _y_projection_mean),
        VerifyCheck("dynamics.y_projection_variance", 0.05, _y_projection_variance),
        VerifyCheck("analysis.gamma_dot_finite_difference", 1e-6, _gamma_dot_finite_difference),
        VerifyCheck("analysis.y_dot_exact_vs_trajectory", 1e-5, _y_dot_exact_vs_trajectory),
        VerifyCheck("analysis.y_dynamics_identity", 1e-6, _y_dynamics_identity),
        VerifyCheck("analysis.y_dynamics_variance", 0.02, _y_dynamics_variance),
        VerifyCheck("analysis.perp_cov_projector", 1e-12, _perp_cov_projector),
        VerifyCheck("analysis.whitened_noise_covariance", 5e-2, _whitened_noise_covariance),
        VerifyCheck("analysis.whitened_noise_correlation", 5e-3, _whitened_noise_correlation),
        VerifyCheck("analysis.whitened_decomposition_binned", 1e-2, _whitened_decomposition_binned),
        VerifyCheck("analysis.mdm_loss_identity", 1e-10, _mdm_loss_identity),
        VerifyCheck("analysis.n2_loss_agreement", 1e-10, _n2_loss_agreement),
        VerifyCheck("analysis.posterior_equivalence", 1e-8, _posterior_equivalence),
        VerifyCheck("analysis.posterior_equivalence_quadrature", 1e-6, _posterior_equivalence_quadrature),
        VerifyCheck("sampler.psi_exact_quadrature", 1e-9, _psi_exact_quadrature),
        VerifyCheck("sampler.fm_equivalence", 1e-10, _fm_equivalence),
    ]


def matches_filter(name, filter_pattern):
    """Glob match when the pattern has wildcards, substring match otherwise."""
    if not filter_pattern:
        return True
    if any(character in filter_pattern for character in "*?["):
        return fnmatch.fnmatchcase(name, filter_pattern)
    return filter_pattern in name


def run_check(check):
    _logger.info(f"Running check {check.name}")
    try:
        observed = float(check.measure())
    except (ValueError, ArithmeticError, linalg.LinAlgError) as e:
        _logger.exception(f"Check {check.name} raised: {e}")
        observed = math.nan
    passed = bool(observed <= check.tolerance)
    if passed:
        _logger.info(f"{check.name}: observed {observed:.3e}, tolerance {check.tolerance:.1e}, passed")
    else:
        _logger.warning(f"{check.name}: observed {observed:.3e}, tolerance {check.tolerance:.1e}, FAILED")
    return CheckResult(name=check.name, tolerance=check.tolerance, observed=observed, passed=passed)


def run_checks(filter_pattern=None, checks=None):
    checks = registered_checks() if checks is None else checks
    selected = [check for check in checks if matches_filter(check.name, filter_pattern)]
    if not selected:
        raise ValueError(f"No verification check matches the filter {filter_pattern!r}.")
    _logger.info(f"Running {len(selected)} of {len(checks)} checks")
    return [run_check(check) for check in selected]
