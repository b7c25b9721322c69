"""
@Author = 'Michael Stanley'

Closed-form coefficients of the N-variable augmented system. The variables x^(0), ..., x^(N-1) are chained
integrators (position, velocity, ...) coupled by the nilpotent upper-shift matrix A, and the last one is driven by
the force term F. Everything here is a pure function of its arguments, apart from the coefficient cache (which
is keyed on the full configuration) and the fault-injection hook used by the verification canary.

State arrays are laid out as (..., N, d): any number of leading batch axes, then the N augmented variables, then
the data dimension.

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
import functools
import math
import threading
from dataclasses import dataclass, field
from typing import Optional

import cachetools
import cachetools.keys
import numpy as np
from scipy import linalg
from scipy.special import factorial

import wmul_logger

_logger = wmul_logger.get_logger()

MAX_VARS = 8
CONDITION_FLOOR = 1e-12
DEFAULT_DELTA = 1e-3

_transition_fault = 0.0
_coefficient_cache = cachetools.LRUCache(maxsize=4096)
_coefficient_lock = threading.RLock()


class CovarianceConditionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AugmentedConfig:
    n_vars: int = 2
    k_scale: float = 1.0
    t_clamp_delta: float = DEFAULT_DELTA
    base_sigma0: Optional[np.ndarray] = None
    sigma0: np.ndarray = field(init=False, repr=False, compare=False)
    prior_factor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 1 <= self.n_vars <= MAX_VARS:
            raise ValueError(f"n_vars must be between 1 and {MAX_VARS}, got {self.n_vars}.")
        if not self.k_scale > 0:
            raise ValueError(f"k_scale must be positive, got {self.k_scale}.")
        if not 0 < self.t_clamp_delta < 0.5:
            raise ValueError(f"t_clamp_delta must lie in (0, 0.5), got {self.t_clamp_delta}.")

        if self.base_sigma0 is None:
            base = np.eye(self.n_vars)
        else:
            base = np.array(self.base_sigma0, dtype=float)
            if base.shape != (self.n_vars, self.n_vars):
                raise ValueError(f"The prior covariance must be {self.n_vars}x{self.n_vars}, got {base.shape}.")
            if not np.allclose(base, base.T, rtol=1e-12, atol=0.0):
                raise ValueError("The prior covariance must be symmetric.")

        sigma0 = base.copy()
        sigma0[-1, -1] *= self.k_scale
        try:
            prior_factor = linalg.cholesky(sigma0, lower=True)
        except linalg.LinAlgError as lae:
            raise ValueError(f"The prior covariance (after k-scaling) is not positive definite: {lae}") from lae
        sigma0.setflags(write=False)
        prior_factor.setflags(write=False)
        object.__setattr__(self, "sigma0", sigma0)
        object.__setattr__(self, "prior_factor", prior_factor)

    @classmethod
    def default_family(cls, n_vars, k_scale=1.0, t_clamp_delta=DEFAULT_DELTA):
        return cls(n_vars=n_vars, k_scale=k_scale, t_clamp_delta=t_clamp_delta)

    def fingerprint(self):
        return self.n_vars, float(self.k_scale), float(self.t_clamp_delta), self.sigma0.tobytes()


@dataclass(frozen=True, eq=False)
class AugmentedState:
    vars: np.ndarray
    t: float

    def __post_init__(self):
        vars_ = np.asarray(self.vars, dtype=float)
        if vars_.ndim < 2:
            raise ValueError(f"State variables must have shape (..., N, d), got {vars_.shape}.")
        object.__setattr__(self, "vars", vars_)

    @property
    def n_vars(self):
        return self.vars.shape[-2]

    @property
    def dimension(self):
        return self.vars.shape[-1]


@dataclass(frozen=True, eq=False)
class CoefficientBundle:
    """
    root is Phi_hat L_0, the transition applied to the prior factor, so sigma = root root^T and x_t = mu x_1 +
    root eps with eps the prior noise. whitened_r is root^T r. The lower Cholesky factor chol is built on first use.
    """
    t: float
    mu: np.ndarray
    sigma: np.ndarray
    r: np.ndarray
    gamma: float
    root: np.ndarray
    whitened_r: np.ndarray

    @functools.cached_property
    def chol(self):
        return triangular_root(self.root)


def _exponent_grid(n_vars):
    k = np.arange(n_vars)
    return k[:, None], k[None, :]


def shift_transition(n_vars, dt):
    """exp(dt * A) for the upper-shift A. The series terminates, so this is exact."""
    row, col = _exponent_grid(n_vars)
    power = np.clip(col - row, 0, None)
    return np.where(col >= row, float(dt) ** power / factorial(power), 0.0)


def hat_matrices(n_vars, t):
    """The drift of the conditional flow: d/dt x = A_hat x + b_hat x_1."""
    if not 0 <= t < 1:
        raise ValueError(f"hat_matrices requires 0 <= t < 1, got {t}.")
    n_fact = math.factorial(n_vars)
    one_minus_t = 1.0 - t
    m = np.arange(n_vars)
    a_hat = np.eye(n_vars, k=1)
    a_hat[-1, :] -= n_fact / (factorial(m) * one_minus_t ** (n_vars - m))
    b_hat = np.zeros(n_vars)
    b_hat[-1] = n_fact / one_minus_t ** n_vars
    return a_hat, b_hat


def _transition_in_time(n_vars, t):
    row, col = _exponent_grid(n_vars)
    control = math.factorial(n_vars) * t ** (n_vars - row) / (factorial(n_vars - row) * factorial(col))
    return shift_transition(n_vars, t) - control


@cachetools.cached(cache=cachetools.LRUCache(maxsize=MAX_VARS), lock=threading.RLock())
def _remaining_polynomials(n_vars):
    """
    table[k, m, i] is the coefficient of s^i, s = 1 - t, in m! times entry (k, m) of the controlled transition.
    Entry (k, m) is the k-th t-derivative of ((1 - s)^m - (1 - s)^N) / m!, expanded by the binomial theorem, so
    the coefficients are exact integers.
    """
    table = np.zeros((n_vars, n_vars, n_vars + 1))
    for row in range(n_vars):
        for col in range(n_vars):
            for power in range(row, n_vars + 1):
                table[row, col, power - row] = (-1) ** (row + power) * math.perm(power, row) \
                    * (math.comb(col, power) - math.comb(n_vars, power))
    table.setflags(write=False)
    return table


def _transition_in_remaining(n_vars, t):
    powers = (1.0 - t) ** np.arange(n_vars + 1)
    return _remaining_polynomials(n_vars) @ powers / factorial(np.arange(n_vars))


def controlled_transition(n_vars, t):
    """
    Phi_hat(t, 0). Past t = 1/2 the entries are evaluated as polynomials in s = 1 - t, since the two terms of the
    t form cancel there and an entry of size s^j would otherwise keep only an absolute error.
    """
    if not 0 <= t <= 1:
        raise ValueError(f"controlled_transition requires 0 <= t <= 1, got {t}.")
    if t <= 0.5:
        phi = _transition_in_time(n_vars, t)
    else:
        phi = _transition_in_remaining(n_vars, t)
    return phi + _transition_fault


def controlled_transition_determinant(n_vars, t):
    return (1.0 - t) ** n_vars


def _pulled_back_mean(n_vars, t):
    """(1 - t)^N Phi_hat^-1 mu_t, which is also exp(-tA) mu_t."""
    k = np.arange(n_vars)
    return -math.factorial(n_vars) * (-t) ** (n_vars - k) / factorial(n_vars - k)


def inverse_controlled_transition(n_vars, t):
    """Phi_hat(t, 0)^-1 = exp(-tA) + w rho^T, with w = _pulled_back_mean and rho_k = (1 - t)^(k - N) / k!."""
    if not 0 <= t < 1:
        raise ValueError(f"inverse_controlled_transition requires 0 <= t < 1, got {t}.")
    k = np.arange(n_vars)
    rho = (1.0 - t) ** (k - n_vars) / factorial(k)
    return shift_transition(n_vars, -t) + np.outer(_pulled_back_mean(n_vars, t), rho)


def mean_vector(n_vars, t):
    if not 0 <= t <= 1:
        raise ValueError(f"mean_vector requires 0 <= t <= 1, got {t}.")
    k = np.arange(n_vars)
    return math.factorial(n_vars) * t ** (n_vars - k) / factorial(n_vars - k)


def _check_pivots(chol, variances):
    relative = np.diag(chol) ** 2 / variances
    if not np.all(relative >= CONDITION_FLOOR):
        raise CovarianceConditionError(
            f"Covariance is numerically singular. Smallest relative pivot {np.min(relative):.3e} is below "
            f"{CONDITION_FLOOR:.0e}."
        )


def guarded_cholesky(sigma):
    """
    Lower Cholesky factor of sigma. The factorization runs on D^-1 sigma D^-1 with D = sqrt(diag sigma), and
    pivots of that unit-diagonal matrix below CONDITION_FLOOR are rejected.
    """
    sigma = np.asarray(sigma, dtype=float)
    variances = np.diag(sigma)
    if not np.all(variances > 0):
        raise CovarianceConditionError(f"Covariance has a non-positive variance: {np.min(variances):.3e}.")
    scale = np.sqrt(variances)
    try:
        unit = linalg.cholesky(sigma / np.outer(scale, scale), lower=True)
    except linalg.LinAlgError as lae:
        raise CovarianceConditionError(f"Cholesky factorization failed: {lae}") from lae
    chol = scale[:, None] * unit
    _check_pivots(chol, variances)
    return chol


def triangular_root(root):
    """
    Lower Cholesky factor of root root^T, read off a QR factorization of root^T. This works at the conditioning
    of root, the square root of the conditioning of the covariance.
    """
    root = np.asarray(root, dtype=float)
    upper = linalg.qr(root.T, mode="r")[0]
    signs = np.where(np.diag(upper) < 0, -1.0, 1.0)
    chol = (signs[:, None] * upper).T
    _check_pivots(chol, np.sum(root ** 2, axis=1))
    chol.setflags(write=False)
    return chol


def covariance(config, t):
    """Sigma_t, shared with the cached coefficient bundle."""
    if not 0 <= t < 1:
        raise ValueError(f"covariance requires 0 <= t < 1, got {t}.")
    return coefficients(config, t).sigma


def reweight(mu, sigma, chol=None):
    """
    Returns (r, gamma) with gamma = mu^T Sigma^-1 mu and r = Sigma^-1 mu / gamma.

    At mu = 0 (t = 0) sigma is the prior covariance, and r is the limit Sigma^-1 e / (e^T Sigma^-1 e) with e
    selecting the last variable.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if chol is None:
        chol = guarded_cholesky(sigma)

    if not np.any(mu):
        last = np.zeros_like(mu)
        last[-1] = 1.0
        z = linalg.solve_triangular(chol, last, lower=True)
        sigma_inv_last = linalg.solve_triangular(chol.T, z, lower=False)
        return sigma_inv_last / sigma_inv_last[-1], 0.0

    z = linalg.solve_triangular(chol, mu, lower=True)
    gamma = float(z @ z)
    r = linalg.solve_triangular(chol.T, z, lower=False) / gamma
    return r, gamma


def _closed_form_reweight(config, t):
    """
    (r, gamma, root^T r) for 0 < t < 1. With s = 1 - t, w = _pulled_back_mean and u = Sigma_0^-1 w:
    gamma = w^T u / s^2N and r_k = s^k / k! + s^N (exp(-tA)^T u)_k / w^T u. Both terms of r stay bounded as
    s -> 0.
    """
    n_vars = config.n_vars
    remaining = 1.0 - t
    pulled = _pulled_back_mean(n_vars, t)
    u = linalg.cho_solve((config.prior_factor, True), pulled)
    energy = float(pulled @ u)
    gamma = energy / remaining ** (2 * n_vars)
    r = _taylor_weights(n_vars, remaining) + remaining ** n_vars * (shift_transition(n_vars, -t).T @ u) / energy
    whitened_r = remaining ** n_vars * (config.prior_factor.T @ u) / energy
    return r, gamma, whitened_r


def whiten(config, t, vector):
    """L_0^-1 Phi_hat^-1 vector: an offset of the state at t, in units of the prior noise."""
    inverse = inverse_controlled_transition(config.n_vars, t)
    return linalg.solve_triangular(config.prior_factor, inverse @ np.asarray(vector, dtype=float), lower=True)


def precision_solve(config, t, vector):
    """Sigma_t^-1 vector, applied through Phi_hat^-1 and the prior factor rather than by factoring Sigma_t."""
    inverse = inverse_controlled_transition(config.n_vars, t)
    whitened = whiten(config, t, vector)
    return inverse.T @ linalg.solve_triangular(config.prior_factor, whitened, lower=True, trans="T")


def _coefficient_key(config, t):
    return cachetools.keys.hashkey(config.fingerprint(), float(t), _transition_fault)


@cachetools.cached(cache=_coefficient_cache, key=_coefficient_key, lock=_coefficient_lock)
def coefficients(config, t):
    """
    The bundle at t. Sigma_t is formed from its square root, and r and gamma come from closed forms in
    Phi_hat^-1 mu_t, so no step depends on factoring Sigma_t, which loses definiteness in floating point near
    t = 1 for larger N.
    """
    if not 0 <= t < 1:
        raise ValueError(f"coefficients requires 0 <= t < 1, got {t}.")
    n_vars = config.n_vars
    mu = mean_vector(n_vars, t)
    root = controlled_transition(n_vars, t) @ config.prior_factor
    sigma = root @ root.T
    sigma = 0.5 * (sigma + sigma.T)
    if t == 0:
        r, gamma = reweight(mu, sigma, chol=config.prior_factor)
        whitened_r = root.T @ r
    else:
        r, gamma, whitened_r = _closed_form_reweight(config, t)
    for array in (mu, sigma, r, root, whitened_r):
        array.setflags(write=False)
    return CoefficientBundle(t=float(t), mu=mu, sigma=sigma, r=r, gamma=gamma, root=root, whitened_r=whitened_r)


def project_y(state, r):
    r = np.asarray(r, dtype=float)
    if r.shape != (state.n_vars,):
        raise ValueError(f"Reweighting vector of shape {r.shape} does not match a state with {state.n_vars} "
                         f"variables.")
    return np.einsum("n,...nd->...d", r, state.vars)


def _taylor_weights(n_vars, remaining):
    n = np.arange(n_vars)
    return remaining ** n / factorial(n)


def force_term(state, x_hat, t, n_vars, delta_force=DEFAULT_DELTA):
    """The constant N-th derivative that carries x^(0) onto x_hat at time 1."""
    if t >= 1.0 - delta_force:
        raise ValueError(f"force_term requires t < 1 - {delta_force}, got {t}.")
    remaining = 1.0 - t
    taylor = np.einsum("n,...nd->...d", _taylor_weights(n_vars, remaining), state.vars)
    return math.factorial(n_vars) * (x_hat - taylor) / remaining ** n_vars


def taylor_terminal_position(state, force, t):
    """Where x^(0) lands at time 1 if the force is held constant from t."""
    n_vars = state.n_vars
    remaining = 1.0 - t
    taylor = np.einsum("n,...nd->...d", _taylor_weights(n_vars, remaining), state.vars)
    return taylor + remaining ** n_vars * force / math.factorial(n_vars)


@contextlib.contextmanager
def injected_transition_fault(magnitude=1e-3):
    """Adds `magnitude` to every entry of the controlled transition while active."""
    global _transition_fault
    _logger.warning(f"Injecting a transition fault of {magnitude}")
    previous = _transition_fault
    _transition_fault = float(magnitude)
    try:
        yield
    finally:
        _transition_fault = previous
