"""
@Author = 'Michael Stanley'

The sampling loop. Each step projects the augmented state onto the single network input y, asks the denoiser
for a data prediction, turns that into the force term F, and advances the state with an exponential integrator:
the linear part exactly through the shift transition, and the forcing integral exactly over the Adams-Bashforth
polynomial through the cached force values.

fm_baseline_sample is a separate, plain flow-matching Adams-Bashforth sampler. At N = 1 the two must agree.

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
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial, polynomial
from scipy.optimize import brentq
from scipy.special import factorial

from wmul_tada.AugmentedDynamics import AugmentedConfig, AugmentedState, coefficients, force_term, project_y, \
    shift_transition
from wmul_tada.BayesDenoisers import DenoiseQuery, snr_to_sigma

import wmul_logger

_logger = wmul_logger.get_logger()

SCHEMES = ("uniform-t", "polynomial-t", "logsnr-uniform")
MAX_ORDER = 3


class NonFiniteSampleError(ArithmeticError):

    def __init__(self, stage, t):
        self.stage = stage
        self.t = t
        super().__init__(f"Non-finite values at stage '{stage}' (t = {t}).")


@dataclass(frozen=True)
class ScheduleParams:
    power: float = 2.0
    t_floor: float = 1e-3
    order: int = 1
    config: AugmentedConfig = None


@dataclass(frozen=True, eq=False)
class Schedule:
    times: np.ndarray
    scheme: str
    params: ScheduleParams = ScheduleParams()

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("A schedule needs at least two times.")
        if times[0] != 0.0:
            raise ValueError(f"A schedule must start at t = 0, got {times[0]}.")
        if np.any(np.diff(times) <= 0):
            raise ValueError("Schedule times must be strictly increasing.")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @property
    def steps(self):
        return self.times.size - 1


def _gamma_at(config, t):
    return coefficients(config, t).gamma


def _logsnr_times(steps, params, delta):
    config = params.config
    if config is None:
        raise ValueError("The logsnr-uniform schedule needs an AugmentedConfig to evaluate gamma.")
    if delta <= 0:
        raise ValueError("The logsnr-uniform schedule needs delta > 0, since gamma is infinite at t = 1.")
    t_end = 1.0 - delta
    if not 0 < params.t_floor < t_end:
        raise ValueError(f"t_floor must lie in (0, {t_end}), got {params.t_floor}.")
    if steps == 1:
        return np.array([0.0, t_end])

    log_low = math.log(_gamma_at(config, params.t_floor))
    log_high = math.log(_gamma_at(config, t_end))
    times = [0.0, params.t_floor]
    for log_target in np.linspace(log_low, log_high, steps)[1:-1]:
        times.append(brentq(lambda t: math.log(_gamma_at(config, t)) - log_target, params.t_floor, t_end,
                            xtol=1e-14, rtol=1e-12))
    times.append(t_end)
    return np.array(times)


def make_schedule(scheme, steps, params=ScheduleParams(), delta=1e-3):
    if scheme not in SCHEMES:
        raise ValueError(f"Unknown schedule scheme: {scheme}. Expected one of {SCHEMES}.")
    if steps < 1:
        raise ValueError(f"A schedule needs at least one step, got {steps}.")
    if not 1 <= params.order <= MAX_ORDER:
        raise ValueError(f"Solver order must be between 1 and {MAX_ORDER}, got {params.order}.")
    if steps < params.order:
        raise ValueError(f"A schedule of {steps} steps is shorter than the solver order {params.order}.")
    if not 0 <= delta < 0.5:
        raise ValueError(f"delta must lie in [0, 0.5), got {delta}.")

    fractions = np.arange(steps + 1) / steps
    if scheme == "uniform-t":
        times = (1.0 - delta) * fractions
    elif scheme == "polynomial-t":
        if not params.power > 0:
            raise ValueError(f"The polynomial power must be positive, got {params.power}.")
        times = (1.0 - delta) * fractions ** params.power
    else:
        times = _logsnr_times(steps, params, delta)
    return Schedule(times=times, scheme=scheme, params=params)


@dataclass(frozen=True, eq=False)
class HistoryCache:
    """The last `order` (t, F) pairs, oldest first."""
    order: int
    entries: tuple = ()

    def __len__(self):
        return len(self.entries)

    @property
    def times(self):
        return np.array([t for t, _ in self.entries])

    def appended(self, t, force):
        if self.entries and t <= self.entries[-1][0]:
            raise ValueError(f"History times must increase, got {t} after {self.entries[-1][0]}.")
        return HistoryCache(order=self.order, entries=(self.entries + ((float(t), force),))[-self.order:])


def _lagrange_basis(nodes, j):
    others = np.delete(nodes, j)
    # polyfromroots gives [1.0] for an empty root list, so a single node is the constant 1.
    return Polynomial(polynomial.polyfromroots(others)) / np.prod(nodes[j] - others)


def psi_weights(times, t_from, t_to, n_vars):
    """
    W[k, j] = integral over [t_from, t_to] of (t_to - tau)^(N-1-k) / (N-1-k)! * l_j(tau), where l_j is the
    Lagrange basis polynomial through the history times. Integrated exactly in u = (tau - t_from) / h.
    """
    h = t_to - t_from
    nodes = (np.asarray(times, dtype=float) - t_from) / h
    weights = np.empty((n_vars, nodes.size))
    for j in range(nodes.size):
        basis = _lagrange_basis(nodes, j)
        for k in range(n_vars):
            power = n_vars - 1 - k
            antiderivative = (Polynomial([1.0, -1.0]) ** power * basis).integ()
            weights[k, j] = h ** (power + 1) / factorial(power) * (antiderivative(1.0) - antiderivative(0.0))
    return weights


def psi_integral(cache, t_from, t_to, n_vars):
    if len(cache) == 0:
        raise ValueError("psi_integral needs at least one cached force value.")
    if not t_from < t_to:
        raise ValueError(f"psi_integral needs t_from < t_to, got {t_from} and {t_to}.")
    times = cache.times
    if np.any(np.diff(times) <= 0):
        raise ValueError("Cached times must be strictly increasing.")
    if times[-1] > t_from:
        raise ValueError(f"Cached time {times[-1]} lies after the start of the interval {t_from}.")

    weights = psi_weights(times, t_from, t_to, n_vars)
    forces = np.stack([force for _, force in cache.entries])
    return np.einsum("kj,j...d->...kd", weights, forces)


class TrajectoryRecorder:

    def __init__(self):
        self.rows = []

    def record(self, t, y, x_hat):
        self.rows.append((float(t), np.array(y, copy=True), np.array(x_hat, copy=True)))


def _check_finite(array, stage, t):
    if not np.all(np.isfinite(array)):
        _logger.error(f"Non-finite values at stage {stage}, t = {t}")
        raise NonFiniteSampleError(stage=stage, t=t)


def tada_step(state, denoiser, bundle, t_next, cache, delta_force=0.0, recorder=None):
    t = state.t
    if not t < t_next:
        raise ValueError(f"tada_step needs t < t_next, got {t} and {t_next}.")
    n_vars = state.n_vars

    y = project_y(state, bundle.r)
    _check_finite(y, "projection", t)
    x_hat = denoiser(DenoiseQuery(y=y, sigma_bar=snr_to_sigma(bundle.gamma), t=t))
    _check_finite(x_hat, "denoiser", t)
    if recorder is not None:
        recorder.record(t, y, x_hat)

    force = force_term(state, x_hat, t, n_vars, delta_force=delta_force)
    _check_finite(force, "force", t)
    cache = cache.appended(t, force)

    psi = psi_integral(cache, t, t_next, n_vars)
    _check_finite(psi, "psi", t)
    new_vars = np.einsum("km,...md->...kd", shift_transition(n_vars, t_next - t), state.vars) + psi
    _check_finite(new_vars, "state_update", t_next)
    return AugmentedState(vars=new_vars, t=t_next), cache


class CounterNoise:
    """
    Standard normal blocks drawn from a Philox stream per (sample_id, variable), so the draws for a sample do not
    depend on how the batch is split. Variables listed in shared_variables use the stream of sample 0 for every
    sample.
    """

    def __init__(self, seed, shared_variables=()):
        if seed < 0:
            raise ValueError(f"The seed must be non-negative, got {seed}.")
        self.seed = int(seed)
        self.shared_variables = frozenset(shared_variables)

    def _generator(self, sample_id, variable):
        stream = 0 if variable in self.shared_variables else int(sample_id)
        return np.random.Generator(np.random.Philox(key=self.seed, counter=[0, 0, variable, stream]))

    def standard_normal(self, sample_ids, n_vars, d):
        draws = np.empty((len(sample_ids), n_vars, d))
        for row, sample_id in enumerate(sample_ids):
            for variable in range(n_vars):
                draws[row, variable] = self._generator(sample_id, variable).standard_normal(d)
        return draws


def sample_prior(config, d, rng, sample_ids):
    eps = rng.standard_normal(sample_ids, config.n_vars, d)
    state = AugmentedState(vars=np.einsum("nm,bmd->bnd", config.prior_factor, eps), t=0.0)
    _check_finite(state.vars, "prior", 0.0)
    return state


@dataclass(frozen=True, eq=False)
class SamplerRun:
    config: AugmentedConfig
    schedule: Schedule
    order: int = 3
    seed: int = 0
    batch: int = 1
    shared_variables: tuple = field(default=())
    first_sample_id: int = 0

    def __post_init__(self):
        if not 1 <= self.order <= MAX_ORDER:
            raise ValueError(f"Solver order must be between 1 and {MAX_ORDER}, got {self.order}.")
        if self.order > self.schedule.steps:
            raise ValueError(f"Solver order {self.order} exceeds the {self.schedule.steps} schedule steps.")
        if self.batch < 1:
            raise ValueError(f"The batch must hold at least one sample, got {self.batch}.")
        t_end = 1.0 - self.config.t_clamp_delta
        if abs(self.schedule.times[-1] - t_end) > 1e-12:
            raise ValueError(f"The schedule ends at {self.schedule.times[-1]}, expected 1 - delta = {t_end}.")

    @property
    def nfe(self):
        return self.schedule.steps + 1

    @property
    def sample_ids(self):
        return np.arange(self.first_sample_id, self.first_sample_id + self.batch)


def tada_sample(denoiser, run, d, recorder=None):
    config = run.config
    _logger.info(f"TADA sampling: N = {config.n_vars}, k = {config.k_scale}, order = {run.order}, "
                 f"steps = {run.schedule.steps}, batch = {run.batch}")
    noise = CounterNoise(run.seed, shared_variables=run.shared_variables)
    state = sample_prior(config, d, noise, run.sample_ids)
    cache = HistoryCache(order=run.order)

    times = run.schedule.times
    for t, t_next in zip(times[:-1], times[1:]):
        _logger.debug(f"Step {t} -> {t_next}")
        state, cache = tada_step(state, denoiser, coefficients(config, t), t_next, cache,
                                 delta_force=config.t_clamp_delta, recorder=recorder)

    final = coefficients(config, times[-1])
    y = project_y(state, final.r)
    x_hat = denoiser(DenoiseQuery(y=y, sigma_bar=snr_to_sigma(final.gamma), t=times[-1]))
    _check_finite(x_hat, "final_prediction", times[-1])
    if recorder is not None:
        recorder.record(times[-1], y, x_hat)
    return x_hat


def adams_bashforth_weights(times, t_from, t_to):
    """Integrals of the Lagrange basis over [t_from, t_to], from the transposed Vandermonde moment system."""
    h = t_to - t_from
    nodes = (np.asarray(times, dtype=float) - t_from) / h
    count = nodes.size
    vandermonde_t = np.vander(nodes, count, increasing=True).T
    moments = 1.0 / np.arange(1, count + 1)
    return h * np.linalg.solve(vandermonde_t, moments)


def fm_baseline_sample(denoiser, schedule, order, d, seed, batch, recorder=None):
    """Flow matching, dx/dt = (x_hat - x) / (1 - t), stepped with variable-step Adams-Bashforth."""
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"Solver order must be between 1 and {MAX_ORDER}, got {order}.")
    if order > schedule.steps:
        raise ValueError(f"Solver order {order} exceeds the {schedule.steps} schedule steps.")
    _logger.info(f"Flow matching baseline: order = {order}, steps = {schedule.steps}, batch = {batch}")

    noise = CounterNoise(seed)
    x = noise.standard_normal(np.arange(batch), 1, d)[:, 0, :]
    _check_finite(x, "prior", 0.0)
    history_t = []
    history_v = []

    def predict(x, t):
        if t == 0:
            return x, math.inf
        return x / t, (1.0 - t) / t

    times = schedule.times
    for t, t_next in zip(times[:-1], times[1:]):
        y, sigma_bar = predict(x, t)
        x_hat = denoiser(DenoiseQuery(y=y, sigma_bar=sigma_bar, t=t))
        _check_finite(x_hat, "denoiser", t)
        if recorder is not None:
            recorder.record(t, y, x_hat)
        velocity = (x_hat - x) / (1.0 - t)
        _check_finite(velocity, "force", t)
        history_t = (history_t + [t])[-order:]
        history_v = (history_v + [velocity])[-order:]
        weights = adams_bashforth_weights(history_t, t, t_next)
        x = x + np.einsum("j,j...->...", weights, np.stack(history_v))
        _check_finite(x, "state_update", t_next)

    y, sigma_bar = predict(x, times[-1])
    x_hat = denoiser(DenoiseQuery(y=y, sigma_bar=sigma_bar, t=times[-1]))
    _check_finite(x_hat, "final_prediction", times[-1])
    if recorder is not None:
        recorder.record(times[-1], y, x_hat)
    return x_hat
