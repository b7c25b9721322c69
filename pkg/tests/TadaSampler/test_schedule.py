"""
@Author = 'Michael Stanley'

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
import numpy as np
import pytest

from wmul_tada.AugmentedDynamics import AugmentedConfig, coefficients
from wmul_tada.TadaSampler import Schedule, ScheduleParams, make_schedule


def test_uniform_schedule():
    schedule = make_schedule("uniform-t", 4, delta=0.0)
    np.testing.assert_allclose(schedule.times, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert schedule.steps == 4


def test_polynomial_schedule():
    schedule = make_schedule("polynomial-t", 2, ScheduleParams(power=2.0), delta=1e-3)
    np.testing.assert_allclose(schedule.times, [0.0, 0.999 * 0.25, 0.999])


def test_polynomial_schedule_crowds_early_times():
    times = make_schedule("polynomial-t", 10, ScheduleParams(power=3.0)).times
    steps = np.diff(times)
    assert np.all(np.diff(steps) > 0)


def test_logsnr_schedule_spacing():
    config = AugmentedConfig.default_family(2)
    params = ScheduleParams(t_floor=1e-3, config=config)
    schedule = make_schedule("logsnr-uniform", 8, params, delta=1e-3)
    assert schedule.times[0] == 0.0
    assert schedule.times[1] == pytest.approx(1e-3)
    assert schedule.times[-1] == pytest.approx(0.999)
    log_gamma = np.log([coefficients(config, t).gamma for t in schedule.times[1:]])
    np.testing.assert_allclose(np.diff(log_gamma), np.full(7, np.diff(log_gamma).mean()), rtol=1e-8)


def test_logsnr_schedule_needs_config_and_positive_delta():
    with pytest.raises(ValueError, match="AugmentedConfig"):
        make_schedule("logsnr-uniform", 4, ScheduleParams())
    params = ScheduleParams(config=AugmentedConfig.default_family(2))
    with pytest.raises(ValueError, match="delta > 0"):
        make_schedule("logsnr-uniform", 4, params, delta=0.0)


@pytest.mark.parametrize("scheme, steps, params, delta, message", [
    ("cosine", 4, ScheduleParams(), 1e-3, "Unknown schedule scheme"),
    ("uniform-t", 0, ScheduleParams(), 1e-3, "at least one step"),
    ("uniform-t", 2, ScheduleParams(order=3), 1e-3, "shorter than the solver order"),
    ("uniform-t", 4, ScheduleParams(order=4), 1e-3, "Solver order"),
    ("uniform-t", 4, ScheduleParams(), 0.5, "delta must lie"),
    ("polynomial-t", 4, ScheduleParams(power=0.0), 1e-3, "power must be positive"),
])
def test_make_schedule_rejects_bad_arguments(scheme, steps, params, delta, message):
    with pytest.raises(ValueError, match=message):
        make_schedule(scheme, steps, params, delta=delta)


@pytest.mark.parametrize("times", [
    [0.1, 0.5],
    [0.0, 0.5, 0.5],
    [0.0],
])
def test_schedule_validates_times(times):
    with pytest.raises(ValueError):
        Schedule(times=times, scheme="uniform-t")


def test_schedule_times_are_read_only():
    schedule = make_schedule("uniform-t", 3)
    with pytest.raises(ValueError):
        schedule.times[1] = 0.0
