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
from hypothesis import given, settings, strategies as st

from wmul_tada import AugmentedDynamics
from wmul_tada.AugmentedDynamics import controlled_transition, controlled_transition_determinant, hat_matrices, \
    mean_vector, shift_transition


def test_shift_transition_is_truncated_exponential():
    expected = np.array([
        [1.0, 0.5, 0.125],
        [0.0, 1.0, 0.5],
        [0.0, 0.0, 1.0]
    ])
    np.testing.assert_allclose(shift_transition(3, 0.5), expected, rtol=0, atol=1e-15)


def test_shift_transition_zero_step_is_identity():
    np.testing.assert_array_equal(shift_transition(4, 0.0), np.eye(4))


@settings(max_examples=50, deadline=None)
@given(n_vars=st.integers(1, 8), a=st.floats(0.0, 1.0), b=st.floats(0.0, 1.0))
def test_shift_transition_semigroup(n_vars, a, b):
    combined = shift_transition(n_vars, a) @ shift_transition(n_vars, b)
    np.testing.assert_allclose(combined, shift_transition(n_vars, a + b), rtol=1e-12, atol=1e-12)


def test_controlled_transition_two_vars_half():
    expected = np.array([[0.75, 0.25], [-1.0, 0.0]])
    np.testing.assert_allclose(controlled_transition(2, 0.5), expected, rtol=0, atol=1e-15)


def test_controlled_transition_two_vars_at_one():
    expected = np.array([[0.0, 0.0], [-2.0, -1.0]])
    np.testing.assert_allclose(controlled_transition(2, 1.0), expected, rtol=0, atol=1e-15)


def test_controlled_transition_one_var_is_one_minus_t():
    for t in (0.0, 0.2, 0.9, 1.0):
        assert controlled_transition(1, t)[0, 0] == pytest.approx(1.0 - t, abs=1e-15)


def test_controlled_transition_at_zero_is_identity():
    for n_vars in range(1, 9):
        np.testing.assert_allclose(controlled_transition(n_vars, 0.0), np.eye(n_vars), atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(n_vars=st.integers(1, 5), t=st.floats(0.0, 0.9))
def test_controlled_transition_determinant(n_vars, t):
    determinant = np.linalg.det(controlled_transition(n_vars, t))
    assert determinant == pytest.approx(controlled_transition_determinant(n_vars, t), rel=1e-6, abs=1e-12)


def test_controlled_transition_singular_at_one():
    for n_vars in range(1, 5):
        assert abs(np.linalg.det(controlled_transition(n_vars, 1.0))) < 1e-10


@pytest.mark.parametrize("t", [-0.1, 1.1])
def test_controlled_transition_rejects_times_outside_unit_interval(t):
    with pytest.raises(ValueError):
        controlled_transition(2, t)


@pytest.mark.parametrize("n_vars", [1, 2, 3, 4])
@pytest.mark.parametrize("t", [0.1, 0.5, 0.9])
def test_controlled_transition_solves_its_ode(n_vars, t):
    h = 1e-6
    numeric = (controlled_transition(n_vars, t + h) - controlled_transition(n_vars, t - h)) / (2 * h)
    a_hat, _ = hat_matrices(n_vars, t)
    exact = a_hat @ controlled_transition(n_vars, t)
    assert np.max(np.abs(numeric - exact)) <= 1e-6 * max(1.0, np.max(np.abs(exact)))


def test_mean_vector_two_vars():
    np.testing.assert_allclose(mean_vector(2, 1.0), [1.0, 2.0], atol=1e-15)
    np.testing.assert_allclose(mean_vector(2, 0.5), [0.25, 1.0], atol=1e-15)


def test_mean_vector_top_entry_reaches_one():
    for n_vars in range(1, 9):
        assert mean_vector(n_vars, 1.0)[0] == pytest.approx(1.0)
        np.testing.assert_array_equal(mean_vector(n_vars, 0.0), np.zeros(n_vars))


@pytest.mark.parametrize("n_vars", [1, 2, 3, 4])
@pytest.mark.parametrize("t", [0.1, 0.5, 0.9])
def test_mean_vector_solves_its_ode(n_vars, t):
    h = 1e-6
    numeric = (mean_vector(n_vars, t + h) - mean_vector(n_vars, t - h)) / (2 * h)
    a_hat, b_hat = hat_matrices(n_vars, t)
    exact = a_hat @ mean_vector(n_vars, t) + b_hat
    assert np.max(np.abs(numeric - exact)) <= 1e-6 * max(1.0, np.max(np.abs(exact)))


def test_hat_matrices_one_var():
    a_hat, b_hat = hat_matrices(1, 0.5)
    assert a_hat[0, 0] == pytest.approx(-2.0)
    assert b_hat[0] == pytest.approx(2.0)


def test_hat_matrices_reject_t_one():
    with pytest.raises(ValueError, match="0 <= t < 1"):
        hat_matrices(2, 1.0)


def test_injected_fault_shifts_every_entry_and_restores():
    clean = controlled_transition(3, 0.4)
    with AugmentedDynamics.injected_transition_fault(1e-3):
        faulty = controlled_transition(3, 0.4)
    np.testing.assert_allclose(faulty - clean, np.full((3, 3), 1e-3), atol=1e-15)
    np.testing.assert_array_equal(controlled_transition(3, 0.4), clean)


def test_injected_fault_restores_after_exception():
    with pytest.raises(RuntimeError):
        with AugmentedDynamics.injected_transition_fault(0.5):
            raise RuntimeError("boom")
    assert controlled_transition(1, 0.25)[0, 0] == pytest.approx(0.75)
    assert AugmentedDynamics._transition_fault == 0.0
