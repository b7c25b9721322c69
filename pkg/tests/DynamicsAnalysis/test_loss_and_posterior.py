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
import math

import numpy as np
import pytest

from wmul_tada.AugmentedDynamics import AugmentedConfig, coefficients
from wmul_tada.BayesDenoisers import GaussianMixture
from wmul_tada.DynamicsAnalysis import compare_posteriors, mdm_loss_reparam, n2_loss_coeffs, \
    posterior_equivalence_check


def test_mdm_identity_factor():
    mu = np.array([0.2, 0.5, 0.9])
    a, b = mdm_loss_reparam(3, 0.5, np.eye(3), mu)
    np.testing.assert_array_equal(a, [0.0, 0.0, 1.0])
    assert b == pytest.approx(0.9)


def test_mdm_two_by_two_factor():
    a, b = mdm_loss_reparam(2, 0.5, np.array([[1.0, 0.0], [0.5, 1.0]]), np.array([1.0, 2.0]))
    np.testing.assert_allclose(a, [-0.5, 1.0])
    assert b == pytest.approx(1.5)


@pytest.mark.parametrize("n_vars", [2, 3, 4])
@pytest.mark.parametrize("t", [0.3, 0.5, 0.7])
def test_mdm_identity_residual(n_vars, t, rng):
    bundle = coefficients(AugmentedConfig.default_family(n_vars), t)
    a, b = mdm_loss_reparam(n_vars, t, bundle.chol, bundle.mu)
    eps = rng.standard_normal((10_000, n_vars))
    x1 = rng.standard_normal(10_000)
    x = np.outer(x1, bundle.mu) + eps @ bundle.chol.T
    assert np.max(np.abs(eps[:, -1] - (x @ a - b * x1))) < 1e-10


@pytest.mark.parametrize("factor, mu, message", [
    (np.eye(3), np.ones(2), "Expected a 2x2"),
    (np.array([[1.0, 1.0], [0.0, 1.0]]), np.ones(2), "lower triangular"),
    (np.array([[1.0, 0.0], [1.0, 0.0]]), np.ones(2), "singular"),
])
def test_mdm_rejects_bad_factors(factor, mu, message):
    with pytest.raises(ValueError, match=message):
        mdm_loss_reparam(2, 0.5, factor, mu)


def test_n2_matches_mdm_on_random_factors(rng):
    compared = 0
    while compared < 1000:
        l_xx, l_vv = rng.uniform(0.2, 2.0, size=2)
        l_xv = rng.standard_normal()
        mu = rng.uniform(0.1, 2.0, size=2)
        if abs(l_xv / l_xx * mu[0] - mu[1]) < 1e-3:
            continue
        a, b = mdm_loss_reparam(2, 0.5, np.array([[l_xx, 0.0], [l_xv, l_vv]]), mu)
        n2 = n2_loss_coeffs(l_xx, l_xv, l_vv, mu[0], mu[1])
        assert n2.eps == pytest.approx(-1.0 / b, rel=1e-10)
        assert n2.x0 == pytest.approx(a[0] / b, rel=1e-10, abs=1e-12)
        assert n2.x1 == pytest.approx(a[1] / b, rel=1e-10)
        assert n2.loss_weight == pytest.approx(b ** 2, rel=1e-10)
        compared += 1


def test_n2_target_recovers_data(rng):
    l_xx, l_xv, l_vv = 0.8, -0.3, 0.6
    mu = np.array([0.4, 1.1])
    n2 = n2_loss_coeffs(l_xx, l_xv, l_vv, mu[0], mu[1])
    x1 = rng.standard_normal(50)
    eps = rng.standard_normal((50, 2))
    x = np.outer(x1, mu) + eps @ np.array([[l_xx, 0.0], [l_xv, l_vv]]).T
    np.testing.assert_allclose(n2.target(eps[:, 1], x[:, 0], x[:, 1]), x1, rtol=1e-12, atol=1e-12)


def test_n2_decoupled_factor():
    n2 = n2_loss_coeffs(1.0, 0.0, 0.5, 0.3, 2.0)
    assert n2.x0 == 0.0
    assert n2.x1 == pytest.approx(0.5)
    assert n2.eps == pytest.approx(-0.25)


def test_n2_rejects_degenerate_inputs():
    with pytest.raises(ValueError, match="degenerate"):
        n2_loss_coeffs(1.0, 2.0, 1.0, 0.5, 1.0)
    with pytest.raises(ValueError, match="non-zero"):
        n2_loss_coeffs(0.0, 1.0, 1.0, 0.5, 1.0)


def test_single_gaussian_posteriors_coincide(rng):
    gmm = GaussianMixture(weights=[1.0], means=[[0.7]], variances=[[2.0]])
    for t in (0.2, 0.35, 0.5):
        assert posterior_equivalence_check(gmm, AugmentedConfig.default_family(2), t, 500, rng) < 1e-12


@pytest.mark.parametrize("t", [0.25, 0.5, 0.75])
def test_two_mode_posteriors_coincide(two_mode_mixture, t, rng):
    config = AugmentedConfig.default_family(2)
    assert posterior_equivalence_check(two_mode_mixture, config, t, 1000, rng) < 1e-8


def test_posteriors_match_quadrature(two_mode_mixture, rng):
    comparison = compare_posteriors(two_mode_mixture, AugmentedConfig.default_family(2), 0.5, 50, rng,
                                    with_quadrature=True)
    assert comparison.against_y < 1e-8
    assert comparison.against_quadrature < 1e-6


def test_quadrature_skipped_by_default(two_mode_mixture, rng):
    comparison = compare_posteriors(two_mode_mixture, AugmentedConfig.default_family(2), 0.5, 10, rng)
    assert math.isnan(comparison.against_quadrature)


def test_posterior_check_preconditions(two_mode_mixture, rng):
    with pytest.raises(ValueError, match="N <= 3"):
        posterior_equivalence_check(two_mode_mixture, AugmentedConfig.default_family(4), 0.5, 10, rng)
    with pytest.raises(ValueError, match="0 < t < 1"):
        posterior_equivalence_check(two_mode_mixture, AugmentedConfig.default_family(2), 0.0, 10, rng)
    planar = GaussianMixture(weights=[1.0], means=[[0.0, 0.0]], variances=[[1.0, 1.0]])
    with pytest.raises(ValueError, match="1-D"):
        posterior_equivalence_check(planar, AugmentedConfig.default_family(2), 0.5, 10, rng)
