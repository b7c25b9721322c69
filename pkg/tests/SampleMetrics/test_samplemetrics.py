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

from wmul_tada.SampleMetrics import METRICS, SampleBatch, diversity_spread, energy_distance, sliced_wasserstein2, \
    wasserstein2_squared_1d


def _batch(samples, label=""):
    return SampleBatch(samples=np.asarray(samples, dtype=float), label=label)


def test_batch_promotes_vectors_and_rejects_empty():
    assert _batch([1.0, 2.0, 3.0]).samples.shape == (3, 1)
    with pytest.raises(ValueError):
        _batch(np.zeros((0, 2)))


def test_w2_1d_unequal_sizes():
    assert wasserstein2_squared_1d(np.array([0.0, 1.0]), np.array([0.0, 0.5, 1.0])) == pytest.approx(1.0 / 12.0)


def test_sliced_w2_identical_batches():
    samples = np.random.default_rng(0).standard_normal((200, 3))
    assert sliced_wasserstein2(_batch(samples), _batch(samples.copy())) == pytest.approx(0.0, abs=1e-12)


def test_sliced_w2_point_masses_1d():
    assert sliced_wasserstein2(_batch(np.zeros((10, 1))), _batch(np.full((7, 1), -2.5))) == pytest.approx(2.5)


def test_sliced_w2_translation_in_1d():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((300, 1))
    b = rng.standard_normal((300, 1))
    shifted = sliced_wasserstein2(_batch(a + 4.0), _batch(b + 4.0))
    assert shifted == pytest.approx(sliced_wasserstein2(_batch(a), _batch(b)), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_sliced_w2_symmetric(seed):
    rng = np.random.default_rng(seed)
    a = _batch(rng.standard_normal((40, 2)))
    b = _batch(rng.standard_normal((55, 2)) + 1.0)
    assert sliced_wasserstein2(a, b, seed=3) == pytest.approx(sliced_wasserstein2(b, a, seed=3), rel=1e-12)


def test_sliced_w2_same_distribution_noise_floor():
    rng = np.random.default_rng(2)
    a = _batch(rng.standard_normal((10_000, 2)))
    b = _batch(rng.standard_normal((10_000, 2)))
    assert sliced_wasserstein2(a, b, projections=128) < 0.05


def test_metrics_reject_dimension_mismatch():
    with pytest.raises(ValueError, match="dimensions"):
        sliced_wasserstein2(_batch(np.zeros((3, 2)), "a"), _batch(np.zeros((3, 1)), "b"))
    with pytest.raises(ValueError, match="dimensions"):
        energy_distance(_batch(np.zeros((3, 2))), _batch(np.zeros((3, 3))))
    with pytest.raises(ValueError, match="projection"):
        sliced_wasserstein2(_batch(np.zeros((3, 2))), _batch(np.zeros((3, 2))), projections=0)


def test_energy_distance_point_masses():
    a = _batch(np.zeros((5, 2)))
    b = _batch(np.tile([3.0, 4.0], (6, 1)))
    assert energy_distance(a, b) == pytest.approx(10.0)


def test_energy_distance_identical_batches():
    samples = np.random.default_rng(4).standard_normal((500, 2))
    assert energy_distance(_batch(samples), _batch(samples)) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), shift=st.floats(-3.0, 3.0))
def test_energy_distance_non_negative(seed, shift):
    rng = np.random.default_rng(seed)
    a = _batch(rng.standard_normal((30, 2)))
    b = _batch(rng.standard_normal((20, 2)) + shift)
    assert energy_distance(a, b) >= 0.0


def test_energy_distance_subsamples_large_batches():
    rng = np.random.default_rng(5)
    a = _batch(rng.standard_normal((6000, 2)))
    assert energy_distance(a, a, seed=1) < 0.01


def test_diversity_spread():
    groups = [
        _batch(np.ones((4, 2)), "same"),
        _batch([[0.0, 0.0], [3.0, 4.0]], "pair"),
    ]
    np.testing.assert_allclose(diversity_spread(groups), [0.0, 5.0])


def test_diversity_spread_needs_two_samples():
    with pytest.raises(ValueError, match="at least two samples"):
        diversity_spread([_batch([[1.0, 2.0]], "lonely")])


def test_metric_registry_signature():
    a = _batch(np.zeros((4, 1)))
    b = _batch(np.ones((4, 1)))
    assert METRICS["sliced_w2"](a, b, 16, 0) == pytest.approx(1.0)
    assert METRICS["energy"](a, b, 16, 0) == pytest.approx(2.0)
