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

from wmul_tada.BayesDenoisers import DenoiseQuery, ModelTimeDenoiser, VpCurve, snr_to_input_scale, \
    snr_to_model_time, snr_to_sigma


def test_snr_to_sigma():
    assert snr_to_sigma(0.0) == math.inf
    assert snr_to_sigma(4.0) == pytest.approx(0.5)
    assert snr_to_sigma(math.inf) == 0.0
    with pytest.raises(ValueError):
        snr_to_sigma(-1.0)


@pytest.mark.parametrize("gamma, expected", [
    (0.0, 0.0),
    (1.0, 0.5),
    (9.0, 0.75),
    (math.inf, 1.0),
])
def test_fm_model_time(gamma, expected):
    assert snr_to_model_time(gamma, "fm") == pytest.approx(expected)


def test_edm_model_time_is_sigma():
    assert snr_to_model_time(4.0, "edm-sigma") == pytest.approx(0.5)
    assert snr_to_model_time(0.0, "edm-sigma") == math.inf


def test_model_time_rejects_unknown_convention_and_missing_curve():
    with pytest.raises(ValueError, match="Unknown model convention"):
        snr_to_model_time(1.0, "ve")
    with pytest.raises(ValueError, match="VpCurve"):
        snr_to_model_time(1.0, "vp")
    with pytest.raises(ValueError, match="non-negative"):
        snr_to_model_time(-1.0, "fm")


@pytest.mark.parametrize("curve", [
    VpCurve(kind="linear", beta_min=0.1, beta_max=20.0),
    VpCurve(kind="cosine"),
])
@pytest.mark.parametrize("model_time", [0.05, 0.3, 0.7, 0.95])
def test_vp_time_inverts_log_snr(curve, model_time):
    gamma = math.exp(curve.log_snr(model_time))
    assert snr_to_model_time(gamma, "vp", curve) == pytest.approx(model_time, abs=1e-9)


def test_vp_log_snr_decreases():
    curve = VpCurve(kind="linear", beta_min=0.1, beta_max=20.0)
    values = [curve.log_snr(tau) for tau in np.linspace(0.01, 0.99, 30)]
    assert np.all(np.diff(values) < 0)


def test_vp_time_limits():
    curve = VpCurve(kind="cosine")
    assert curve.time_for_snr(0.0) == 1.0
    assert curve.time_for_snr(math.inf) == 0.0


@pytest.mark.parametrize("kwargs", [
    {"kind": "linear"},
    {"kind": "linear", "beta_min": 5.0, "beta_max": 1.0},
    {"kind": "cosine", "cosine_s": 0.0},
    {"kind": "sigmoid"},
])
def test_vp_curve_rejects_bad_settings(kwargs):
    with pytest.raises(ValueError):
        VpCurve(**kwargs)


def test_input_scale():
    assert snr_to_input_scale(1.0, "fm") == pytest.approx(0.5)
    assert snr_to_input_scale(1.0, "vp") == pytest.approx(math.sqrt(0.5))
    assert snr_to_input_scale(1.0, "edm-sigma") == 1.0
    assert snr_to_input_scale(0.0, "fm") == 1.0
    assert snr_to_input_scale(math.inf, "vp") == 1.0


def test_model_time_denoiser_rescales_fm_input(mocker):
    mock_model = mocker.Mock(return_value="mock_prediction")
    denoiser = ModelTimeDenoiser(model=mock_model, convention="fm")
    y = np.array([[2.0, -4.0]])

    result = denoiser(DenoiseQuery(y=y, sigma_bar=1.0))

    assert result == "mock_prediction"
    model_input, model_time = mock_model.call_args.args
    np.testing.assert_allclose(model_input, [[1.0, -2.0]])
    assert model_time == pytest.approx(0.5)


def test_model_time_denoiser_handles_pure_noise(mocker):
    mock_model = mocker.Mock(return_value="mock_prediction")
    denoiser = ModelTimeDenoiser(model=mock_model, convention="edm-sigma")
    denoiser(DenoiseQuery(y=np.zeros((1, 1)), sigma_bar=math.inf))
    _, model_time = mock_model.call_args.args
    assert model_time == math.inf


def test_model_time_denoiser_requires_curve_for_vp(mocker):
    with pytest.raises(ValueError, match="VpCurve"):
        ModelTimeDenoiser(model=mocker.Mock(), convention="vp")
