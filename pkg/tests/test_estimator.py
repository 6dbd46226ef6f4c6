"""Forward-model prediction: the only state feedback the controller gets."""

import numpy as np
import pytest

from saccadeoc.controller import CostSpec, backward_pass
from saccadeoc.dynamics import NoiseModel, step_stochastic
from saccadeoc.errors import ContractError
from saccadeoc.estimator import ForwardModel, predict
from saccadeoc.simulation import simulate_mean


def test_prediction_is_one_plant_step(plant_h):
    x1 = np.array([0.5, -20.0])
    model = ForwardModel(plant_h, x1)
    np.testing.assert_array_equal(model.x_hat, x1)
    u = np.array([300.0])
    out = model.predict(u)
    np.testing.assert_array_equal(out, plant_h.A @ x1 + plant_h.B @ u)
    np.testing.assert_array_equal(model.x_hat, out)


def test_module_level_predict_matches_method(plant_h):
    a = ForwardModel(plant_h, np.zeros(2))
    b = ForwardModel(plant_h, np.zeros(2))
    u = np.array([150.0])
    np.testing.assert_array_equal(a.predict(u), predict(b, u))


def test_estimate_equals_noiseless_plant_exactly(plant_h):
    """With alpha = 0 the estimator and the closed-loop plant never diverge."""
    desired = np.concatenate([[0.0], np.full(20, 180.0), [0.0]])
    schedule = backward_pass(plant_h, CostSpec.velocity_tracking(1e5, desired), 0.0)
    model = ForwardModel(plant_h, np.zeros(2))
    x = np.zeros(2)
    rng = np.random.default_rng(0)
    for k in range(desired.size - 1):
        u = -schedule.G_seq[k] @ model.x_hat + schedule.b_seq[k]
        x = step_stochastic(plant_h, x, u, NoiseModel(0.0), rng)
        model.predict(u)
        np.testing.assert_array_equal(x, model.x_hat)


def test_estimate_tracks_mean_not_noisy_realization(plant_h):
    desired = np.concatenate([[0.0], np.full(20, 180.0), [0.0]])
    schedule = backward_pass(plant_h, CostSpec.velocity_tracking(1e5, desired), 0.3)
    mean = simulate_mean(plant_h, schedule, np.zeros(2), desired.size)
    model = ForwardModel(plant_h, np.zeros(2))
    x = np.zeros(2)
    rng = np.random.default_rng(5)
    gap = 0.0
    for k in range(desired.size - 1):
        u = -schedule.G_seq[k] @ model.x_hat + schedule.b_seq[k]
        x = step_stochastic(plant_h, x, u, NoiseModel(0.3), rng)
        model.predict(u)
        gap = max(gap, np.abs(x - model.x_hat).max())
        # the estimate follows the deterministic mean trajectory
        np.testing.assert_allclose(model.x_hat, mean.states[k + 1], rtol=1e-12, atol=1e-12)
    assert gap > 0.0


def test_shape_guards(plant_h):
    with pytest.raises(ContractError):
        ForwardModel(plant_h, np.zeros(3))
    model = ForwardModel(plant_h, np.zeros(2))
    with pytest.raises(ContractError):
        model.predict(np.zeros(2))
