import json
import math

import numpy as np
import pytest
from scipy import linalg

from cilc.errors import BadPoleSet, ConfigError, NumericalBlowup, Uncontrollable
from cilc.twipr import (
    DEFAULT_POLES, PITCH_DEG, DiscreteClosedLoop, NonlinearTwipr, TwiprParams, build_closed_loop,
    design_feedback, discretize_zoh, impulse_response, linearize_upright, markov_lifted_plant,
    markov_parameters, params_from_dict, params_from_json, params_to_json, reference_maneuver,
    simulate_nonlinear_trial, twipr_dynamics,
)

P0 = TwiprParams()


def test_upright_is_equilibrium():
    np.testing.assert_array_equal(twipr_dynamics(np.zeros(4), 0.0, P0), np.zeros(4))


def test_gravity_tips_body_forward():
    d = twipr_dynamics(np.array([0.05, 0, 0, 0]), 0.0, P0)
    assert d[1] > 0


def test_jacobian_matches_finite_differences():
    A, B = linearize_upright(P0)
    h = 1e-6
    fd = np.column_stack([(twipr_dynamics(h * ek, 0.0, P0) - twipr_dynamics(-h * ek, 0.0, P0)) / (2 * h)
                          for ek in np.eye(4)])
    np.testing.assert_allclose(A, fd, atol=1e-6 * max(1, np.abs(A).max()))
    fdu = (twipr_dynamics(np.zeros(4), h, P0) - twipr_dynamics(np.zeros(4), -h, P0)) / (2 * h)
    np.testing.assert_allclose(B.ravel(), fdu, atol=1e-6 * np.abs(B).max())


def test_linear_model_structure():
    A, B = linearize_upright(P0)
    assert A[0, 1] == 1 and A[2, 3] == 1
    assert np.all(A[0, [0, 2, 3]] == 0) and np.all(A[2, [0, 1, 2]] == 0)
    assert B[0, 0] == 0 and B[2, 0] == 0
    # open loop is unstable: one eigenvalue in the right half plane
    assert max(np.linalg.eigvals(A).real) > 0


def test_zoh_examples():
    Ad, Bd = discretize_zoh(np.zeros((2, 2)), np.array([[1.0], [2.0]]), 0.1)
    np.testing.assert_array_equal(Ad, np.eye(2))
    np.testing.assert_allclose(Bd.ravel(), [0.1, 0.2], rtol=1e-14)
    a, T = -3.0, 0.2
    Ad, Bd = discretize_zoh([[a]], [[1.0]], T)
    assert Ad[0, 0] == pytest.approx(math.exp(a * T), rel=1e-14)
    assert Bd[0, 0] == pytest.approx((math.exp(a * T) - 1) / a, rel=1e-12)
    with pytest.raises(ValueError):
        discretize_zoh([[1.0]], [[1.0]], 0.0)


def test_zoh_semigroup():
    A, B = linearize_upright(P0)
    A1, B1 = discretize_zoh(A, B, 0.01)
    A2, B2 = discretize_zoh(A, B, 0.02)
    np.testing.assert_allclose(A1 @ A1, A2, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(A1 @ B1 + B1, B2, rtol=1e-10, atol=1e-14)


def test_pole_placement():
    A, B = discretize_zoh(*linearize_upright(P0), P0.T)
    poles = (0.9, 0.92, 0.94, 0.96)
    K = design_feedback(A, B, poles)
    eig = np.sort(np.linalg.eigvals(A - B @ K).real)
    np.testing.assert_allclose(eig, poles, atol=1e-8)
    K = design_feedback(A, B, (0.8 + 0.1j, 0.8 - 0.1j, 0.9, 0.95))
    eig = np.sort_complex(np.linalg.eigvals(A - B @ K))
    np.testing.assert_allclose(eig, np.sort_complex([0.8 - 0.1j, 0.8 + 0.1j, 0.9, 0.95]), atol=1e-8)


def test_companion_form_needs_no_feedback():
    a = np.poly(DEFAULT_POLES)
    A = np.zeros((4, 4))
    A[:3, 1:] = np.eye(3)
    A[3] = -a[:0:-1]
    B = np.array([0, 0, 0, 1.0])
    np.testing.assert_allclose(design_feedback(A, B, DEFAULT_POLES), 0, atol=1e-12)


def test_feedback_errors():
    with pytest.raises(Uncontrollable):
        design_feedback(np.eye(2), np.array([1.0, 0.0]), (0.5, 0.6))
    A, B = np.array([[1.0, 1.0], [0.0, 1.0]]), np.array([0.0, 1.0])
    with pytest.raises(BadPoleSet):
        design_feedback(A, B, (0.5,))
    with pytest.raises(BadPoleSet):
        design_feedback(A, B, (0.5 + 0.1j, 0.6))


def test_unstable_loop_rejected():
    A, B = discretize_zoh(*linearize_upright(P0), P0.T)
    with pytest.raises(ValueError):
        DiscreteClosedLoop(A, B, PITCH_DEG, np.zeros((1, 4)), P0.T)


def test_markov_plant(twipr_pipeline):
    loop, plant, _ = twipr_pipeline
    p = markov_parameters(loop, 100)
    assert p[0] == pytest.approx((loop.C @ loop.B).item(), rel=1e-15)
    np.testing.assert_allclose(p, impulse_response(loop, 100), rtol=1e-10, atol=1e-12 * np.abs(p).max())
    assert plant.P.shape == (100, 100)
    assert np.all(np.triu(plant.P, 1) == 0)
    np.testing.assert_array_equal(plant.P, linalg.toeplitz(p, np.zeros(100)))
    np.testing.assert_array_equal(plant.d, 0)


def test_lifted_plant_matches_state_space(twipr_pipeline):
    loop = twipr_pipeline[0]
    rng = np.random.default_rng(3)
    z0 = rng.normal(scale=0.01, size=4)
    plant = markov_lifted_plant(loop, 30, z0=z0, disturbance=0.5)
    u = rng.normal(size=30)
    z = z0.reshape(-1, 1)
    y = []
    for n in range(30):
        z = loop.A_cl @ z + loop.B * u[n]
        y.append((loop.C @ z).item() + 0.5)
    np.testing.assert_allclose(plant.simulate(u), y, rtol=1e-10, atol=1e-10)


def test_reference_maneuver():
    r = reference_maneuver()
    assert r.shape == (100,)
    assert r[0] == 0.0
    assert r[25] == pytest.approx(30.0, rel=1e-15)
    assert abs(r[50]) < 1e-12
    with pytest.raises(ValueError):
        reference_maneuver(0)


def test_nonlinear_rest_stays_at_rest(twipr_pipeline):
    loop, _, _ = twipr_pipeline
    y = simulate_nonlinear_trial(P0, loop.K, np.zeros(100))
    assert np.abs(y).max() <= 1e-9


def test_small_signal_agrees_with_lifted_plant(twipr_pipeline):
    loop, plant, _ = twipr_pipeline
    u = np.sin(np.linspace(0, 3 * np.pi, 100))
    y_lin = plant.simulate(u)
    u *= 2.0 / np.abs(y_lin).max()
    y_lin = plant.simulate(u)
    y = simulate_nonlinear_trial(P0, loop.K, u)
    assert np.abs(y_lin).max() == pytest.approx(2.0)
    assert np.abs(y - y_lin).max() <= 0.01 * np.abs(y_lin).max()


def test_large_input_falls_over(twipr_pipeline):
    loop, plant, _ = twipr_pipeline
    robot = NonlinearTwipr(P0, loop.K, 100)
    with pytest.raises(NumericalBlowup) as info:
        robot.simulate(np.full(100, -20.0))
    assert 1 <= info.value.sample <= 100


def test_truth_robot_is_stabilised(twipr_pipeline):
    loop, _, truth = twipr_pipeline
    assert truth.params.inertia_scale == pytest.approx(1.4)
    p = truth.params
    A, B = discretize_zoh(*linearize_upright(p), p.T)
    assert max(abs(np.linalg.eigvals(A - B @ loop.K))) < 1


def test_params_roundtrip():
    p = TwiprParams(body_mass=3.0, inertia_scale=1.2)
    poles = (0.8 + 0.1j, 0.8 - 0.1j, 0.9, 0.95)
    q, qp = params_from_json(params_to_json(p, poles))
    assert q == p and qp == poles
    assert json.loads(params_to_json(p))["schema_version"] == 1


def test_params_errors():
    with pytest.raises(ConfigError, match="body_mass"):
        TwiprParams(body_mass=-1.0)
    with pytest.raises(ConfigError, match="schema_version"):
        params_from_dict({"schema_version": 99})
    with pytest.raises(ConfigError, match="params"):
        params_from_dict({"params": {"mass": 1.0}})
    with pytest.raises(ConfigError, match="poles"):
        params_from_dict({"poles": [["a", "b"]]})


def test_default_loop_poles():
    loop = build_closed_loop(P0)
    eig = np.sort(np.linalg.eigvals(loop.A_cl).real)
    np.testing.assert_allclose(eig, sorted(DEFAULT_POLES), atol=1e-8)
