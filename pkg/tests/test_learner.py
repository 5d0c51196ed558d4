import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellload import learner
from cellload.learner import (
    DuplicateAnchorError,
    LearnerModel,
    cone_distance,
    cone_distance_matrix,
    envelope,
    estimate_lipschitz,
    fit,
    predict,
    smooth_monotone,
)
from cellload.loadmodel import solve_fixed_point_batch
from cellload.scenario import TrainingSet, generate_dataset
from oracles import random_monotone_function, smoothing_by_vertices


def test_cone_distance_examples():
    assert cone_distance([3.0, 1.0], [1.0, 2.0]) == 2.0
    assert cone_distance([1.0, 1.0], [2.0, 2.0]) == 0.0
    assert cone_distance([4.0, 6.0], [1.0, 2.0]) == 5.0
    D = cone_distance_matrix([[0.0, 0.0], [3.0, 4.0]])
    np.testing.assert_array_equal(D, [[0.0, 0.0], [5.0, 0.0]])


def test_lipschitz_estimate_examples():
    ds = TrainingSet([[0.0], [1.0]], [0.0, 1.0])
    assert estimate_lipschitz(ds, 0.1)[0] == pytest.approx(0.8)
    flat = TrainingSet([[0.0], [1.0], [2.0]], [0.3, 0.3, 0.3])
    assert estimate_lipschitz(flat, 0.0)[0] == 0.0
    three = TrainingSet([[0.0], [1.0], [2.0]], [0.0, 0.9, 1.0])
    assert estimate_lipschitz(three, 0.0)[0] == pytest.approx(0.9)


def test_lipschitz_clamped_at_zero():
    ds = TrainingSet([[0.0], [1.0]], [0.5, 0.52])
    assert estimate_lipschitz(ds, 0.05)[0] == 0.0


def test_duplicate_anchors_rejected():
    ds = TrainingSet([[1.0, 2.0], [0.0, 0.0], [1.0, 2.0]], [0.1, 0.2, 0.3])
    with pytest.raises(DuplicateAnchorError, match="0 and 2"):
        fit(ds, 0.0)


def test_lipschitz_needs_two_samples():
    with pytest.raises(ValueError):
        estimate_lipschitz(TrainingSet([[1.0]], [0.5]), 0.0)


def test_single_sample_fit_is_constant():
    model = fit(TrainingSet([[1.0, 1.0]], [0.4]), 0.0)
    assert model.lipschitz[0] == 0.0
    np.testing.assert_array_equal(predict(model, [[0.0, 0.0], [9.0, 9.0]]), [[0.4], [0.4]])


def test_two_point_smoothing_is_centred():
    ds = TrainingSet([[1.0], [2.0]], [0.6, 0.5])
    out = smooth_monotone(ds, [0.0])
    np.testing.assert_allclose(out.outputs[:, 0], [0.55, 0.55], atol=1e-12)
    assert np.abs(out.outputs[:, 0] - [0.6, 0.5]).sum() == pytest.approx(0.1, abs=1e-12)
    assert out.smoothed


def test_compatible_data_left_alone():
    ds = TrainingSet([[0.0], [1.0], [2.0]], [0.1, 0.4, 0.5])
    out = smooth_monotone(ds, [0.5])
    np.testing.assert_allclose(out.outputs, ds.outputs, atol=1e-12)


def test_three_point_smoothing_against_enumeration():
    x = np.array([[0.0], [1.0], [2.0]])
    y = np.array([0.5, 0.2, 0.6])
    bound = 0.1 * cone_distance_matrix(x)
    best, _ = smoothing_by_vertices(y, bound)
    out = smooth_monotone(TrainingSet(x, y), [0.1]).outputs[:, 0]
    assert np.abs(out - y).sum() == pytest.approx(best, abs=1e-9)
    # hand solution: rho_2 = 0.5, rho_3 = 0.6, cost 0.3
    assert best == pytest.approx(0.3)
    assert learner.LearnerModel([0.1], x, out).is_compatible()


@pytest.mark.parametrize("seed", range(12))
def test_smoothing_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(2, 6))
    dim = int(rng.integers(1, 4))
    x = rng.uniform(size=(K, dim))
    y = rng.uniform(size=K)
    lip = float(rng.uniform(0.0, 1.5))
    best, _ = smoothing_by_vertices(y, lip * cone_distance_matrix(x))
    out = smooth_monotone(TrainingSet(x, y), [lip]).outputs[:, 0]
    # clamping to [0, 1] never moves values that already lie there
    assert np.abs(out - y).sum() == pytest.approx(best, abs=1e-6)
    assert LearnerModel([lip], x, out).compatibility_gap()[0] <= 1e-9


def test_smoothing_tie_break_is_order_free():
    rng = np.random.default_rng(4)
    x = rng.uniform(size=(30, 3))
    y = rng.uniform(size=(30, 2))
    lip = [0.2, 0.0]
    out = smooth_monotone(TrainingSet(x, y), lip).outputs
    perm = rng.permutation(30)
    out_p = smooth_monotone(TrainingSet(x[perm], y[perm]), lip).outputs
    np.testing.assert_allclose(out_p, out[perm], atol=1e-9)


def test_envelope_examples():
    model = LearnerModel([2.0], [[0.0], [1.0]], [0.0, 1.0])
    env = envelope(model, [0.5])
    assert env.lower[0] == 0.0 and env.upper[0] == 1.0
    assert predict(model, [0.5])[0] == 0.5
    model = LearnerModel([0.4], [[1.0], [2.0]], [0.2, 0.6])
    env = envelope(model, [0.0])
    assert env.lower[0] == 0.0 and env.upper[0] == pytest.approx(0.2)
    assert predict(model, [0.0])[0] == pytest.approx(0.1)


def test_envelope_collapses_at_anchor():
    model = LearnerModel([1.0], [[0.0], [1.0]], [0.0, 1.0])
    env = envelope(model, [0.5])
    assert env.lower[0] == env.upper[0] == 0.5


def test_envelope_clamped_to_unit_interval():
    model = LearnerModel([1.0], [[0.0]], [0.9])
    env = envelope(model, [[5.0], [-5.0]])
    np.testing.assert_array_equal(env.upper[:, 0], [1.0, 0.9])
    np.testing.assert_array_equal(env.lower[:, 0], [0.9, 0.0])


def test_predict_rejects_wrong_width():
    model = LearnerModel([1.0], [[0.0, 0.0]], [0.5])
    with pytest.raises(ValueError, match="expects 2"):
        predict(model, [1.0, 2.0, 3.0])


def chain_dataset(scenario, params, k, seed):
    """Noiseless loads on componentwise increasing rate vectors.

    Loads are monotone in the rates, so along a chain the data is compatible
    with its own Lipschitz estimate.
    """
    rng = np.random.default_rng(seed)
    steps = rng.uniform(0.0, (params.rate_max - params.rate_min) / (2 * k),
                        size=(k, scenario.num_tp))
    rates = params.rate_min + np.cumsum(steps, axis=0)
    load, _, _, converged, _ = solve_fixed_point_batch(scenario, rates)
    assert converged.all()
    return TrainingSet(rates, load)


@pytest.fixture(scope="module")
def noiseless_model(small_scenario, small_params):
    data = chain_dataset(small_scenario, small_params, 40, seed=9)
    return data, fit(data, 0.0)


def test_interpolates_noiseless_anchors(noiseless_model):
    data, model = noiseless_model
    assert model.is_compatible()
    np.testing.assert_allclose(predict(model, data.inputs), data.outputs, atol=1e-12, rtol=0)


def test_prediction_is_envelope_midpoint(noiseless_model, small_params):
    _, model = noiseless_model
    rng = np.random.default_rng(0)
    x = rng.uniform(small_params.rate_min, small_params.rate_max, size=(200, model.num_tp))
    env = envelope(model, x)
    g = predict(model, x)
    assert np.all(env.lower <= g) and np.all(g <= env.upper)
    np.testing.assert_array_equal(g, 0.5 * (env.lower + env.upper))


def _noisy_model(small_scenario, small_params, k=60, seed=2):
    data = generate_dataset(small_scenario, small_params, k, 0.05, seed=seed)
    return fit(data, 0.05)


def test_noisy_fit_is_compatible(small_scenario, small_params):
    model = _noisy_model(small_scenario, small_params)
    assert np.all(model.compatibility_gap() <= 1e-9)
    assert np.all((model.values >= 0) & (model.values <= 1))


def test_monotone_and_lipschitz_predictor(small_scenario, small_params):
    model = _noisy_model(small_scenario, small_params)
    rng = np.random.default_rng(1)
    lo, hi = small_params.rate_min, small_params.rate_max
    x = rng.uniform(lo, hi, size=(500, model.num_tp))
    y = x + rng.uniform(0.0, 1.0, size=x.shape) * (hi - x) * (rng.random(x.shape) < 0.5)
    gx, gy = predict(model, x), predict(model, y)
    assert np.all(gx <= gy + 1e-12)
    z = rng.uniform(lo, hi, size=x.shape)
    gz = predict(model, z)
    dist = np.linalg.norm(x - z, axis=1)[:, None]
    assert np.all(np.abs(gx - gz) <= model.lipschitz[None, :] * dist + 1e-12)


@pytest.mark.parametrize("dim", [1, 2])
def test_envelope_contains_monotone_lipschitz_functions(dim):
    rng = np.random.default_rng(100 + dim)
    for _ in range(20):
        h, lip = random_monotone_function(rng, dim)
        anchors = rng.uniform(size=(int(rng.integers(3, 30)), dim))
        model = LearnerModel([lip], anchors, h(anchors))
        assert model.is_compatible()
        queries = rng.uniform(size=(100, dim))
        env = envelope(model, queries)
        truth = h(queries)
        assert np.all(env.lower[:, 0] <= truth + 1e-12)
        assert np.all(truth <= env.upper[:, 0] + 1e-12)


def test_bs_columns_are_independent(small_scenario, small_params):
    data = generate_dataset(small_scenario, small_params, 30, 0.05, seed=5)
    full = fit(data, 0.05)
    solo = fit(data.column(2), 0.05)
    assert solo.lipschitz[0] == full.lipschitz[2]
    np.testing.assert_array_equal(solo.values[:, 0], full.values[:, 2])


def test_fit_is_deterministic(small_scenario, small_params):
    a = _noisy_model(small_scenario, small_params, k=30)
    b = _noisy_model(small_scenario, small_params, k=30)
    assert a == b


def test_model_json_round_trip(tmp_path, small_scenario, small_params):
    model = _noisy_model(small_scenario, small_params, k=20)
    path = tmp_path / "model.json"
    model.to_json(path)
    back = LearnerModel.from_json(path)
    assert back == model
    assert json.loads(path.read_text())["type"] == "minimax"
    x = np.full((1, model.num_tp), 2.5e6)
    np.testing.assert_array_equal(back.predict(x), model.predict(x))


def test_from_dict_rejects_other_types():
    with pytest.raises(ValueError, match="kernel"):
        LearnerModel.from_dict({"type": "kernel", "lipschitz": [0.0], "anchors": [[0.0]],
                                "values": [[0.0]]})


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8),
       st.floats(0.0, 2.0))
def test_smoothed_values_always_compatible(values, lip):
    x = np.linspace(0.0, 1.0, len(values))[:, None]
    out = smooth_monotone(TrainingSet(x, values), [lip]).outputs
    assert LearnerModel([lip], x, out).compatibility_gap()[0] <= 1e-9
    assert np.all((out >= 0) & (out <= 1))
