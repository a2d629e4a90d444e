import math

import numpy as np
import pytest

import confsel


def four_units():
    x = np.array([[0.0], [1.0], [0.0], [1.0]])
    t = np.array([1, 1, 0, 0], dtype=np.int32)
    y = np.array([5.0, 7.0, 1.0, 2.0])
    return x, t, y


def test_four_unit_estimates():
    x, t, y = four_units()
    assert confsel.estimate(x, t, y, [0], "ate", "norm") == 4.5
    assert confsel.estimate(x, t, y, [0], "att", "norm") == 4.5


def test_empty_set_rejected_for_vector_norm():
    x, t, y = four_units()
    with pytest.raises(confsel.ValidationError):
        confsel.estimate(x, t, y, [], "ate", "norm")
    with pytest.raises(ValueError):
        confsel.estimate(x, t, y, [0], "ate", "mahalanobis")


def test_intercept_only_logistic():
    t = np.array([1, 1, 1] + [0] * 7, dtype=np.int32)
    intercept, coef = confsel.fit_logistic(t, np.zeros((10, 0)))
    assert abs(intercept - math.log(0.3 / 0.7)) < 1e-10
    assert coef.shape == (0,)


def test_match_nearest_prefers_lowest_index():
    values = np.array([[0.0], [-1.0], [1.0]])
    t = np.array([1, 0, 0], dtype=np.int32)
    assert confsel.match_nearest(values, t) == [1, 0, 0]


def test_simulate_shapes_and_effect():
    d = confsel.simulate("mixed", "nonlinear", 300, 11)
    assert d["x"].shape == (300, 10)
    assert d["kinds"][1] == "continuous"
    assert d["kinds"][0].startswith("unordered")
    assert np.allclose(d["y"], np.where(d["t"] == 1, d["y1"], d["y0"]))
    again = confsel.simulate("mixed", "nonlinear", 300, 11)
    assert np.array_equal(d["x"], again["x"])


def test_select_sdr_on_continuous_data():
    d = confsel.simulate("continuous", "linear", 1000, 5)
    out = confsel.select(d["x"], d["t"], d["y"], d["kinds"], algorithm="a", backend="sdr")
    assert set(out["q0"]) <= set(out["xT"])
    assert {0, 1, 2, 3, 6} <= set(out["xT"])
    assert "x0" not in out


def test_sdr_refuses_discrete_covariates():
    d = confsel.simulate("discrete", "linear", 200, 5)
    with pytest.raises(confsel.BackendError):
        confsel.select(d["x"], d["t"], d["y"], d["kinds"], algorithm="a", backend="sdr")


def test_select_kernel_runs_on_discrete_data():
    d = confsel.simulate("discrete", "linear", 300, 6)
    out = confsel.select(d["x"], d["t"], d["y"], d["kinds"], algorithm="b", backend="kernel")
    assert set(out["z0"]) <= set(out["x0"])
    assert set(out["z1"]) <= set(out["x1"])


def test_run_study_is_independent_of_jobs():
    scenario = "setup = continuous\nn = 200\nreplications = 6\nseed = 3\n"
    one = confsel.run_study(scenario, 1)
    three = confsel.run_study(scenario, 3)
    assert one == three
    assert one["table2"].splitlines()[0] == "condition,X_T,Q_0,Q_1,X_0,X_1,Z_0,Z_1"


def test_binary_latent_correlation():
    rho = confsel.latent_binary_correlation()
    assert abs(2 / math.pi * math.asin(rho) - 0.7) < 1e-12
