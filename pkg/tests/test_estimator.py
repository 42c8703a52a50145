import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from stfr import SpaceTimeFRSolver
from stfr.errors import ConfigurationError
from stfr.estimator import make_model, make_problem


def test_params_roundtrip_and_clone():
    est = SpaceTimeFRSolver(model="burgers", p=2, N=4, c="c_Hu")
    params = est.get_params()
    assert params["model"] == "burgers" and params["c"] == "c_Hu"
    other = clone(est).set_params(N=8)
    assert other.N == 8 and est.N == 4
    assert not hasattr(other, "field_")


def test_unfitted_predict_raises():
    with pytest.raises(NotFittedError):
        SpaceTimeFRSolver().predict(np.zeros((1, 2)))


def test_fit_predict_score_scalar():
    est = SpaceTimeFRSolver(p=3, N=4).fit()
    assert est.stats_.converged and est.field_.shape == (4, 4, 1, 16)
    X = np.array([[0.3, 0.5], [1.7, 2.0]])
    pred = est.predict(X)
    exact = 2 * np.sin(np.pi * (X[:, 0] - 0.6 * X[:, 1])) + 1.01
    assert pred.shape == (2,) and np.abs(pred - exact).max() < 5e-2
    assert est.score() == pytest.approx(-est.error())
    assert est.score(X, exact) <= 0.0
    with pytest.raises(ValueError):
        est.predict(np.zeros((3, 3)))


def test_predict_system_shape():
    est = SpaceTimeFRSolver(model="euler", p=2, N=2).fit()
    assert est.predict(np.array([[0.1, 0.1], [1.0, 1.0], [1.5, 0.2]])).shape == (3, 3)


def test_two_point_requires_coupled_mode():
    with pytest.raises(ConfigurationError):
        SpaceTimeFRSolver(model="burgers", temporal_flux="two_point", mode="march").fit()
    assert SpaceTimeFRSolver(temporal_flux="two_point")._resolved_mode() == "coupled"


def test_factories():
    assert make_model("euler", "matrix").dissipation_kind == "matrix"
    assert make_model("burgers", "llf").with_llf
    for bad in (("maxwell", "auto"),):
        with pytest.raises(ConfigurationError):
            make_model(*bad)
    with pytest.raises(ConfigurationError):
        make_problem("advection", "shock")
    assert make_problem("euler", "discontinuous").exact is None
