import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from csdyn import AMPRegressor, ISTRegressor
from csdyn.iterative import IST, run
from csdyn.model import SignalPrior, make_instance
from csdyn.shrinkage import ThresholdSchedule


@pytest.fixture(scope="module")
def inst():
    return make_instance(1000, 0.5, SignalPrior(0.1), 0.0, seed=4)


def test_params_roundtrip():
    est = ISTRegressor(lam=2.0, c=3.0, n_iter=5)
    assert est.get_params() == dict(lam=2.0, c=3.0, n_iter=5, schedule_mode="msez", rho=None)
    assert clone(est).get_params() == est.get_params()
    assert "c" not in AMPRegressor().get_params()


def test_matches_functional_run(inst):
    est = ISTRegressor(lam=3.0, c=3.0, n_iter=6, rho=0.1).fit(inst.A, inst.y, x_true=inst.x0)
    _, state = run(IST, inst, 6, ThresholdSchedule.initial(3.0, 3.0, 0.1), return_state=True)
    assert np.array_equal(est.coef_, state.x)
    assert est.n_iter_ == 6 and not est.diverged_ and est.n_features_in_ == inst.N
    assert est.trajectory_.mse[-1] == pytest.approx(np.mean((inst.x0 - est.coef_) ** 2))


def test_amp_reduces_error(inst):
    est = AMPRegressor(lam=3.0, n_iter=15).fit(inst.A, inst.y, x_true=inst.x0)
    # state evolution predicts about 0.012 at this horizon, down from 0.1
    assert np.mean((inst.x0 - est.coef_) ** 2) < 0.03
    np.testing.assert_allclose(est.predict(inst.A), inst.A @ est.coef_)
    assert est.score(inst.A, inst.y) > 0.5


def test_requires_truth(inst):
    with pytest.raises(ValueError, match="x_true"):
        ISTRegressor().fit(inst.A, inst.y)
    with pytest.raises(ValueError):
        ISTRegressor().fit(inst.A, inst.y, x_true=inst.x0[:-1])


def test_invalid_mode(inst):
    with pytest.raises(ValueError):
        ISTRegressor(schedule_mode="x").fit(inst.A, inst.y, x_true=inst.x0)


def test_predict_checks(inst):
    with pytest.raises(NotFittedError):
        AMPRegressor().predict(inst.A)
    est = AMPRegressor(n_iter=2).fit(inst.A, inst.y, x_true=inst.x0)
    with pytest.raises(ValueError):
        est.predict(inst.A[:, :10])
