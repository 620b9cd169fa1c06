"""scikit-learn style wrappers around the reconstruction iterations.

The sensing matrix plays the role of the design matrix ``X`` and the
measurements are the target, so ``fit(A, y)`` recovers ``coef_ ~ x0`` and
``predict(A)`` returns ``A @ coef_``.  The threshold schedule is driven by
the MSE on zeros (or the true MSE), which needs the true signal: pass it as
the ``x_true`` fit parameter.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .iterative import AMP, IST, run
from .model import ProblemInstance
from .shrinkage import MSEZ, SCHEDULE_MODES, ThresholdSchedule


class _ThresholdingRegressor(RegressorMixin, BaseEstimator):
    _algorithm = None

    def _relaxation(self):
        return 1.0

    def fit(self, X, y, x_true=None):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if x_true is None:
            raise ValueError("x_true is required: the threshold schedule is driven by the error on the true signal")
        x_true = check_array(x_true, ensure_2d=False, dtype=np.float64)
        if x_true.shape != (X.shape[1],):
            raise ValueError(f"x_true must have shape ({X.shape[1]},), got {x_true.shape}")
        if self.schedule_mode not in SCHEDULE_MODES:
            raise ValueError(f"schedule_mode must be one of {SCHEDULE_MODES}")
        rho = self.rho if self.rho is not None else float(np.mean(x_true != 0))
        inst = ProblemInstance(A=X, x0=x_true, omega=np.zeros(X.shape[0]), y=y, rho=rho)
        sched = ThresholdSchedule.initial(self.lam, self._relaxation(), rho, self.schedule_mode)
        traj, state = run(self._algorithm, inst, self.n_iter, sched, return_state=True)
        self.coef_ = state.x
        self.trajectory_ = traj
        self.n_iter_ = len(traj) - 1
        self.diverged_ = traj.diverged
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_


class ISTRegressor(_ThresholdingRegressor):
    """Iterative shrinkage-thresholding with relaxation ``c`` (``c=1`` is ITA).

    Parameters
    ----------
    lam : float
        Threshold control; the threshold at step t is ``lam * sigma_hat_t / c``.
    c : float
        Relaxation, ``c >= 1``.
    n_iter : int
        Number of iterations.
    schedule_mode : {"msez", "mse"}
        Quantity driving ``sigma_hat_t``.
    rho : float or None
        Initial ``sigma_hat_0^2``; defaults to the nonzero fraction of ``x_true``.
    """

    _algorithm = IST

    def __init__(self, lam=3.0, c=1.0, n_iter=30, schedule_mode=MSEZ, rho=None):
        self.lam = lam
        self.c = c
        self.n_iter = n_iter
        self.schedule_mode = schedule_mode
        self.rho = rho

    def _relaxation(self):
        return self.c


class AMPRegressor(_ThresholdingRegressor):
    """Approximate message passing with soft thresholding (same parameters as ``ISTRegressor`` minus ``c``)."""

    _algorithm = AMP

    def __init__(self, lam=3.0, n_iter=30, schedule_mode=MSEZ, rho=None):
        self.lam = lam
        self.n_iter = n_iter
        self.schedule_mode = schedule_mode
        self.rho = rho
