"""AMP, IST and ITA iterations on a single problem instance.

IST with relaxation ``c >= 1``::

    z^t     = y - A x^t
    x^{t+1} = eta_t(A^T z^t / c + x^t)

AMP adds the Onsager correction ``z^{t-1} <eta'_{t-1}> / delta`` to the
residual (absent at t = 0, where ``z^0 = y``).  ITA is IST with ``c = 1``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyZeroSupportError
from .shrinkage import ThresholdSchedule, msez, soft_threshold, soft_threshold_deriv

AMP = "AMP"
IST = "IST"
ITA = "ITA"
ALGORITHMS = (AMP, IST, ITA)

# a run whose MSE exceeds this multiple of the initial scale is stopped and flagged
DIVERGENCE_FACTOR = 1e6


@dataclass
class AlgoState:
    """Iterate ``x^t`` together with the residual and ``<eta'>`` of the step that produced it."""

    x: np.ndarray
    z: np.ndarray
    t: int = 0
    eta_prime_mean: float = 0.0

    @property
    def finite(self):
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.z)))


def initial_state(instance):
    return AlgoState(x=np.zeros(instance.N), z=instance.y.copy(), t=0)


def ist_step(state, instance, c, lam_hat):
    if c < 1:
        raise ConfigError(f"relaxation c must be >= 1, got {c!r}")
    A = instance.A
    z = instance.y - A @ state.x
    u = (A.T @ z) / c + state.x
    return AlgoState(x=soft_threshold(u, lam_hat), z=z, t=state.t + 1,
                     eta_prime_mean=float(np.mean(soft_threshold_deriv(u, lam_hat))))


def amp_step(state, instance, delta, lam_hat):
    A = instance.A
    if state.t == 0:
        z = instance.y - A @ state.x
    else:
        z = instance.y - A @ state.x + state.z * (state.eta_prime_mean / delta)
    u = A.T @ z + state.x
    return AlgoState(x=soft_threshold(u, lam_hat), z=z, t=state.t + 1,
                     eta_prime_mean=float(np.mean(soft_threshold_deriv(u, lam_hat))))


@dataclass
class Trajectory:
    algorithm: str
    t: list = field(default_factory=list)
    mse: list = field(default_factory=list)
    msez: list = field(default_factory=list)
    lam_hat: list = field(default_factory=list)
    nonzero_fraction: list = field(default_factory=list)
    diverged: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def last_finite(self):
        return self.t[-1] if self.t else None

    def append(self, t, mse, msez_, lam_hat, nonzero_fraction):
        self.t.append(t)
        self.mse.append(mse)
        self.msez.append(msez_)
        self.lam_hat.append(lam_hat)
        self.nonzero_fraction.append(nonzero_fraction)

    def rows(self):
        return [
            dict(t=t, mse=a, msez=b, lam_hat=c, nonzero_fraction=d)
            for t, a, b, c, d in zip(self.t, self.mse, self.msez, self.lam_hat, self.nonzero_fraction)
        ]


def _msez_or_nan(x, x0):
    try:
        return msez(x, x0)
    except EmptyZeroSupportError:
        return float("nan")


def run(algo, instance, T, schedule, *, return_state=False):
    """Iterate ``algo`` for ``T`` steps from ``x = 0`` and record the trajectory.

    Row ``t`` holds the MSE and MSEZ of ``x^t`` and the threshold applied to
    ``x^t`` to produce ``x^{t+1}``.  ``schedule`` is the t = 0 schedule (see
    ``ThresholdSchedule.initial``); its ``c`` is also the IST relaxation.
    A run that produces non-finite values, or an MSE beyond
    ``DIVERGENCE_FACTOR`` times the initial scale, stops early with
    ``diverged=True``.
    """
    algo = algo.upper()
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    if T < 1:
        raise ConfigError(f"horizon T must be >= 1, got {T!r}")
    if not isinstance(schedule, ThresholdSchedule):
        raise TypeError("schedule must be a ThresholdSchedule")
    c = schedule.c
    if algo == ITA and c != 1:
        raise ConfigError(f"ITA is IST with c = 1, got c = {c!r}")

    x0 = instance.x0
    N = instance.N
    rho = instance.rho if instance.rho is not None else float(np.mean(x0 != 0))
    state = initial_state(instance)
    mse0 = float(np.mean(x0**2))
    limit = DIVERGENCE_FACTOR * max(rho, mse0, instance.sigma_omega**2, np.finfo(float).tiny)

    traj = Trajectory(algorithm=algo, meta=dict(N=N, M=instance.M, delta=instance.delta, rho=rho,
                                                  c=c, lam=schedule.lam, mode=schedule.mode,
                                                  sigma_omega=instance.sigma_omega, seed=instance.seed))
    traj.append(0, mse0, _msez_or_nan(state.x, x0), float(schedule.threshold), 0.0)

    for _ in range(T):
        lam_hat = schedule.threshold
        if algo == AMP:
            state = amp_step(state, instance, instance.delta, lam_hat)
        else:
            state = ist_step(state, instance, c, lam_hat)
        if not state.finite:
            traj.diverged = True
            break
        x = state.x
        mse = float(np.mean((x0 - x) ** 2))
        schedule = schedule.updated(x, x0)
        traj.append(state.t, mse, _msez_or_nan(x, x0), float(schedule.threshold), float(np.mean(x != 0)))
        if mse > limit:
            traj.diverged = True
            break
    if return_state:
        return traj, state
    return traj
