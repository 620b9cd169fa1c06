"""Scalar state evolution for AMP with a soft-threshold denoiser.

One step maps the current MSE ``sigma_sq`` to

    E[(eta(X0 + tau Z; lam_hat) - X0)^2],    tau^2 = sigma_omega^2 + sigma_sq / delta,

with ``X0`` drawn from the Bernoulli-Gaussian prior and ``Z ~ N(0, 1)``.
For fixed ``X0`` the Gaussian average over ``Z`` is available in closed form
(truncated-normal moments).  The remaining integral over the Gaussian
component of ``X0`` is smooth but, for small ``tau`` and ``lam_hat``, has
structure much narrower than any fixed Gauss-Hermite node spacing, so it is
done adaptively on intervals split at ``0``, ``+-lam_hat`` and a few ``tau``
around the kinks.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .model import SignalPrior
from .shrinkage import MSEZ, SCHEDULE_MODES, SIGMA_HAT_SQ_FLOOR

_SQRT_2PI = np.sqrt(2.0 * np.pi)
# beyond this the standard normal weight is below 1e-30
_TAIL = 12.0


def _phi(z):
    return np.exp(-0.5 * z * z) / _SQRT_2PI


def soft_sq_error(target, mean, scale, lam_hat):
    """``E[(target - eta(mean + scale Z; lam_hat))^2]`` for ``Z ~ N(0, 1)``.

    Vectorized over ``target`` and ``mean``; ``scale`` may be zero.
    """
    a = np.asarray(target, dtype=float)
    mu = np.asarray(mean, dtype=float)
    if scale == 0:
        eta = np.sign(mu) * np.maximum(np.abs(mu) - lam_hat, 0.0)
        return (a - eta) ** 2
    s = float(scale)
    hi = (lam_hat - mu) / s  # u > lam_hat  <=>  Z > hi
    lo = (-lam_hat - mu) / s  # u < -lam_hat <=>  Z < lo
    p_hi, p_lo = ndtr(-hi), ndtr(lo)
    f_hi, f_lo = _phi(hi), _phi(lo)
    # dead zone: eta = 0
    out = a**2 * (1.0 - p_hi - p_lo)
    # upper branch: target - (u - lam) = d - s Z with d = target + lam - mu
    d = a + lam_hat - mu
    out += d**2 * p_hi - 2.0 * d * s * f_hi + s**2 * (p_hi + hi * f_hi)
    # lower branch: target - (u + lam) = d - s Z with d = target - lam - mu
    d = a - lam_hat - mu
    out += d**2 * p_lo + 2.0 * d * s * f_lo + s**2 * (p_lo - lo * f_lo)
    return np.maximum(out, 0.0)


def _breakpoints(tau, lam_hat):
    pts = {0.0, _TAIL, -_TAIL}
    for k in (lam_hat, -lam_hat):
        for w in (0.0, 1.0, 4.0, 8.0):
            pts.update((k - w * tau, k + w * tau))
    return sorted(p for p in pts if -_TAIL <= p <= _TAIL)


def gaussian_component_error(tau, lam_hat, *, rel_tol=1e-12):
    """``E[(eta(X + tau Z; lam_hat) - X)^2]`` for ``X, Z ~ N(0, 1)`` independent."""
    f = lambda x: float(soft_sq_error(x, x, tau, lam_hat)) * float(_phi(x))  # noqa: E731
    edges = [-np.inf, *_breakpoints(tau, lam_hat), np.inf]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            total += integrate.quad(f, a, b, epsabs=1e-16, epsrel=rel_tol, limit=200)[0]
    return total


def zero_component_second_moment(tau, lam_hat):
    """``E[eta(tau Z; lam_hat)^2]``: the estimate's second moment on true zeros."""
    return float(soft_sq_error(0.0, 0.0, tau, lam_hat))


def se_step(sigma_sq, delta, sigma_omega_sq, prior, lam_hat):
    if delta <= 0:
        raise ValueError("delta must be > 0")
    if min(sigma_sq, sigma_omega_sq, lam_hat) < 0:
        raise ValueError("sigma_sq, sigma_omega_sq and lam_hat must be >= 0")
    if not isinstance(prior, SignalPrior):
        prior = SignalPrior(float(prior))
    rho = prior.rho
    tau = np.sqrt(sigma_omega_sq + sigma_sq / delta)
    if not np.isfinite(lam_hat):
        return rho
    out = 0.0
    if rho < 1:
        out += (1 - rho) * zero_component_second_moment(tau, lam_hat)
    if rho > 0:
        out += rho * gaussian_component_error(tau, lam_hat)
    return float(out)


@dataclass
class SeTrajectory:
    t: list = field(default_factory=list)
    sigma_sq: list = field(default_factory=list)
    tau_sq: list = field(default_factory=list)
    lam_hat: list = field(default_factory=list)
    msez: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)


def se_run(prior, delta, sigma_omega_sq, lam, c=1.0, T=10, *, schedule_mode=MSEZ):
    """Iterate ``se_step`` from ``sigma_0^2 = rho`` with ``lam_hat_t = lam * sigma_hat_t / c``.

    ``sigma_hat_t^2`` starts at ``rho`` and then follows either the predicted
    MSE on zeros (``"msez"``) or the predicted MSE (``"mse"``), matching the
    simulated algorithm's schedule mode.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if schedule_mode not in SCHEDULE_MODES:
        raise ValueError(f"schedule_mode must be one of {SCHEDULE_MODES}")
    if not isinstance(prior, SignalPrior):
        prior = SignalPrior(float(prior))
    rho = prior.rho
    out = SeTrajectory(meta=dict(rho=rho, delta=delta, sigma_omega_sq=sigma_omega_sq, lam=lam, c=c,
                                 schedule_mode=schedule_mode))
    sigma_sq, sigma_hat_sq, msez_t = rho, max(rho, SIGMA_HAT_SQ_FLOOR), 0.0
    for t in range(T + 1):
        tau_sq = sigma_omega_sq + sigma_sq / delta
        lam_hat = lam * np.sqrt(sigma_hat_sq) / c
        out.t.append(t)
        out.sigma_sq.append(float(sigma_sq))
        out.tau_sq.append(float(tau_sq))
        out.lam_hat.append(float(lam_hat))
        out.msez.append(float(msez_t))
        if t == T:
            break
        msez_t = zero_component_second_moment(np.sqrt(tau_sq), lam_hat)
        sigma_sq = se_step(sigma_sq, delta, sigma_omega_sq, prior, lam_hat)
        sigma_hat_sq = max(msez_t if schedule_mode == MSEZ else sigma_sq, SIGMA_HAT_SQ_FLOOR)
    return out
