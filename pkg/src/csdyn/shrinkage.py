"""Soft thresholding and the ``lam_hat = lam * sigma_hat / c`` threshold schedule."""

from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyZeroSupportError

MSEZ = "msez"
TRUE_MSE = "mse"
SCHEDULE_MODES = (MSEZ, TRUE_MSE)

# keeps lam_hat > 0 once the surrogate collapses
SIGMA_HAT_SQ_FLOOR = 1e-18


def soft_threshold(u, lam_hat):
    """``sign(u) * max(|u| - lam_hat, 0)``, componentwise."""
    if np.any(np.asarray(lam_hat) < 0):
        raise ValueError("threshold must be non-negative")
    u = np.asarray(u, dtype=float)
    out = np.sign(u) * np.maximum(np.abs(u) - lam_hat, 0.0)
    return out if out.ndim else float(out)


def soft_threshold_deriv(u, lam_hat):
    """1 where ``|u| > lam_hat``, else 0 (the kink itself maps to 0)."""
    if np.any(np.asarray(lam_hat) < 0):
        raise ValueError("threshold must be non-negative")
    out = (np.abs(np.asarray(u, dtype=float)) > lam_hat).astype(float)
    return out if out.ndim else float(out)


def msez(x_est, x0):
    """Mean of ``x_est**2`` over the coordinates where ``x0`` is exactly zero."""
    x_est = np.asarray(x_est, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if x_est.shape != x0.shape:
        raise ValueError(f"shape mismatch: {x_est.shape} vs {x0.shape}")
    zeros = x0 == 0.0
    if not zeros.any():
        raise EmptyZeroSupportError("x0 has no zero components")
    return float(np.mean(x_est[zeros] ** 2))


@dataclass(frozen=True)
class ThresholdSchedule:
    """Threshold state carried between iterations.

    ``mode`` chooses what drives ``sigma_hat_sq`` after each step: the MSE on
    the true zeros (``"msez"``, the practical surrogate) or the true MSE
    ``||x0 - x||^2 / N`` (``"mse"``, an oracle available only in simulation).
    """

    lam: float
    c: float = 1.0
    sigma_hat_sq: float = 0.0
    mode: str = MSEZ

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be > 0, got {self.lam!r}")
        if not self.c >= 1:
            raise ValueError(f"relaxation c must be >= 1, got {self.c!r}")
        if not self.sigma_hat_sq >= 0:
            raise ValueError(f"sigma_hat_sq must be >= 0, got {self.sigma_hat_sq!r}")
        if self.mode not in SCHEDULE_MODES:
            raise ValueError(f"mode must be one of {SCHEDULE_MODES}, got {self.mode!r}")

    @classmethod
    def initial(cls, lam, c, rho, mode=MSEZ):
        """Schedule at t = 0, where the surrogate starts at the prior second moment ``rho``."""
        return cls(lam=lam, c=c, sigma_hat_sq=max(float(rho), SIGMA_HAT_SQ_FLOOR), mode=mode)

    @property
    def threshold(self):
        return current_threshold(self)

    def updated(self, x_est, x0):
        """Schedule for the next iteration given the new estimate.

        With an empty zero support the MSEZ surrogate keeps its previous value.
        """
        if self.mode == MSEZ:
            try:
                value = msez(x_est, x0)
            except EmptyZeroSupportError:
                value = self.sigma_hat_sq
        else:
            value = float(np.mean((np.asarray(x0) - np.asarray(x_est)) ** 2))
        return self.with_sigma_hat_sq(value)

    def with_sigma_hat_sq(self, value):
        if np.isnan(value):
            return self
        return replace(self, sigma_hat_sq=max(float(value), SIGMA_HAT_SQ_FLOOR))


def current_threshold(schedule):
    return schedule.lam * np.sqrt(schedule.sigma_hat_sq) / schedule.c
