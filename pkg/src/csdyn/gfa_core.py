"""Kernel algebra of the IST dynamical mean-field equations.

Order parameters up to stage ``t``:

* overlap ``m[s] = <<x0 x^s>>``
* correlation ``C[s, s'] = <<x^s x^s'>>``
* response ``G[s, s'] = <<x^s (R^{-1} v)^{s'}>>`` for ``s > s'`` (zero otherwise)

From them, with ``a = 1 / (c delta)`` and the unit lower-triangular
``L = I + a G``:

* ``D[s, s'] = sigma_omega^2 + (rho - m[s] - m[s'] + C[s, s']) / delta``
* ``R = c^-2 L^{-1} D L^{-T}``   (covariance of the effective noise ``v``)
* ``Gamma = (c - 1)/c I + c^-1 L^{-1} a G``   (retarded self-interaction)
* ``k_hat[s] = c^-1 det(Lambda_s)``   (signal gain)

``Lambda_s`` is ``I + a G^T`` on indices ``0..s`` with row ``s`` replaced by
ones, so ``det(Lambda_s)`` is the ``s``-th row sum of ``L^{-1}`` (Cramer).
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InternalConsistencyError

LAMBDA_ROW_OF_ONES = "A"
LAMBDA_UNIT_ROW = "B"
INTERPRETATIONS = (LAMBDA_ROW_OF_ONES, LAMBDA_UNIT_ROW)

SKEW_TOL = 1e-10


@dataclass
class OrderParams:
    m: np.ndarray
    C: np.ndarray
    G: np.ndarray

    @property
    def horizon(self):
        return len(self.m) - 1

    @classmethod
    def initial(cls):
        """Stage 0: ``x^0 = 0`` pins ``m[0] = C[0, 0] = 0``."""
        return cls(m=np.zeros(1), C=np.zeros((1, 1)), G=np.zeros((1, 1)))

    def truncated(self, t):
        n = t + 1
        return OrderParams(self.m[:n].copy(), self.C[:n, :n].copy(), self.G[:n, :n].copy())

    def validate(self, atol=1e-12):
        t1 = len(self.m)
        if self.C.shape != (t1, t1) or self.G.shape != (t1, t1):
            raise ValueError("order parameter shapes are inconsistent")
        if not np.allclose(self.C, self.C.T, rtol=0, atol=atol):
            raise ValueError("C is not symmetric")
        if np.any(np.diag(self.C) < -atol):
            raise ValueError("C has a negative diagonal entry")
        check_causal(self.G)
        return self

    def to_dict(self):
        return {"m": self.m.tolist(), "C": self.C.tolist(), "G": self.G.tolist()}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["m"], float), np.asarray(doc["C"], float), np.asarray(doc["G"], float))


def check_causal(G):
    """Reject a response matrix with any entry on or above the diagonal."""
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"G must be square, got shape {G.shape}")
    if np.any(np.triu(G) != 0):
        raise ValueError("G must be strictly lower-triangular (causality)")
    return G


def _unit_lower(G, c, delta):
    return np.eye(len(G)) + check_causal(G) / (c * delta)


def _unit_lower_inverse(G, c, delta):
    L = _unit_lower(G, c, delta)
    # det(L) = 1 exactly: unit diagonal by construction
    return solve_triangular(L, np.eye(len(L)), lower=True, unit_diagonal=True)


def build_D(params, rho, delta, sigma_omega_sq):
    m, C = params.m, params.C
    # exactly symmetric: float addition commutes, and C is symmetrized
    return sigma_omega_sq + (rho - (m[:, None] + m[None, :]) + 0.5 * (C + C.T)) / delta


def build_R(D, G, c, delta):
    D = np.asarray(D, dtype=float)
    L = _unit_lower(G, c, delta)
    # L^{-1} D L^{-T} via two forward substitutions
    left = solve_triangular(L, D, lower=True, unit_diagonal=True)
    R = solve_triangular(L, left.T, lower=True, unit_diagonal=True) / c**2
    skew = np.max(np.abs(R - R.T)) if R.size else 0.0
    if skew > SKEW_TOL * max(1.0, np.max(np.abs(R))):
        raise InternalConsistencyError(f"R skew part {skew:.3e} exceeds tolerance")
    return 0.5 * (R + R.T)


def build_Gamma(G, c, delta):
    G = check_causal(G)
    a = 1.0 / (c * delta)
    L = _unit_lower(G, c, delta)
    gamma = (c - 1.0) / c * np.eye(len(G)) + solve_triangular(L, a * G, lower=True, unit_diagonal=True) / c
    return gamma


def build_Gamma_alt(G, c, delta):
    """``I - c^-1 L^{-1}``: the same matrix written without ``a G`` on the right."""
    return np.eye(len(G)) - _unit_lower_inverse(G, c, delta) / c


def lambda_matrix(G, c, delta, s, interpretation=LAMBDA_ROW_OF_ONES):
    """``Lambda_s`` over indices ``0..s``.

    Entry ``(s', s'')`` is ``delta_{s,s'} + (1 - delta_{s,s'})(delta_{s',s''} + a G[s'', s'])``
    (interpretation ``"A"``: row ``s`` is all ones).  Interpretation ``"B"``
    reads the first term as ``delta_{s,s'} delta_{s',s''}``, making row ``s``
    the unit vector.
    """
    if interpretation not in INTERPRETATIONS:
        raise ValueError(f"interpretation must be one of {INTERPRETATIONS}")
    G = check_causal(G)
    if s >= len(G):
        raise ValueError(f"stage {s} beyond available response entries ({len(G)})")
    a = 1.0 / (c * delta)
    n = s + 1
    lam = np.eye(n) + a * G[:n, :n].T
    lam[s, :] = 1.0 if interpretation == LAMBDA_ROW_OF_ONES else np.eye(n)[s]
    return lam


def effective_gain(G, c, delta, s, interpretation=LAMBDA_ROW_OF_ONES):
    """``k_hat[s] = det(Lambda_s) / c``."""
    return float(np.linalg.det(lambda_matrix(G, c, delta, s, interpretation))) / c


def mse_from_order_params(params, rho, t, *, clamp=True):
    """Predicted MSE ``rho - 2 m[t] + C[t, t]``; clamped at 0 unless ``clamp=False``."""
    raw = float(rho - 2.0 * params.m[t] + params.C[t, t])
    return max(raw, 0.0) if clamp else raw


@dataclass
class GfaKernel:
    D: np.ndarray
    R: np.ndarray
    Gamma: np.ndarray
    k_hat: np.ndarray

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("D", "R", "Gamma", "k_hat")}


def build_kernel(params, rho, delta, sigma_omega_sq, c, interpretation=LAMBDA_ROW_OF_ONES):
    D = build_D(params, rho, delta, sigma_omega_sq)
    G = params.G
    k_hat = np.array([effective_gain(G, c, delta, s, interpretation) for s in range(len(G))])
    return GfaKernel(D=D, R=build_R(D, G, c, delta), Gamma=build_Gamma(G, c, delta), k_hat=k_hat)


def kernel_snapshot(params, kernel, **extra):
    """JSON text holding order parameters and derived kernel, for debugging and golden files."""
    doc = {"order_params": params.to_dict(), "kernel": kernel.to_dict()}
    doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True)
