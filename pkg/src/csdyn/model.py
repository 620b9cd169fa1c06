"""Random compressed-sensing instances ``y = A x0 + omega``.

Signal components are i.i.d. Bernoulli-Gaussian (zero with probability
``1 - rho``, standard normal otherwise), the sensing matrix has i.i.d.
``N(0, 1/M)`` entries and the noise is i.i.d. ``N(0, sigma_omega**2)``.
"""

import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng

__all__ = [
    "SignalPrior",
    "ProblemInstance",
    "sample_signal",
    "sample_matrix",
    "synthesize",
    "make_instance",
    "n_measurements",
    "dump_json",
    "load_json",
    "dump_binary",
    "load_binary",
]


@dataclass(frozen=True)
class SignalPrior:
    """Bernoulli-Gaussian prior ``(1 - rho) delta(x) + rho N(0, 1)``."""

    rho: float

    def __post_init__(self):
        if not (0.0 <= self.rho <= 1.0) or not np.isfinite(self.rho):
            raise ValueError(f"rho must lie in [0, 1], got {self.rho!r}")

    @property
    def second_moment(self):
        return float(self.rho)

    def sample(self, n, rng):
        return sample_signal(n, self, rng)


@dataclass
class ProblemInstance:
    A: np.ndarray
    x0: np.ndarray
    omega: np.ndarray
    y: np.ndarray
    sigma_omega: float = 0.0
    rho: float | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def M(self):
        return self.A.shape[0]

    @property
    def N(self):
        return self.A.shape[1]

    @property
    def delta(self):
        return self.M / self.N

    @property
    def underdetermined(self):
        return self.M < self.N

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (
            self.sigma_omega == other.sigma_omega
            and self.rho == other.rho
            and self.seed == other.seed
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("A", "x0", "omega", "y")
            )
        )


def _check_count(name, n):
    if int(n) != n or n < 1:
        raise ValueError(f"{name} must be a positive integer, got {n!r}")
    return int(n)


def sample_signal(n, prior, rng):
    """Draw ``n`` i.i.d. components from ``prior``.

    The support mask and the Gaussian values are drawn as two full-length
    arrays so the realization does not depend on how many components land
    in the support.
    """
    n = _check_count("n", n)
    if not isinstance(prior, SignalPrior):
        prior = SignalPrior(float(prior))
    rng = _rng.as_generator(rng)
    support = rng.random(n) < prior.rho
    values = rng.standard_normal(n)
    return np.where(support, values, 0.0)


def sample_matrix(m, n, rng):
    """``m x n`` matrix with i.i.d. ``N(0, 1/m)`` entries."""
    m = _check_count("m", m)
    n = _check_count("n", n)
    rng = _rng.as_generator(rng)
    return rng.standard_normal((m, n)) / np.sqrt(m)


def synthesize(A, x0, sigma_omega, rng, *, rho=None, seed=None):
    """Build ``y = A x0 + omega`` with ``omega ~ N(0, sigma_omega**2 I)``."""
    A = np.asarray(A, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if A.ndim != 2 or x0.ndim != 1 or A.shape[1] != x0.shape[0]:
        raise ValueError(f"dimension mismatch: A {A.shape} vs x0 {x0.shape}")
    if not sigma_omega >= 0:
        raise ValueError(f"sigma_omega must be >= 0, got {sigma_omega!r}")
    M, N = A.shape
    if M >= N:
        warnings.warn(f"delta = M/N = {M / N:.3g} >= 1: system is not underdetermined", stacklevel=2)
    rng = _rng.as_generator(rng)
    omega = sigma_omega * rng.standard_normal(M)
    y = A @ x0 + omega
    return ProblemInstance(A=A, x0=x0, omega=omega, y=y, sigma_omega=float(sigma_omega), rho=rho, seed=seed)


def n_measurements(n, delta):
    """``M = round(N * delta)`` (at least 1)."""
    return max(1, int(round(n * delta)))


def make_instance(n, delta, prior, sigma_omega, seed, trial=0):
    """Instance ``trial`` under master ``seed``; matrix, signal and noise use separate substreams."""
    n = _check_count("n", n)
    if not isinstance(prior, SignalPrior):
        prior = SignalPrior(float(prior))
    m = n_measurements(n, delta)
    A = sample_matrix(m, n, _rng.substream(seed, _rng.MATRIX, trial))
    x0 = sample_signal(n, prior, _rng.substream(seed, _rng.SIGNAL, trial))
    with warnings.catch_warnings():
        # flagged through ProblemInstance.underdetermined instead
        warnings.simplefilter("ignore")
        inst = synthesize(A, x0, sigma_omega, _rng.substream(seed, _rng.NOISE, trial), rho=prior.rho, seed=seed)
    inst.meta.update(trial=trial, requested_delta=delta, M_rounding=m - n * delta)
    return inst


# -- serialization -----------------------------------------------------------
#
# Binary layout (all little-endian):
#   8 bytes   magic b"CSINST1\0"
#   uint32    header length H
#   H bytes   UTF-8 JSON header {seed, M, N, rho, sigma_omega}
#   float64   A (M*N, row-major), x0 (N), omega (M), y (M)

_MAGIC = b"CSINST1\0"


def _header(inst):
    return {"seed": inst.seed, "M": inst.M, "N": inst.N, "rho": inst.rho, "sigma_omega": inst.sigma_omega}


def dump_json(inst, fp):
    doc = _header(inst)
    doc.update(
        A=inst.A.ravel(order="C").tolist(),
        x0=inst.x0.tolist(),
        omega=inst.omega.tolist(),
        y=inst.y.tolist(),
    )
    json.dump(doc, fp)


def load_json(fp):
    doc = json.load(fp)
    M, N = doc["M"], doc["N"]
    return ProblemInstance(
        A=np.asarray(doc["A"], dtype=float).reshape(M, N),
        x0=np.asarray(doc["x0"], dtype=float),
        omega=np.asarray(doc["omega"], dtype=float),
        y=np.asarray(doc["y"], dtype=float),
        sigma_omega=float(doc["sigma_omega"]),
        rho=doc["rho"],
        seed=doc["seed"],
    )


def dump_binary(inst, fp):
    header = json.dumps(_header(inst)).encode("utf-8")
    fp.write(_MAGIC)
    fp.write(struct.pack("<I", len(header)))
    fp.write(header)
    for arr in (inst.A, inst.x0, inst.omega, inst.y):
        fp.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_binary(fp):
    if fp.read(len(_MAGIC)) != _MAGIC:
        raise ValueError("not a csdyn instance file")
    (hlen,) = struct.unpack("<I", fp.read(4))
    head = json.loads(fp.read(hlen).decode("utf-8"))
    M, N = head["M"], head["N"]

    def take(count):
        buf = fp.read(8 * count)
        if len(buf) != 8 * count:
            raise ValueError("truncated instance file")
        return np.frombuffer(buf, dtype="<f8").astype(float)

    A = take(M * N).reshape(M, N)
    x0, omega, y = take(N), take(M), take(M)
    return ProblemInstance(A=A, x0=x0, omega=omega, y=y, sigma_omega=float(head["sigma_omega"]),
                           rho=head["rho"], seed=head["seed"])
