"""Independent numerical-integration oracles.

Nothing here imports the package's theory modules: expectations are taken
with adaptive ``scipy.integrate.quad`` (split at the soft-threshold kinks),
so they check the closed-form and Monte Carlo code paths from outside.
"""

import math
import warnings

import numpy as np
from scipy import integrate

EPSREL = 1e-11
LIMIT = 200
_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def pdf(z):
    return _INV_SQRT2PI * math.exp(-0.5 * z * z)


def cdf(z):
    return 0.5 * math.erfc(-z / _SQRT2)


def sf(z):
    return 0.5 * math.erfc(z / _SQRT2)


def soft(u, lam):
    return math.copysign(max(abs(u) - lam, 0.0), u)


def _quad(f, a, b):
    # quadpack warns when it cannot reach the tight tolerance on a segment that is
    # (near) zero; check its error estimate instead
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, epsabs=1e-16, epsrel=EPSREL, limit=LIMIT)
    if not err <= 1e-9 * max(abs(val), 1e-6):
        raise ArithmeticError(f"quadrature error {err:.2e} on [{a}, {b}] for value {val:.6e}")
    return val


def line_integral(f, points=()):
    """Integral of ``f`` over the real line, split at ``points``."""
    edges = [-np.inf, *sorted(set(points)), np.inf]
    return sum(_quad(f, a, b) for a, b in zip(edges[:-1], edges[1:]))


def _x0_points(kink, width):
    """Where the outer (signal) integrand varies fastest: near 0 and the shifted kinks."""
    pts = [0.0]
    for k in (kink, -kink):
        pts += [k + m * width for m in (-6, -2, 0, 2, 6)]
    return pts


def gauss_expect(f, mean, sd, kinks=()):
    """E f(mean + sd Z), Z ~ N(0, 1), split at the given kinks (in the variable's own units)."""
    if sd == 0:
        return f(mean)
    pts = sorted((k - mean) / sd for k in kinks)
    pts = [p for p in pts if -40 < p < 40]
    edges = [-np.inf, *pts, np.inf]
    g = lambda z: f(mean + sd * z) * pdf(z)  # noqa: E731
    return sum(_quad(g, a, b) for a, b in zip(edges[:-1], edges[1:]))


def se_step_oracle(sigma_sq, delta, sigma_omega_sq, rho, lam_hat):
    """E[(eta(X0 + tau Z) - X0)^2] by nested adaptive quadrature."""
    tau = math.sqrt(sigma_omega_sq + sigma_sq / delta)
    kinks = (-lam_hat, lam_hat)
    zero = gauss_expect(lambda u: soft(u, lam_hat) ** 2, 0.0, tau, kinks)
    inner = lambda x: gauss_expect(lambda u: (soft(u, lam_hat) - x) ** 2, x, tau, kinks)  # noqa: E731
    gauss = line_integral(lambda x: inner(x) * pdf(x), _x0_points(lam_hat, tau))
    return (1 - rho) * zero + rho * gauss


def stage1_mse_oracle(rho, delta, lam, c, sigma_omega_sq):
    """sigma_1^2 = E[(eta_0(X0/c + tau Z) - X0)^2], tau^2 = (sigma_omega^2 + rho/delta)/c^2."""
    tau = math.sqrt((sigma_omega_sq + rho / delta) / c**2)
    lam0 = lam * math.sqrt(rho) / c
    kinks = (-lam0, lam0)
    zero = gauss_expect(lambda u: soft(u, lam0) ** 2, 0.0, tau, kinks)
    inner = lambda x: gauss_expect(lambda u: (soft(u, lam0) - x) ** 2, x / c, tau, kinks)  # noqa: E731
    gauss = line_integral(lambda x: inner(x) * pdf(x), _x0_points(c * lam0, c * tau))
    return (1 - rho) * zero + rho * gauss


def stage1_moments(rho, delta, lam, c, sigma_omega_sq):
    """Exact stage-1 order parameters and the stage-1 MSE on zeros."""
    r00 = (sigma_omega_sq + rho / delta) / c**2
    sd = math.sqrt(r00)
    lam0 = lam * math.sqrt(rho) / c

    def over_v0(x0, f):
        # f(x1, v0); u0 = x0/c + v0
        kinks = (-lam0 - x0 / c, lam0 - x0 / c)
        return gauss_expect(lambda v: f(soft(x0 / c + v, lam0), v), 0.0, sd, kinks)

    def over_x0(f):
        zero = over_v0(0.0, lambda x1, v: f(0.0, x1, v))
        gauss = line_integral(lambda x: over_v0(x, lambda x1, v: f(x, x1, v)) * pdf(x), _x0_points(c * lam0, c * sd))
        return (1 - rho) * zero + rho * gauss

    m1 = over_x0(lambda x0, x1, v: x0 * x1)
    C11 = over_x0(lambda x0, x1, v: x1 * x1)
    # response by its defining correlation <x^1 (R^{-1} v)^0>
    G10 = over_x0(lambda x0, x1, v: x1 * v) / r00
    msez1 = over_v0(0.0, lambda x1, v: x1 * x1)
    return dict(m1=m1, C11=C11, G10=G10, msez1=msez1, r00=r00, lam0=lam0)


def _soft_sq_err_closed(a, mu, s, lam):
    """E[(a - eta(mu + s Z))^2] from truncated-normal moments (written independently of the package)."""
    if s <= 0:
        return (a - soft(mu, lam)) ** 2
    up = (lam - mu) / s
    dn = (-lam - mu) / s
    Pu, Pd = sf(up), cdf(dn)
    fu, fd = pdf(up), pdf(dn)
    total = a * a * (cdf(up) - cdf(dn))
    # branch u > lam: a - (mu + sZ - lam) = e - sZ
    e = a - mu + lam
    total += e * e * Pu - 2 * e * s * fu + s * s * (Pu + up * fu)
    # branch u < -lam: a - (mu + sZ + lam) = e - sZ
    e = a - mu - lam
    total += e * e * Pd + 2 * e * s * fd + s * s * (Pd - dn * fd)
    return total


def stage2_mse_oracle(rho, delta, lam, c, sigma_omega_sq, interpretation="A", schedule_mode="msez"):
    """sigma_2^2 with analytically propagated R (2x2), Gamma and G^(1,0).

    Integrates over x0 (mixture), v0 and, conditionally on v0, v1.
    """
    st = stage1_moments(rho, delta, lam, c, sigma_omega_sq)
    m1, C11, G10, r00, lam0 = st["m1"], st["C11"], st["G10"], st["r00"], st["lam0"]
    sig1 = rho - 2 * m1 + C11
    lam1 = lam * math.sqrt(st["msez1"] if schedule_mode == "msez" else sig1) / c
    D00 = sigma_omega_sq + rho / delta
    D01 = sigma_omega_sq + (rho - m1) / delta
    D11 = sigma_omega_sq + (rho - 2 * m1 + C11) / delta
    g = G10 / (c * delta)
    R00 = D00 / c**2
    R01 = (D01 - g * D00) / c**2
    R11 = (D11 - 2 * g * D01 + g * g * D00) / c**2
    gamma11 = (c - 1) / c
    k1 = (1 - g) / c if interpretation == "A" else 1 / c
    beta = R01 / R00
    s_cond = math.sqrt(max(R11 - beta * R01, 0.0))
    sd0 = math.sqrt(R00)

    def given(x0):
        def f(v0):
            x1 = soft(x0 / c + v0, lam0)
            mu = k1 * x0 + gamma11 * x1 + beta * v0
            return _soft_sq_err_closed(x0, mu, s_cond, lam1)

        kinks = (-lam0 - x0 / c, lam0 - x0 / c)
        return gauss_expect(f, 0.0, sd0, kinks)

    zero = given(0.0)
    gauss = line_integral(lambda x: given(x) * pdf(x), _x0_points(c * lam0, c * sd0))
    return dict(sigma2_sq=(1 - rho) * zero + rho * gauss, R=[[R00, R01], [R01, R11]], k1=k1, lam1=lam1,
                **st)
