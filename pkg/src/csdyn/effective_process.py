"""Monte Carlo ensemble of the single-site effective process for IST.

Each of ``S`` samples carries a signal value ``x0`` and a path

    x^0 = 0,
    x^{s+1} = eta_s(k_hat[s] x0 + v^s + sum_{s' <= s} Gamma[s, s'] x^{s'}),

where ``(v^0, ..., v^s)`` is a zero-mean Gaussian vector with covariance
``R``.  Because ``R`` only grows by one row and column per stage, ``v^s`` is
drawn from its conditional law given the past through an incrementally
extended Cholesky factor.  After each stage the order parameters ``m``,
``C`` and ``G`` are re-estimated as sample averages and fed into the next
stage's kernel (see ``gfa_core``).

Samples are split into fixed-size blocks, each with its own random
substream.  Shards are contiguous groups of blocks that may be filled in
parallel; since every array element is produced by the same block stream
regardless of the shard layout, results do not depend on ``shard_count``.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gfa_core
from . import rng as _rng
from .errors import ConfigError, NumericalAbort
from .model import SignalPrior, sample_signal
from .shrinkage import MSEZ, SCHEDULE_MODES, SIGMA_HAT_SQ_FLOOR, soft_threshold

BLOCK_SIZE = 8192
DEFAULT_SAMPLES = 100_000
DIVERGENCE_FACTOR = 1e6
JITTER = 1e-10


@dataclass
class EffectiveEnsemble:
    x0: np.ndarray
    block_rngs: list
    block_sizes: list
    shard_count: int = 1
    paths: list = field(default_factory=list)
    normals: list = field(default_factory=list)
    noise: list = field(default_factory=list)
    R: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    cholesky: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    whitened: np.ndarray | None = None
    events: list = field(default_factory=list)

    @property
    def S(self):
        return len(self.x0)

    @property
    def stage(self):
        """Number of noise stages drawn so far."""
        return len(self.noise)

    @property
    def zero_mask(self):
        return self.x0 == 0.0

    @property
    def x(self):
        return np.vstack(self.paths)

    @property
    def v(self):
        return np.vstack(self.noise) if self.noise else np.zeros((0, self.S))

    def _block_slices(self):
        ends = np.cumsum([0, *self.block_sizes])
        return [slice(int(a), int(b)) for a, b in zip(ends[:-1], ends[1:])]

    def _fill_blocks(self, fn):
        """``out[block] = fn(rng, size)`` for every block, shard-parallel."""
        out = np.empty(self.S)
        slices = self._block_slices()

        def work(blocks):
            for b in blocks:
                sl = slices[b]
                out[sl] = fn(self.block_rngs[b], sl.stop - sl.start)

        shards = np.array_split(np.arange(len(slices)), max(1, min(self.shard_count, len(slices))))
        if len(shards) == 1:
            work(shards[0])
        else:
            with ThreadPoolExecutor(max_workers=len(shards)) as pool:
                list(pool.map(work, shards))
        return out


def block_layout(S, block_size=BLOCK_SIZE):
    """Sizes of the fixed sample blocks: full blocks and a possibly shorter last one."""
    n_blocks = math.ceil(S / block_size)
    return [min(block_size, int(S) - b * block_size) for b in range(n_blocks)]


def init_ensemble(S, prior, seed, *, block_size=BLOCK_SIZE, shard_count=1, blocks=None):
    """Ensemble of ``S`` samples; ``blocks`` restricts it to a subset of the block indices.

    A block's samples depend only on ``(seed, block index)``, so the ensemble
    restricted to ``blocks`` equals the full one with the other blocks removed.
    """
    if int(S) != S or S < 1:
        raise ConfigError(f"sample count S must be >= 1, got {S!r}")
    if not isinstance(prior, SignalPrior):
        prior = SignalPrior(float(prior))
    sizes = block_layout(S, block_size)
    blocks = range(len(sizes)) if blocks is None else sorted(blocks)
    rngs = [_rng.substream(seed, _rng.ENSEMBLE, b) for b in blocks]
    sizes = [sizes[b] for b in blocks]
    ens = EffectiveEnsemble(x0=np.zeros(sum(sizes)), block_rngs=rngs, block_sizes=sizes,
                            shard_count=int(shard_count))
    ens.x0 = ens._fill_blocks(lambda g, n: sample_signal(n, prior, g))
    ens.paths.append(np.zeros(ens.S))
    return ens


def _whiten(chol, normals):
    """``R^{-1} v = L^{-T} L^{-1} v = L^{-T} xi``; rows with a zero pivot map to 0."""
    n = len(normals)
    out = np.zeros((n, normals[0].shape[0]))
    for s in range(n - 1, -1, -1):
        if chol[s, s] == 0.0:
            continue
        acc = normals[s].copy()
        for r in range(s + 1, n):
            if chol[r, s] != 0.0:
                acc -= chol[r, s] * out[r]
        out[s] = acc / chol[s, s]
    return out


def extend_noise(ens, R_next):
    """Draw ``v^s`` conditionally on the ensemble's past noise, ``R_next`` being ``(s+1) x (s+1)``."""
    s = ens.stage
    R_next = np.asarray(R_next, dtype=float)
    if R_next.shape != (s + 1, s + 1):
        raise ValueError(f"expected a {(s + 1, s + 1)} covariance, got {R_next.shape}")
    if s:
        drift = np.max(np.abs(R_next[:s, :s] - ens.R))
        if drift > 1e-12 * max(1.0, np.max(np.abs(ens.R))):
            raise ValueError(f"R_next changes the existing block by {drift:.3e}")

    row = np.zeros(s + 1)
    if s:
        L_old = ens.cholesky
        nz = np.diag(L_old) != 0
        # forward substitution, skipping degenerate directions
        for j in range(s):
            if nz[j]:
                row[j] = (R_next[s, j] - row[:j] @ L_old[j, :j]) / L_old[j, j]
    trace = float(np.trace(R_next))
    pivot_sq = R_next[s, s] - row[:s] @ row[:s]
    if pivot_sq <= 0:
        jittered = pivot_sq + JITTER * trace / (s + 1)
        if jittered > 0:
            ens.events.append(dict(stage=s, event="jitter", pivot_sq=float(pivot_sq), added=JITTER * trace / (s + 1)))
            pivot_sq = jittered
        elif trace == 0.0 or abs(pivot_sq) <= 1e-12 * max(trace, np.finfo(float).tiny):
            ens.events.append(dict(stage=s, event="degenerate", pivot_sq=float(pivot_sq)))
            pivot_sq = 0.0
        else:
            raise NumericalAbort(f"noise covariance is not positive semi-definite at stage {s} "
                                 f"(pivot^2 = {pivot_sq:.3e} after jitter)")
    row[s] = math.sqrt(pivot_sq)

    L = np.zeros((s + 1, s + 1))
    L[:s, :s] = ens.cholesky
    L[s] = row
    xi = ens._fill_blocks(lambda g, n: g.standard_normal(n))
    v = row[s] * xi
    for r in range(s):
        v += row[r] * ens.normals[r]
    ens.normals.append(xi)
    ens.noise.append(v)
    ens.R = R_next.copy()
    ens.cholesky = L
    ens.whitened = _whiten(L, ens.normals)
    return ens


def advance_paths(ens, gamma_row, k_hat_s, lam_hat):
    """``x^{s+1} = eta(x0 k_hat + v^s + (Gamma x)^s)`` for every sample."""
    s = len(ens.paths) - 1
    if ens.stage != s + 1:
        raise ValueError(f"noise for stage {s} has not been drawn")
    gamma_row = np.asarray(gamma_row, dtype=float)
    if gamma_row.shape != (s + 1,):
        raise ValueError(f"gamma_row must have length {s + 1}")
    u = k_hat_s * ens.x0 + ens.noise[s]
    for r in range(s + 1):
        if gamma_row[r] != 0.0:
            u += gamma_row[r] * ens.paths[r]
    if not np.all(np.isfinite(u)):
        raise NumericalAbort(f"non-finite threshold argument at stage {s}")
    ens.paths.append(soft_threshold(u, lam_hat))
    return ens


def update_order_params(ens, params):
    """Extend ``params`` by the newest stage using sample averages over the ensemble."""
    n = len(ens.paths) - 1
    if params.horizon != n - 1:
        raise ValueError(f"params horizon {params.horizon} does not precede stage {n}")
    xn = ens.paths[n]
    m = np.append(params.m, np.mean(ens.x0 * xn))
    C = np.zeros((n + 1, n + 1))
    C[:n, :n] = params.C
    for r in range(n + 1):
        C[n, r] = C[r, n] = np.mean(xn * ens.paths[r])
    G = np.zeros((n + 1, n + 1))
    G[:n, :n] = params.G
    w = ens.whitened
    for r in range(n):
        G[n, r] = np.mean(xn * w[r])
    return gfa_core.OrderParams(m=m, C=C, G=G)


def _mean_stderr(values):
    if values.size == 0:
        return float("nan"), float("nan")
    if values.size == 1:
        return float(values[0]), float("nan")
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(values.size))


@dataclass
class GfaPrediction:
    t: list = field(default_factory=list)
    sigma_sq: list = field(default_factory=list)
    sigma_sq_raw: list = field(default_factory=list)
    sigma_sq_stderr: list = field(default_factory=list)
    msez: list = field(default_factory=list)
    msez_stderr: list = field(default_factory=list)
    lam_hat: list = field(default_factory=list)
    k_hat: list = field(default_factory=list)
    params: gfa_core.OrderParams | None = None
    diverged: bool = False
    config: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def rows(self):
        keys = ("t", "sigma_sq", "sigma_sq_raw", "sigma_sq_stderr", "msez", "msez_stderr", "lam_hat")
        return [dict(zip(keys, vals)) for vals in zip(*(getattr(self, k) for k in keys))]

    def to_dict(self):
        doc = {k: getattr(self, k) for k in ("t", "sigma_sq", "sigma_sq_raw", "sigma_sq_stderr", "msez",
                                             "msez_stderr", "lam_hat", "k_hat", "diverged", "config",
                                             "diagnostics")}
        doc["order_params"] = self.params.to_dict() if self.params is not None else None
        return doc


ERROR_METHODS = ("jackknife", "naive")
JACKKNIFE_GROUPS = 10


def _check_args(prior, delta, sigma_omega_sq, lam, c, T, schedule_mode, interpretation):
    if not isinstance(prior, SignalPrior):
        prior = SignalPrior(float(prior))
    if not delta > 0:
        raise ConfigError("delta must be > 0")
    if not c >= 1:
        raise ConfigError("c must be >= 1")
    if not lam > 0:
        raise ConfigError("lambda must be > 0")
    if int(T) != T or T < 1:
        raise ConfigError("T must be a positive integer")
    if sigma_omega_sq < 0:
        raise ConfigError("sigma_omega_sq must be >= 0")
    if schedule_mode not in SCHEDULE_MODES:
        raise ConfigError(f"schedule_mode must be one of {SCHEDULE_MODES}")
    if interpretation not in gfa_core.INTERPRETATIONS:
        raise ConfigError(f"interpretation must be one of {gfa_core.INTERPRETATIONS}")
    return prior


def _single_pass(ens, rho, delta, sigma_omega_sq, lam, c, T, interpretation, schedule_mode):
    """Run the stages on a prepared ensemble; standard errors are per-stage sample errors."""
    params = gfa_core.OrderParams.initial()
    zeros = ens.zero_mask
    sigma_hat_sq = max(rho, SIGMA_HAT_SQ_FLOOR)
    limit = DIVERGENCE_FACTOR * max(rho, sigma_omega_sq, np.finfo(float).tiny)
    min_eig_ratio = []
    # x0^2 - rho has zero mean: using the sample second moment in place of
    # rho is a control variate that leaves the estimate unbiased
    x0_sq = float(np.mean(ens.x0**2))
    pred = GfaPrediction(params=params)

    def record(t, lam_hat_next):
        x = ens.paths[t]
        _, se = _mean_stderr((ens.x0 - x) ** 2)
        mz, mz_se = _mean_stderr(x[zeros] ** 2)
        raw = gfa_core.mse_from_order_params(params, x0_sq, t, clamp=False)
        pred.t.append(t)
        pred.sigma_sq.append(max(raw, 0.0))
        pred.sigma_sq_raw.append(raw)
        pred.sigma_sq_stderr.append(se)
        pred.msez.append(mz)
        pred.msez_stderr.append(mz_se if t else 0.0)
        pred.lam_hat.append(float(lam_hat_next))
        return raw, mz

    record(0, lam * math.sqrt(sigma_hat_sq) / c)
    try:
        for s in range(int(T)):
            D = gfa_core.build_D(params, rho, delta, sigma_omega_sq)
            R = gfa_core.build_R(D, params.G, c, delta)
            tr = np.trace(R)
            min_eig_ratio.append(float(np.linalg.eigvalsh(R)[0] / tr) if tr > 0 else 0.0)
            extend_noise(ens, R)
            gamma = gfa_core.build_Gamma(params.G, c, delta)
            k_hat = gfa_core.effective_gain(params.G, c, delta, s, interpretation)
            pred.k_hat.append(k_hat)
            advance_paths(ens, gamma[s], k_hat, lam * math.sqrt(sigma_hat_sq) / c)
            params = update_order_params(ens, params)
            pred.params = params
            raw = gfa_core.mse_from_order_params(params, x0_sq, s + 1, clamp=False)
            mz = float(np.mean(ens.paths[s + 1][zeros] ** 2)) if zeros.any() else float("nan")
            if schedule_mode == MSEZ:
                if np.isfinite(mz):
                    sigma_hat_sq = max(mz, SIGMA_HAT_SQ_FLOOR)
            else:
                sigma_hat_sq = max(raw, SIGMA_HAT_SQ_FLOOR)
            record(s + 1, lam * math.sqrt(sigma_hat_sq) / c)
            if raw > limit:
                pred.diverged = True
                break
    except NumericalAbort as exc:
        pred.diagnostics.update(events=ens.events, min_eig_ratio=min_eig_ratio, aborted=str(exc))
        exc.partial = pred
        raise
    pred.diagnostics.update(events=ens.events, min_eig_ratio=min_eig_ratio, aborted=None)
    return pred


def _jackknife_stderr(full, replicates):
    """Delete-a-group jackknife errors per stage; ``None`` where a replicate is missing or non-finite."""
    g = len(replicates)
    out = {}
    for key in ("sigma_sq_raw", "msez"):
        errs = []
        for t in range(len(full.t)):
            vals = [getattr(r, key)[t] if t < len(r.t) else float("nan") for r in replicates]
            vals = np.asarray(vals)
            if not np.all(np.isfinite(vals)):
                errs.append(None)
                continue
            errs.append(float(math.sqrt((g - 1) / g * np.sum((vals - vals.mean()) ** 2))))
        out[key] = errs
    return out


def gfa_predict(prior, delta, sigma_omega_sq, lam, c, T, S=DEFAULT_SAMPLES, seed=0, *,
                interpretation=gfa_core.LAMBDA_ROW_OF_ONES, schedule_mode=MSEZ, shard_count=1,
                block_size=BLOCK_SIZE, error_method="jackknife", jackknife_groups=JACKKNIFE_GROUPS):
    """Predict the IST MSE / MSEZ trajectory for stages ``0..T``.

    The threshold at stage ``s`` is ``lam * sigma_hat_s / c`` with
    ``sigma_hat_0^2 = rho`` and, afterwards, the ensemble MSE on zeros (or
    the predicted MSE when ``schedule_mode="mse"``).

    Later stages depend on earlier stages' Monte Carlo estimates of ``m``,
    ``C``, ``G`` and the threshold, so the sample error of a single stage's
    mean understates the actual spread.  With ``error_method="jackknife"``
    the whole recursion is rerun with each of ``jackknife_groups`` groups of
    sample blocks left out and the delete-a-group jackknife error is
    reported; stages where a replicate fails fall back to the per-stage
    sample error (listed in ``diagnostics["naive_stderr_stages"]``).
    ``error_method="naive"`` reports per-stage sample errors only.

    Raises ``NumericalAbort`` (with ``.partial`` set) if a stage cannot be
    completed.
    """
    prior = _check_args(prior, delta, sigma_omega_sq, lam, c, T, schedule_mode, interpretation)
    if error_method not in ERROR_METHODS:
        raise ConfigError(f"error_method must be one of {ERROR_METHODS}")
    config = dict(rho=prior.rho, delta=delta, sigma_omega_sq=sigma_omega_sq, lam=lam, c=c, T=int(T), S=int(S),
                  seed=seed, interpretation=interpretation, schedule_mode=schedule_mode, block_size=block_size,
                  error_method=error_method)
    args = (prior.rho, delta, sigma_omega_sq, lam, c, T, interpretation, schedule_mode)

    def run_on(blocks):
        ens = init_ensemble(S, prior, seed, block_size=block_size, shard_count=shard_count, blocks=blocks)
        return _single_pass(ens, *args)

    try:
        pred = run_on(None)
    except NumericalAbort as exc:
        exc.partial.config = config
        raise
    pred.config = config

    n_blocks = len(block_layout(S, block_size))
    groups = np.array_split(np.arange(n_blocks), min(int(jackknife_groups), n_blocks))
    if error_method == "naive" or len(groups) < 2:
        pred.diagnostics["naive_stderr_stages"] = list(pred.t)
        return pred

    replicates = []
    for grp in groups:
        keep = sorted(set(range(n_blocks)) - set(grp.tolist()))
        try:
            replicates.append(run_on(keep))
        except NumericalAbort as exc:
            replicates.append(exc.partial)
    jk = _jackknife_stderr(pred, replicates)
    fallback = []
    for t in range(len(pred.t)):
        if jk["sigma_sq_raw"][t] is None or jk["msez"][t] is None:
            fallback.append(t)
            continue
        pred.sigma_sq_stderr[t] = jk["sigma_sq_raw"][t]
        if t:
            pred.msez_stderr[t] = jk["msez"][t]
    pred.diagnostics.update(naive_stderr_stages=fallback, jackknife_groups=len(groups))
    return pred
