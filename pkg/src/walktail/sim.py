"""Monte Carlo engines for the negative-drift random walk.

* stationary Lindley estimation of ``P(M > x)``,
* excursion (cycle) sampling of ``(tau, S_tau, M_tau)``,
* first-passage estimation of ``P(M > x)`` with a stop level and bias bound,
* a live-sampling check of certified drift inequalities.

Every independent work unit (replica, batch of cycles, batch of paths) gets
its own :class:`~walktail.streams.RngStream`, so results do not depend on the
number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DomainError, ParameterError, StatisticalCheckFailed
from .models import IncrementModel
from .potential import (SUB, SUPER, MartingaleCertificate, drift_report,
                        potential_G, potential_G_hat)
from .streams import RngStream

# stream-id namespaces, one per kind of work unit
CYCLE_STREAMS = 1_000_000
LINDLEY_STREAMS = 2_000_000
PATH_STREAMS = 3_000_000
DRIFT_STREAMS = 4_000_000

DEFAULT_N_CAP = 10**7
MAX_TRUNCATED_FRACTION = 1e-6


def _z(level):
    return float(stats.norm.ppf(0.5 + level / 2))


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _seed_of(rng):
    return rng.seed if isinstance(rng, RngStream) else int(rng)


# -- cycles --------------------------------------------------------------------


@dataclass(frozen=True)
class CycleSample:
    tau: int
    s_tau: float
    m_tau: float
    truncated: bool = False


def run_cycle(model: IncrementModel, rng, n_cap: int = DEFAULT_N_CAP) -> CycleSample:
    """One excursion: run ``S_n`` from 0 until ``S_n <= 0`` or ``n == n_cap``."""
    if n_cap < 1:
        raise ParameterError("n_cap must be at least 1")
    s, m, n = 0.0, 0.0, 0
    block = 16
    while True:
        for xi in model.sample(rng, size=block):
            n += 1
            s += xi
            if s <= 0.0:
                return CycleSample(n, s, m, False)
            if s > m:
                m = s
            if n >= n_cap:
                return CycleSample(n, s, m, True)
        block = min(2 * block, 4096)


@dataclass
class CycleBatch:
    """Column arrays of many excursions (``truncated`` marks cycles hitting the cap)."""

    tau: np.ndarray
    s_tau: np.ndarray
    m_tau: np.ndarray
    truncated: np.ndarray

    def __len__(self):
        return len(self.tau)

    @classmethod
    def from_samples(cls, samples):
        samples = list(samples)
        return cls(
            np.array([c.tau for c in samples], dtype=np.int64),
            np.array([c.s_tau for c in samples], dtype=float),
            np.array([c.m_tau for c in samples], dtype=float),
            np.array([c.truncated for c in samples], dtype=bool),
        )

    @classmethod
    def concat(cls, batches):
        return cls(*(np.concatenate([getattr(b, k) for b in batches])
                     for k in ("tau", "s_tau", "m_tau", "truncated")))

    def complete(self) -> "CycleBatch":
        ok = ~self.truncated
        return CycleBatch(self.tau[ok], self.s_tau[ok], self.m_tau[ok], self.truncated[ok])

    @property
    def truncated_fraction(self):
        return float(np.mean(self.truncated)) if len(self) else 0.0


def as_batch(samples) -> CycleBatch:
    return samples if isinstance(samples, CycleBatch) else CycleBatch.from_samples(samples)


def _cycle_batch(model, n, rng, n_cap):
    tau = np.zeros(n, dtype=np.int64)
    s_tau = np.zeros(n)
    m_tau = np.zeros(n)
    trunc = np.zeros(n, dtype=bool)
    idx = np.arange(n)
    s = np.zeros(n)
    m = np.zeros(n)
    step = 0
    while idx.size:
        step += 1
        s = s + model.sample(rng, size=idx.size)
        done = s <= 0.0
        if step >= n_cap:
            hit = ~done
            trunc[idx[hit]] = True
            done = np.ones_like(done)
        d = idx[done]
        tau[d] = step
        s_tau[d] = s[done]
        m_tau[d] = m[done]
        keep = ~done
        idx, s = idx[keep], s[keep]
        m = np.maximum(m[keep], s)
    return CycleBatch(tau, s_tau, m_tau, trunc)


def simulate_cycles(model: IncrementModel, n_cycles: int, seed: int,
                    batch_size: int = 2**18, n_cap: int = DEFAULT_N_CAP,
                    threads: int = 1) -> CycleBatch:
    """Vectorized excursions; batch ``b`` draws from stream ``CYCLE_STREAMS + b``."""
    sizes = [batch_size] * (n_cycles // batch_size)
    if n_cycles % batch_size:
        sizes.append(n_cycles % batch_size)

    def work(b):
        return _cycle_batch(model, sizes[b], RngStream(seed, CYCLE_STREAMS + b), n_cap)

    return CycleBatch.concat(_map(work, range(len(sizes)), threads))


def check_truncation(samples, limit=MAX_TRUNCATED_FRACTION):
    frac = as_batch(samples).truncated_fraction
    if frac > limit:
        raise StatisticalCheckFailed(
            f"truncated cycle fraction {frac:.3g} exceeds {limit:.1g}")
    return frac


@dataclass(frozen=True)
class TauStats:
    tau_mean: float
    tau_ci: float
    stau_mean: float
    stau_ci: float
    wald_residual: float
    wald_ci: float
    n: int
    n_truncated: int
    level: float

    @property
    def tau_interval(self):
        return self.tau_mean - self.tau_ci, self.tau_mean + self.tau_ci


def tau_stats(samples, model: IncrementModel, level=0.99) -> TauStats:
    """Means of ``tau`` and ``S_tau`` and the Wald residual ``|E S_tau + a E tau|``.

    ``wald_ci`` is the CI half-width of the paired per-cycle difference
    ``S_tau + a tau``, whose mean is zero by Wald's identity.
    """
    batch = as_batch(samples)
    ok = batch.complete()
    if len(ok) == 0:
        raise ParameterError("no untruncated cycles")
    a = model.tail_moments().a
    z = _z(level)
    n = len(ok)
    tau = ok.tau.astype(float)
    se = lambda v: float(np.std(v, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    diff = ok.s_tau + a * tau
    return TauStats(
        tau_mean=float(tau.mean()), tau_ci=z * se(tau),
        stau_mean=float(ok.s_tau.mean()), stau_ci=z * se(ok.s_tau),
        wald_residual=abs(float(diff.mean())), wald_ci=z * se(diff),
        n=n, n_truncated=int(batch.truncated.sum()), level=level,
    )


def binomial_ci(k, n, level=0.99):
    """Point estimate and Wilson half-width (the larger side), so ``k = 0`` still has width."""
    z = _z(level)
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return p, max(centre + half - p, p - (centre - half))


def mtau_tail(samples, x, level=0.99):
    """Fraction of complete cycles with ``M_tau > x`` and its binomial CI half-width."""
    ok = as_batch(samples).complete()
    if len(ok) == 0:
        raise ParameterError("no untruncated cycles")
    return binomial_ci(int(np.count_nonzero(ok.m_tau > x)), len(ok), level)


def _stau_values(samples):
    """``S_tau`` of complete cycles; plain numbers are taken as ``S_tau`` values."""
    if isinstance(samples, CycleBatch):
        return samples.complete().s_tau
    samples = list(samples)
    if samples and isinstance(samples[0], CycleSample):
        return as_batch(samples).complete().s_tau
    return np.asarray(samples, dtype=float)


def exp_moment_stau(samples, h0):
    """Sample mean of ``exp(h0 S_tau)``; each summand is at most 1."""
    if not h0 > 0:
        raise ParameterError("h0 must be positive")
    s = _stau_values(samples)
    if s.size == 0:
        raise ParameterError("no untruncated cycles")
    return float(np.mean(np.exp(h0 * s)))


# binary spill: little-endian columns tau u64, s_tau f64, m_tau f64, flags u8
_COLUMNS = (("tau", "<u8"), ("s_tau", "<f8"), ("m_tau", "<f8"))
_RECORD_BYTES = 8 + 8 + 8 + 1


def write_cycles(path, samples):
    batch = as_batch(samples)
    with open(path, "wb") as fh:
        for name, dt in _COLUMNS:
            fh.write(np.ascontiguousarray(getattr(batch, name), dtype=dt).tobytes())
        fh.write(batch.truncated.astype("u1").tobytes())


def read_cycles(path) -> CycleBatch:
    raw = open(path, "rb").read()
    if len(raw) % _RECORD_BYTES:
        raise ValueError(f"{path}: size {len(raw)} is not a whole number of records")
    n = len(raw) // _RECORD_BYTES
    cols, off = [], 0
    for _, dt in _COLUMNS:
        cols.append(np.frombuffer(raw, dtype=dt, count=n, offset=off))
        off += 8 * n
    flags = np.frombuffer(raw, dtype="u1", count=n, offset=off)
    return CycleBatch(cols[0].astype(np.int64), cols[1].astype(float),
                      cols[2].astype(float), (flags & 1).astype(bool))


# -- Lindley recursion -----------------------------------------------------------


@dataclass
class LindleyEstimate:
    x_grid: np.ndarray
    p_hat: np.ndarray
    ci_halfwidth: np.ndarray
    std_err: np.ndarray
    steps_per_replica: int
    burn_in: int
    replicas: int
    level: float = 0.99

    def one_sided_upper(self, level=0.999):
        """Pointwise one-sided upper confidence bounds on the grid."""
        q = stats.t.ppf(level, self.replicas - 1)
        return np.minimum(self.p_hat + q * self.std_err, 1.0)

    def upper_envelope(self, level=0.999):
        """Step function ``r -> upper bound on P(M > r)``.

        Uses the bound at the largest grid point ``<= r`` (``P(M > .)`` is
        nonincreasing); returns 1 left of the grid.
        """
        xs = self.x_grid
        up = self.one_sided_upper(level)

        def bound(r):
            k = np.searchsorted(xs, r, side="right") - 1
            return 1.0 if k < 0 else float(up[k])

        return bound

    def interpolate(self, y):
        """Monotone piecewise-linear ``P(M > y)``, clamped to ``[0, 1]``."""
        y = np.asarray(y, dtype=float)
        if np.any(y > self.x_grid[-1]) or np.any((y < self.x_grid[0]) & (y >= 0)):
            raise DomainError("interpolation point outside the Lindley grid")
        mono = np.minimum.accumulate(np.clip(self.p_hat, 0.0, 1.0))
        v = np.interp(y, self.x_grid, mono)
        return np.where(y < 0, 1.0, v)


def _lindley_replica(model, x_sorted, steps, burn_in, rng, chunk):
    counts = np.zeros(len(x_sorted), dtype=np.int64)
    w = 0.0
    done = 0
    while done < steps:
        n = min(chunk, steps - done)
        s = np.cumsum(model.sample(rng, size=n))
        # W_k = S_k - min(-w, min_{j<=k} S_j)  for the chunk started at w
        floor = np.minimum(np.minimum.accumulate(s), -w)
        wk = s - floor
        lo = max(burn_in - done, 0)
        if lo < n:
            kept = np.sort(wk[lo:])
            counts += kept.size - np.searchsorted(kept, x_sorted, side="right")
        w = float(wk[-1])
        done += n
    return counts / (steps - burn_in)


def lindley_tail(model: IncrementModel, x_grid, steps: int, burn_in: int,
                 replicas: int, rng, threads: int = 1, level: float = 0.99,
                 chunk: int = 2**16) -> LindleyEstimate:
    """Time-averaged ``P(W > x)`` for ``W <- max(W + xi, 0)`` started at 0.

    Replica ``i`` uses stream ``LINDLEY_STREAMS + i``.  The CI is built from
    the i.i.d. replica means, so no autocorrelation estimate is needed.
    """
    if steps <= burn_in:
        raise ParameterError("steps must exceed burn_in")
    if replicas < 2:
        raise ParameterError("need at least 2 replicas for a confidence interval")
    x = np.asarray(x_grid, dtype=float)
    if np.any(np.diff(x) <= 0):
        raise ParameterError("x_grid must be strictly increasing")
    seed = _seed_of(rng)

    def work(i):
        return _lindley_replica(model, x, steps, burn_in,
                                RngStream(seed, LINDLEY_STREAMS + i), chunk)

    per = np.array(_map(work, range(replicas), threads))
    mean = per.mean(axis=0)
    se = per.std(axis=0, ddof=1) / math.sqrt(replicas)
    q = float(stats.t.ppf(0.5 + level / 2, replicas - 1))
    return LindleyEstimate(x, mean, q * se, se, steps, burn_in, replicas, level)


# -- first passage ---------------------------------------------------------------


@dataclass(frozen=True)
class SupremumEstimate:
    x: float
    p_hat: float
    ci_halfwidth: float
    stop_level_K: float
    bias_upper: float
    n_paths: int


def _passage_batch(model, x, K, n, rng, n_cap):
    s = np.zeros(n)
    hits = 0
    step = 0
    while s.size and step < n_cap:
        step += 1
        s = s + model.sample(rng, size=s.size)
        up = s > x
        hits += int(np.count_nonzero(up))
        s = s[~up & (s > -K)]
    return hits, s.size


def direct_sup_tail(model: IncrementModel, x, stop_level_K, n_paths, rng,
                    bias_fn=None, level=0.99, batch_size=2**18,
                    n_cap=DEFAULT_N_CAP, threads=1) -> SupremumEstimate:
    """First-passage estimate of ``P(M > x) = P(mu_x < inf)``.

    Paths stop at the first ``S_n > x`` (success) or ``S_n <= -K``.  A stopped
    path could still have crossed ``x`` later, which needs a fresh supremum
    above ``x + K``; so the estimator is low by at most ``bias_fn(x + K)``
    for any valid upper bound ``bias_fn`` on ``P(M > .)`` (default: 1).
    Paths cut off by ``n_cap`` add their fraction to ``bias_upper``.
    """
    if not stop_level_K > 0:
        raise ParameterError("stop_level_K must be positive")
    bias_fn = bias_fn or (lambda y: 1.0)
    bias = 0.0 if math.isinf(stop_level_K) else float(bias_fn(x + stop_level_K))
    if x < 0:
        return SupremumEstimate(x, 1.0, 0.0, stop_level_K, 0.0, n_paths)
    seed = _seed_of(rng)
    sizes = [batch_size] * (n_paths // batch_size)
    if n_paths % batch_size:
        sizes.append(n_paths % batch_size)

    def work(b):
        return _passage_batch(model, x, stop_level_K, sizes[b],
                              RngStream(seed, PATH_STREAMS + b), n_cap)

    parts = _map(work, range(len(sizes)), threads)
    hits = sum(h for h, _ in parts)
    # paths still alive at the step cap may cross later
    bias += sum(n for _, n in parts) / n_paths
    p, ci = binomial_ci(hits, n_paths, level)
    return SupremumEstimate(x, p, ci, stop_level_K, bias, n_paths)


def choose_stop_level(bias_fn, x, target, k_min=1.0, k_max=1e6):
    """Smallest ``K`` on a doubling grid with ``bias_fn(x + K) < 0.01 * target``."""
    k = k_min
    while k <= k_max:
        if bias_fn(x + k) < 0.01 * target:
            return k
        k *= 2
    raise ParameterError(f"no stop level below {k_max} meets the bias target")


# -- live drift check --------------------------------------------------------------


@dataclass
class DriftCheckReport:
    kind: str
    states: np.ndarray
    mc_margin: np.ndarray
    std_err: np.ndarray
    quad_margin: np.ndarray
    violations: list = field(default_factory=list)
    mismatches: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations


def _slice_draws(model, lo, hi, n, rng):
    """Inverse-CDF draws of ``xi`` conditioned on ``lo < xi <= hi``."""
    v_hi = float(model.tail(lo))
    v_lo = float(model.tail(hi))
    v = v_lo + (v_hi - v_lo) * (1.0 - rng.random(n))
    return model._draw(v) - model.mu


def stratified_drift(model, pot, c, t, r, n_draws, rng):
    """Stratified Monte Carlo estimate of ``E pot(t - xi) - pot(t)`` and its SE.

    Strata ``xi <= 0``, ``0 < xi <= t/2`` and ``t/2 < xi <= t - r`` are each
    sampled by inverse CDF on their slice; on ``xi > t - r`` the potential
    equals ``c`` and that stratum is added exactly.  Plain sampling would
    almost never see the jumps past ``t`` that carry the margin for large t.
    """
    top = t - r
    edges = [model.support_inf, 0.0]
    if 0.5 * t < top:
        edges.append(0.5 * t)
    edges.append(top)
    edges = [e for i, e in enumerate(edges) if i == 0 or e > edges[i - 1]]
    base = pot(t)
    per = max(n_draws // (len(edges) - 1), 2)
    mean = c * float(model.tail(top)) - base * float(model.tail(top))
    var = 0.0
    for lo, hi in zip(edges, edges[1:]):
        p = float(model.tail(lo)) - float(model.tail(hi))
        if p <= 0:
            continue
        vals = pot(t - _slice_draws(model, lo, hi, per, rng)) - base
        mean += p * float(vals.mean())
        var += p * p * float(vals.var(ddof=1)) / per
    return mean, math.sqrt(var)


def empirical_drift_check(model: IncrementModel, cert: MartingaleCertificate,
                          n_states=100, n_draws=10**5, rng=0, t_range=None,
                          n_se=4.0) -> DriftCheckReport:
    """Estimate the one-step drift at random states ``t >= R`` by sampling.

    States are log-uniform on ``t_range`` (default ``[R, t_max]``).  A state
    is a violation when the sampled margin is below ``-n_se`` standard
    errors, and a mismatch when it differs from the quadrature margin by more
    than ``n_se`` standard errors.
    """
    lo, hi = t_range or (cert.R, cert.t_max)
    seed = _seed_of(rng)
    pick = RngStream(seed, DRIFT_STREAMS)
    states = np.sort(np.exp(pick.generator.uniform(math.log(lo), math.log(hi), n_states)))
    c = cert.c
    if cert.kind == SUB:
        pot = lambda v: potential_G_hat(c, v, model)
        r = cert.r_c
    elif cert.kind == SUPER:
        pot = lambda v: potential_G(c, v, model)
        r = 0.0
    else:
        raise ParameterError(f"unknown certificate kind {cert.kind!r}")
    sign = 1.0 if cert.kind == SUB else -1.0

    mc = np.empty(n_states)
    se = np.empty(n_states)
    qm = np.empty(n_states)
    for i, t in enumerate(states):
        stream = RngStream(seed, DRIFT_STREAMS + 1 + i)
        m, s = stratified_drift(model, pot, c, t, r, n_draws, stream)
        mc[i], se[i] = sign * m, s
        qm[i] = drift_report(cert.kind, c, t, model).margin
    violations = [(float(t), float(m)) for t, m, s in zip(states, mc, se) if m < -n_se * s]
    mismatches = [(float(t), float(m), float(q))
                  for t, m, s, q in zip(states, mc, se, qm) if abs(m - q) > n_se * s]
    return DriftCheckReport(cert.kind, states, mc, se, qm, violations, mismatches)


# -- Iglehart decomposition --------------------------------------------------------


def iglehart_residual(lindley: LindleyEstimate, samples, x, level=0.99):
    """``P(M>x) - P(M_tau>x) - E[P(M > x - S_tau); M_tau <= x]`` with a combined CI.

    ``P(M > .)`` comes from the Lindley estimate interpolated on its grid.
    """
    ok = as_batch(samples).complete()
    n = len(ok)
    z = _z(level)
    p_m = float(lindley.interpolate(x))
    ci_m = float(np.interp(x, lindley.x_grid, lindley.ci_halfwidth))
    p_mt, ci_mt = mtau_tail(ok, x, level)
    inside = ok.m_tau <= x
    vals = np.where(inside, lindley.interpolate(x - ok.s_tau), 0.0)
    term = float(vals.mean())
    # sampling error of the cycle average plus the Lindley error it inherits
    lo_y, hi_y = x, x - float(ok.s_tau.min()) if n else x
    sel = (lindley.x_grid >= lo_y) & (lindley.x_grid <= hi_y)
    ci_interp = float(lindley.ci_halfwidth[sel].max()) if sel.any() else ci_m
    ci_term = z * float(vals.std(ddof=1)) / math.sqrt(n) + ci_interp * float(inside.mean())
    residual = p_m - p_mt - term
    return {
        "x": float(x), "p_M": p_m, "p_Mtau": p_mt, "integral_term": term,
        "residual": residual, "ci": math.sqrt(ci_m**2 + ci_mt**2 + ci_term**2),
    }
