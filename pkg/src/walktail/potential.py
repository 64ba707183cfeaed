"""Tail potentials, their one-step drift, and sub/supermartingale certificates.

For a plateau level ``c > 0`` the potential is

    G_c(x)     = Fs(x) for x >= 0,  c for x < 0
    Ghat_c(x)  = min(G_c(x), c)

where ``Fs(x) = int_x^inf Fbar``.  The drift of ``Ghat_c`` at distance ``t``
from the barrier is ``E Ghat_c(t - xi)``; integrating by parts turns it into
an expression that only needs ``Fbar`` and ``F``:

    E Ghat_c(t - xi) = Fs(t) + (c - Fs(r_c)) Fbar(t - r_c)
                       + int_0^{t-r_c} Fbar(z) Fbar(t-z) dz
                       - int_{-inf}^0 Fbar(t-z) F(z) dz

with ``r_c`` the leftmost point where ``Fs`` drops to ``c``.  Margins are
computed from the last three terms directly, so nothing cancels against
``Fs(t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificationFailed, DomainError, ParameterError
from .models import IncrementModel
from .quadrature import quad

QUAD_RTOL = 1e-12
SUB, SUPER = "sub", "super"


def _check_c(c):
    if not c > 0:
        raise ParameterError(f"plateau level c must be positive, got {c}")


def potential_G(c, x, model: IncrementModel):
    _check_c(c)
    x = np.asarray(x, dtype=float)
    v = np.where(x >= 0, model.integrated_tail(np.maximum(x, 0.0)), c)
    return float(v) if v.ndim == 0 else v


def potential_G_hat(c, x, model: IncrementModel):
    v = np.minimum(potential_G(c, x, model), c)
    return float(v) if np.ndim(v) == 0 else v


def _first_true(pred, hi, atol):
    """Smallest ``t >= 0`` with ``pred(t)`` for a predicate monotone in ``t``."""
    if pred(0.0):
        return 0.0
    lo = 0.0
    while not pred(hi):
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise ParameterError("monotone condition never becomes true")
    while hi - lo > atol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def threshold_r(c, model: IncrementModel, atol=1e-12):
    """``min{x >= 0 : Fs(x) <= c}`` by bisection (left edge within ``atol``)."""
    _check_c(c)
    if c >= model.tail_moments().a_plus:
        return 0.0
    return _first_true(lambda x: float(model.integrated_tail(x)) <= c, 1.0, atol)


@dataclass(frozen=True)
class TailPotential:
    c: float
    r_c: float
    model: IncrementModel

    @classmethod
    def build(cls, c, model):
        return cls(float(c), threshold_r(c, model), model)

    def G(self, x):
        return potential_G(self.c, x, self.model)

    def G_hat(self, x):
        return potential_G_hat(self.c, x, self.model)


# -- drift integrals ---------------------------------------------------------


def _tail_fn(model):
    return model._tail_scalar


def _conv(t, upper, model, rtol):
    """``int_0^upper Fbar(z) Fbar(t-z) dz`` for ``0 <= upper <= t``.

    Pieces beyond ``t/2`` are reflected onto ``[0, t/2]``, where the
    integrand is peaked at the left end only.
    """
    fb = _tail_fn(model)
    g = lambda z: fb(z) * fb(t - z)
    half = 0.5 * t
    if upper <= half:
        return quad(g, 0.0, upper, rtol=rtol)
    # int_0^upper = int_0^{t/2} + int_{t-upper}^{t/2}
    return quad(g, 0.0, half, rtol=rtol) + quad(g, t - upper, half, rtol=rtol)


def _left(t, model, rtol):
    """``int_{-inf}^0 Fbar(t-z) F(z) dz``; ``F`` vanishes below the support."""
    fb = _tail_fn(model)
    lo = model.support_inf
    if lo >= 0:
        return 0.0
    return quad(lambda z: fb(t - z) * (1.0 - fb(z)), lo, 0.0, rtol=rtol)


def _tail_or_raise(t, model):
    ft = float(model.tail(t))
    if ft <= 0.0 or not math.isfinite(ft):
        raise DomainError(f"tail underflows at t={t}")
    return ft


def sstar_ratio(t, model: IncrementModel, fold=True, rtol=QUAD_RTOL):
    """``int_0^t Fbar(z) Fbar(t-z) dz / Fbar(t)``; tends to ``2 a_plus`` on S*.

    ``fold=False`` integrates over the full range instead of using the
    symmetry ``z <-> t - z``.
    """
    if not t > 0:
        raise DomainError("sstar_ratio needs t > 0")
    ft = _tail_or_raise(t, model)
    if fold:
        num = 2.0 * quad(lambda z: model._tail_scalar(z) * model._tail_scalar(t - z),
                         0.0, 0.5 * t, rtol=rtol)
    else:
        num = quad(lambda z: model._tail_scalar(z) * model._tail_scalar(t - z),
                   0.0, t, rtol=rtol, points=[0.5 * t])
    return num / ft


def subexp_ratio(t, model: IncrementModel, conditional=True, rtol=QUAD_RTOL):
    """``int_0^t Fbar(t-y) dF(y) / Fbar(t)``.

    Subexponentiality is a property of laws on the half-line, so by default
    the law of ``xi`` conditioned on ``xi >= 0`` is used (both ``Fbar`` and
    ``dF`` divided by ``Fbar(0)``); the ratio then tends to 1 for
    subexponential tails.  ``conditional=False`` returns the raw ratio, whose
    limit is ``Fbar(0)``.
    """
    if not t > 0:
        raise DomainError("subexp_ratio needs t > 0")
    ft = _tail_or_raise(t, model)
    fb = model._tail_scalar
    num = quad(lambda y: fb(t - y) * float(model.density(y)), 0.0, t, rtol=rtol,
               points=[0.5 * t])
    ratio = num / ft
    return ratio / float(model.tail(0.0)) if conditional else ratio


def left_ratio(t, model: IncrementModel, rtol=QUAD_RTOL):
    """``int_{-inf}^0 Fbar(t-z) F(z) dz / Fbar(t)``; tends to ``a_minus`` if long-tailed."""
    ft = _tail_or_raise(t, model)
    return _left(t, model, rtol) / ft


def longtail_ratio(t, y, model: IncrementModel):
    ft = _tail_or_raise(t, model)
    return float(model.tail(t - y)) / ft


def _hat_margin(c, r, t, model, rtol):
    """``E Ghat_c(t - xi) - Ghat_c(t)`` for ``t > r``."""
    fs_r = float(model.integrated_tail(r)) if r > 0 else model.tail_moments().a_plus
    boundary = (c - fs_r) * float(model.tail(t - r))
    return boundary + _conv(t, t - r, model, rtol) - _left(t, model, rtol)


def _plain_margin(c, t, model, rtol):
    """``E G_c(t - xi) - G_c(t)`` for ``t > 0``."""
    a_plus = model.tail_moments().a_plus
    return ((c - a_plus) * float(model.tail(t)) + _conv(t, t, model, rtol)
            - _left(t, model, rtol))


def drift_hat(c, t, model: IncrementModel, rtol=QUAD_RTOL):
    """``E Ghat_c(t - xi)`` through the integrated-by-parts identity."""
    _check_c(c)
    r = threshold_r(c, model)
    if not t > r:
        raise DomainError(f"drift_hat needs t > r_c = {r}, got t={t}")
    return float(model.integrated_tail(t)) + _hat_margin(c, r, t, model, rtol)


def drift_plain(c, t, model: IncrementModel, rtol=QUAD_RTOL):
    """``E G_c(t - xi)``; the ``r_c = 0`` form of the identity."""
    _check_c(c)
    if not t > 0:
        raise DomainError(f"drift_plain needs t > 0, got t={t}")
    return float(model.integrated_tail(t)) + _plain_margin(c, t, model, rtol)


def drift_direct(c, t, model: IncrementModel, hat=True, rtol=QUAD_RTOL):
    """``int Ghat_c(t - z) dF(z)`` straight from the density.

    Independent of the by-parts identity; used to cross-check it.
    """
    _check_c(c)
    r = threshold_r(c, model) if hat else 0.0
    f = lambda z: float(model.density(z))
    fs = lambda u: float(model.integrated_tail(u))
    lo = model.support_inf
    split = t - r
    body = quad(lambda z: fs(t - z) * f(z), lo, split, rtol=rtol,
                points=[0.0]) if split > lo else 0.0
    jump = quad(lambda z: c * f(z), max(split, lo), math.inf, rtol=rtol)
    return body + jump


@dataclass(frozen=True)
class DriftReport:
    t: float
    drift_value: float
    potential_value: float
    margin: float
    kind: str


def drift_report(kind, c, t, model, rtol=QUAD_RTOL) -> DriftReport:
    """Drift at ``t`` with the margin oriented so that ``margin >= 0`` is good."""
    if kind == SUB:
        r = threshold_r(c, model)
        if not t > r:
            raise DomainError(f"need t > r_c = {r}")
        m = _hat_margin(c, r, t, model, rtol)
        pot = float(potential_G_hat(c, t, model))
        return DriftReport(t, pot + m, pot, m, kind)
    if kind == SUPER:
        if not t > 0:
            raise DomainError("need t > 0")
        m = _plain_margin(c, t, model, rtol)
        pot = float(potential_G(c, t, model))
        return DriftReport(t, pot + m, pot, -m, kind)
    raise ParameterError(f"unknown kind {kind!r}")


# -- certification -----------------------------------------------------------


@dataclass(frozen=True)
class VerificationGrid:
    """Geometric grid ``[R, t_max]``; ``t_max`` defaults to ``1e3 * (1 + r_c)``."""

    n_points: int = 512
    t_max: float | None = None
    t_floor: float = 1e-3

    def resolve_t_max(self, r_c):
        return float(self.t_max) if self.t_max is not None else 1e3 * (1.0 + r_c)


@dataclass
class MartingaleCertificate:
    kind: str
    epsilon: float
    R: float
    t_max: float
    n_grid: int
    tolerance: float
    min_margin: float
    R1: float
    R2: float
    c: float
    r_c: float
    model: dict
    flags: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    grid_t: np.ndarray | None = field(default=None, repr=False)
    margins: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "kind": self.kind, "epsilon": self.epsilon, "R": self.R,
            "t_max": self.t_max, "min_margin": self.min_margin,
            "R1": self.R1, "R2": self.R2, "c": self.c, "r_c": self.r_c,
            "n_grid": self.n_grid, "tolerance": self.tolerance,
            "flags": list(self.flags), "notes": list(self.notes),
            "model": dict(self.model),
        }

    @classmethod
    def from_dict(cls, d):
        keys = ("kind", "epsilon", "R", "t_max", "n_grid", "tolerance",
                "min_margin", "R1", "R2", "c", "r_c", "model")
        return cls(**{k: d[k] for k in keys}, flags=list(d.get("flags", [])),
                   notes=list(d.get("notes", [])))


def _scan_threshold(ts, ok):
    """First grid point after the last failure, or ``None`` if the last fails."""
    ok = np.asarray(ok, dtype=bool)
    if not ok[-1]:
        return None
    bad = np.flatnonzero(~ok)
    return float(ts[0]) if bad.size == 0 else float(ts[bad[-1] + 1])


def _tail_monotone(ts, vals, increasing):
    sel = ts >= 0.5 * ts[-1]
    d = np.diff(np.asarray(vals)[sel])
    scale = np.max(np.abs(vals[sel])) or 1.0
    return bool(np.all(d >= -1e-12 * scale) if increasing else np.all(d <= 1e-12 * scale))


def underflow_cap(model, t_max, floor=1e-250):
    """Largest ``t <= t_max`` with ``Fbar(t) >= floor`` (bisection)."""
    if float(model.tail(t_max)) >= floor:
        return float(t_max)
    lo, hi = 0.0, float(t_max)
    while hi - lo > 1e-9 * hi:
        mid = 0.5 * (lo + hi)
        if float(model.tail(mid)) >= floor:
            lo = mid
        else:
            hi = mid
    return lo


def _verify(kind, c, r, R, t_max, n, tolerance, model, rtol):
    ts = np.geomspace(R, t_max, n)
    if kind == SUB:
        margins = np.array([_hat_margin(c, r, t, model, rtol) for t in ts])
    else:
        margins = np.array([-_plain_margin(c, t, model, rtol) for t in ts])
    i = int(np.argmin(margins))
    if margins[i] < -tolerance:
        raise CertificationFailed(
            f"{kind} drift violated at t={ts[i]:.6g} (margin {margins[i]:.3e})",
            t=float(ts[i]), margin=float(margins[i]), curve=(ts, margins),
        )
    return ts, margins


def certify_sub(epsilon, model: IncrementModel, grid: VerificationGrid | None = None,
                tolerance=1e-9, rtol=QUAD_RTOL) -> MartingaleCertificate:
    """Certify that ``Ghat_{a+eps}(x - S)`` stopped at ``mu_{x-R}`` is a submartingale.

    ``R1`` is the smallest ``t`` with ``2 int_0^{t/2} Fbar >= 2 a_plus - eps/2``
    (bisection; the left side is nondecreasing) and ``R2`` the first grid
    point from which ``(Fbar(t - r_c) - Fbar(t)) / Fbar(t) <= eps / (4 a_plus)``.
    The drift inequality is then checked directly on ``[R, t_max]``.
    """
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    grid = grid or VerificationGrid()
    mom = model.tail_moments()
    c = mom.a + epsilon
    r = threshold_r(c, model)
    t_max = grid.resolve_t_max(r)
    flags = []
    if underflow_cap(model, t_max) < t_max:
        t_max = underflow_cap(model, t_max)
        flags.append("t_max_trimmed_tail_underflow")

    target = 2 * mom.a_plus - epsilon / 2
    r1_value = lambda t: 2.0 * (mom.a_plus - float(model.integrated_tail(0.5 * t)))
    R1 = 0.0 if target <= 0 else _first_true(lambda t: r1_value(t) >= target, 1.0, 1e-12)

    t0 = r + grid.t_floor
    if r > 0:
        scan = np.geomspace(t0, t_max, grid.n_points)
        ratio = (model.tail(scan - r) - model.tail(scan)) / model.tail(scan)
        R2 = _scan_threshold(scan, ratio <= epsilon / (4 * mom.a_plus))
        if R2 is None:
            raise CertificationFailed(
                "R2 condition fails at t_max", t=t_max, curve=(scan, ratio))
        if not _tail_monotone(scan, ratio, increasing=False):
            flags.append("R2_ratio_not_monotone_near_t_max")
    else:
        R2 = 0.0
    R = max(R1, R2, t0)
    if R >= t_max:
        raise CertificationFailed(f"threshold R={R:.6g} beyond t_max={t_max:.6g}", t=R)

    ts, margins = _verify(SUB, c, r, R, t_max, grid.n_points, tolerance, model, rtol)
    return MartingaleCertificate(
        kind=SUB, epsilon=float(epsilon), R=float(R), t_max=t_max,
        n_grid=grid.n_points, tolerance=tolerance, min_margin=float(margins.min()),
        R1=float(R1), R2=float(R2), c=c, r_c=r, model=model.to_dict(), flags=flags,
        grid_t=ts, margins=margins,
    )


def certify_super(epsilon, model: IncrementModel, grid: VerificationGrid | None = None,
                  tolerance=1e-9, rtol=QUAD_RTOL) -> MartingaleCertificate:
    """Certify that ``G_{a-eps}(x - S)`` stopped at ``mu_{x-R}`` is a supermartingale.

    Sufficient thresholds come from grid scans of
    ``sstar_ratio(t) <= 2 a_plus + eps/2`` (R1) and
    ``left_ratio(t) >= a_minus - eps/2`` (R2); together they force a
    nonnegative margin.  The drift inequality is then checked directly.
    """
    mom = model.tail_moments()
    if not 0 < epsilon < mom.a:
        raise ParameterError(f"need 0 < epsilon < a = {mom.a}")
    grid = grid or VerificationGrid()
    c = mom.a - epsilon
    t_max = grid.resolve_t_max(0.0)
    flags = []
    if underflow_cap(model, t_max) < t_max:
        t_max = underflow_cap(model, t_max)
        flags.append("t_max_trimmed_tail_underflow")
    scan = np.geomspace(grid.t_floor, t_max, grid.n_points)

    sstar = np.array([sstar_ratio(t, model, rtol=rtol) for t in scan])
    R1 = _scan_threshold(scan, sstar <= 2 * mom.a_plus + epsilon / 2)
    if R1 is None:
        raise CertificationFailed(
            "S* ratio condition not met by t_max", t=t_max, curve=(scan, sstar))
    if not (_tail_monotone(scan, sstar, increasing=True)
            or _tail_monotone(scan, sstar, increasing=False)):
        flags.append("R1_ratio_not_monotone_near_t_max")
    left = np.array([left_ratio(t, model, rtol=rtol) for t in scan])
    R2 = _scan_threshold(scan, left >= mom.a_minus - epsilon / 2)
    if R2 is None:
        raise CertificationFailed(
            "long-tail condition not met by t_max", t=t_max, curve=(scan, left))
    if not _tail_monotone(scan, left, increasing=True):
        flags.append("R2_ratio_not_monotone_near_t_max")

    R = max(R1, R2, grid.t_floor)
    if R >= t_max:
        raise CertificationFailed(f"threshold R={R:.6g} beyond t_max={t_max:.6g}", t=R)
    ts, margins = _verify(SUPER, c, 0.0, R, t_max, grid.n_points, tolerance, model, rtol)
    return MartingaleCertificate(
        kind=SUPER, epsilon=float(epsilon), R=float(R), t_max=t_max,
        n_grid=grid.n_points, tolerance=tolerance, min_margin=float(margins.min()),
        R1=float(R1), R2=float(R2), c=c, r_c=0.0, model=model.to_dict(), flags=flags,
        notes=["R2 uses int F(z)Fbar(t-z) >= (a_minus - eps/2) Fbar(t)"],
        grid_t=ts, margins=margins,
    )
