"""Asymptotic and non-asymptotic tail values for ``M`` and ``M_tau``.

The non-asymptotic bounds take a certificate from
:mod:`walktail.potential`:

* ``lower_bound_M``:    ``P(M > x)     >= Fs(x + R) / (a + eps)``           (sub)
* ``upper_bound_M``:    ``P(M > x)     <= Fs(x - R - r) / (a - eps)``       (super)
* ``upper_bound_Mtau``: ``P(M_tau > x) <= a/(a - eps) E[tau] Fbar(x - R - r)`` (super)
* ``lower_bound_Mtau``: ``P(M_tau > x) >= (Fs(x+R) - E Fs(x+R-S_tau)) / (a+eps)`` (sub)

Here ``r`` is any level with ``P(M > r) <= Fs(R) / (a - eps)``; it is found
by :func:`choose_r` from a caller-supplied upper bound on ``P(M > .)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import (DomainError, NoExponentError, NoRootError, ParameterError,
                     SearchFailed)
from .models import IncrementModel, model_from_dict
from .potential import SUB, SUPER, MartingaleCertificate
from .sim import exp_moment_stau


def _clamp(p):
    return min(max(float(p), 0.0), 1.0)


def _model_of(cert, model):
    return model if model is not None else model_from_dict(cert.model)


def _need(cert, kind):
    if cert.kind != kind:
        raise ParameterError(f"need a {kind} certificate, got {cert.kind!r}")


def veraverbecke(x, model: IncrementModel):
    """``Fs(x) / a``, the first-order asymptotic of ``P(M > x)``."""
    if x < 0:
        raise DomainError("x must be nonnegative")
    return float(model.integrated_tail(x)) / model.tail_moments().a


def fkz_lower_bound(x, model: IncrementModel):
    """``Fs(x) / (a + Fs(x))``; a lower bound on ``P(M > x)`` for every law."""
    if not x > 0:
        raise DomainError("x must be positive")
    fs = float(model.integrated_tail(x))
    return fs / (model.tail_moments().a + fs)


def lower_bound_M(x, cert: MartingaleCertificate, model=None):
    _need(cert, SUB)
    if not x > 0:
        raise DomainError("x must be positive")
    model = _model_of(cert, model)
    return _clamp(float(model.integrated_tail(x + cert.R)) / cert.c)


def choose_r(cert: MartingaleCertificate, sup_tail_upper, model=None, r_grid=None,
             cap=1e4):
    """Smallest grid ``r`` with ``sup_tail_upper(r) <= Fs(R) / (a - eps)``.

    ``sup_tail_upper`` must bound ``P(M > .)`` from above; a Monte Carlo
    confidence bound makes the resulting ``r`` (and every bound built on it)
    hold at that confidence level rather than deterministically.
    """
    _need(cert, SUPER)
    model = _model_of(cert, model)
    target = float(model.integrated_tail(cert.R)) / cert.c
    if r_grid is None:
        r_grid = np.concatenate([[0.0], np.geomspace(1e-2, cap, 600)])
    for r in np.asarray(r_grid, dtype=float):
        if r > cap:
            break
        if sup_tail_upper(r) <= target:
            return float(r)
    raise SearchFailed(f"no r <= {cap:g} with P(M > r) <= {target:.3e}", cap=cap)


def upper_bound_M(x, cert: MartingaleCertificate, r, model=None):
    _need(cert, SUPER)
    shift = cert.R + r
    if not x > shift:
        raise DomainError(f"bound is vacuous for x <= R + r = {shift:.6g}")
    model = _model_of(cert, model)
    return _clamp(float(model.integrated_tail(x - shift)) / cert.c)


def upper_bound_Mtau(x, cert: MartingaleCertificate, r, tau_mean, model=None):
    """``a / (a - eps) * tau_mean * Fbar(x - R - r)``; pass the upper CI edge of ``E tau``."""
    _need(cert, SUPER)
    shift = cert.R + r
    if not x > shift:
        raise DomainError(f"bound is vacuous for x <= R + r = {shift:.6g}")
    if tau_mean < 0:
        raise ParameterError("tau_mean must be nonnegative")
    model = _model_of(cert, model)
    a = model.tail_moments().a
    return _clamp(a / cert.c * tau_mean * float(model.tail(x - shift)))


def eq0_numerator(y, model: IncrementModel, stau_samples):
    """``Fs(y) - mean Fs(y - S_tau)`` over the samples."""
    s = np.asarray(stau_samples, dtype=float)
    if s.size == 0:
        raise ParameterError("need at least one S_tau sample")
    return float(model.integrated_tail(y)) - float(np.mean(model.integrated_tail(y - s)))


def lower_bound_Mtau(x, cert: MartingaleCertificate, stau_samples, model=None):
    _need(cert, SUB)
    model = _model_of(cert, model)
    num = eq0_numerator(x + cert.R, model, stau_samples)
    return _clamp(max(num, 0.0) / cert.c)


def eq0_ratio(x, model: IncrementModel, stau_samples):
    """``(Fs(x) - mean Fs(x - S_tau)) / Fbar(x)``; tends to ``|E S_tau| = a E tau``."""
    return eq0_numerator(x, model, stau_samples) / float(model.tail(x))


def asymp_Mtau(x, model: IncrementModel, tau_mean):
    if not tau_mean > 0:
        raise ParameterError("tau_mean must be positive")
    return tau_mean * float(model.tail(x))


# -- light-tailed baseline -----------------------------------------------------


@dataclass(frozen=True)
class LundbergBaseline:
    h0: float
    residual: float
    exp_moment_Stau: float | None = None

    def doob(self, x):
        """``exp(-h0 x)``, an upper bound on ``P(M > x)`` for ``x >= 0``."""
        return np.exp(-self.h0 * np.asarray(x, dtype=float)) if np.ndim(x) else \
            math.exp(-self.h0 * x)

    @property
    def local_prefactor(self):
        """``1 - E exp(h0 S_tau)``, the ratio of ``P(M_tau > x)`` to ``P(M > x)``."""
        return None if self.exp_moment_Stau is None else 1.0 - self.exp_moment_Stau


def _bracket(f, h_sup):
    if math.isinf(h_sup):
        hi = 1.0
        while not f(hi) > 0:
            hi *= 2.0
            if hi > 1e6:
                raise NoRootError("E exp(h xi) - 1 has no sign change below 1e6")
    else:
        hi = None
        for k in range(1, 200):
            h = h_sup * (1.0 - 2.0**-k)
            if f(h) > 0:
                hi = h
                break
        if hi is None:
            raise NoRootError("E exp(h xi) stays below 1 up to h_sup")
    lo = hi
    for _ in range(200):
        lo *= 0.5
        if f(lo) < 0:
            return lo, hi
    raise NoRootError("no negative value of E exp(h xi) - 1 near 0")


def lundberg(model: IncrementModel, stau_samples=None) -> LundbergBaseline:
    """Solve ``E exp(h0 xi) = 1`` for ``h0 > 0`` by bracketing plus Brent.

    With cycle samples the exponential moment ``E exp(h0 S_tau)`` is also
    estimated.
    """
    if not model.h_sup > 0:
        raise NoExponentError(f"{model.family}: E exp(h xi) is infinite for all h > 0")
    f = lambda h: model.mgf(h) - 1.0
    lo, hi = _bracket(f, model.h_sup)
    h0 = optimize.brentq(f, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps,
                         maxiter=500)
    moment = None if stau_samples is None else exp_moment_stau(stau_samples, h0)
    return LundbergBaseline(h0=float(h0), residual=abs(f(h0)), exp_moment_Stau=moment)


# -- bound table ---------------------------------------------------------------

COLUMNS = ("x", "lower_M", "upper_M", "fkz_lower", "asymp_M",
           "lower_Mtau", "upper_Mtau", "asymp_Mtau")
LUNDBERG_COLUMNS = ("h0", "doob")


@dataclass
class BoundTable:
    rows: list
    provenance: dict = field(default_factory=dict)
    lundberg: bool = False

    @property
    def columns(self):
        return COLUMNS + (LUNDBERG_COLUMNS if self.lundberg else ()) + ("notes",)

    def violations(self):
        """Rows where a populated lower bound exceeds a populated upper bound."""
        bad = []
        for row in self.rows:
            for lo, up in (("lower_M", "upper_M"), ("fkz_lower", "upper_M"),
                           ("lower_Mtau", "upper_Mtau")):
                if row.get(lo) is not None and row.get(up) is not None \
                        and row[lo] > row[up]:
                    bad.append((row["x"], lo, up))
        return bad

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([_fmt(row.get(k)) for k in self.columns])


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def build_bound_table(model: IncrementModel, x_grid, sub_cert, super_cert, r,
                      tau_interval, tau_mean, stau_samples, lundberg_baseline=None,
                      provenance=None) -> BoundTable:
    """One row per ``x``; cells outside a bound's domain stay empty with a note.

    ``tau_interval`` is the ``(low, high)`` CI of ``E tau``; upper bounds use
    the high edge, the asymptotic column uses ``tau_mean``.  With
    ``super_cert`` or ``r`` set to ``None`` the upper columns stay empty.
    """
    if super_cert is None:
        no_upper = "upper:no_super_certificate"
    elif r is None:
        no_upper = "upper:no_r_found"
    else:
        no_upper = None
    rows = []
    for x in x_grid:
        x = float(x)
        notes = []
        row = {"x": x}
        row["lower_M"] = lower_bound_M(x, sub_cert, model) if x > 0 else None
        row["fkz_lower"] = fkz_lower_bound(x, model) if x > 0 else None
        row["asymp_M"] = veraverbecke(x, model) if x >= 0 else None
        if no_upper is None and x > super_cert.R + r:
            row["upper_M"] = upper_bound_M(x, super_cert, r, model)
            row["upper_Mtau"] = upper_bound_Mtau(x, super_cert, r, tau_interval[1], model)
        else:
            row["upper_M"] = row["upper_Mtau"] = None
            notes.append(no_upper or "upper:x_le_R_plus_r")
        row["lower_Mtau"] = lower_bound_Mtau(x, sub_cert, stau_samples, model)
        row["asymp_Mtau"] = asymp_Mtau(x, model, tau_mean)
        if lundberg_baseline is not None:
            row["h0"] = lundberg_baseline.h0
            row["doob"] = _clamp(lundberg_baseline.doob(max(x, 0.0)))
        row["notes"] = ";".join(notes)
        rows.append(row)
    return BoundTable(rows, dict(provenance or {}), lundberg_baseline is not None)
