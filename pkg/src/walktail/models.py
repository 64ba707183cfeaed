"""Shifted increment laws for a random walk with negative drift.

Every family is ``xi = Y - mu`` with ``Y >= 0``, so the support infimum is
``-mu``.  All tail functionals accept scalars or arrays and return the same
shape (a Python float for scalar input).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special

from .errors import ModelError
from .quadrature import quad
from .streams import as_generator


@dataclass(frozen=True)
class TailMoments:
    a: float
    a_plus: float
    a_minus: float


def _out(value, scalar):
    return float(value) if scalar else value


class IncrementModel:
    """Base class; subclasses supply ``tail``, ``cdf``, ``density`` and ``_draw``.

    ``integrated_tail`` and the moments fall back to adaptive quadrature at
    ``quad_tol``; families with closed forms override them.
    """

    family = ""
    mu: float
    quad_tol: float

    def _validate(self):
        if not self.quad_tol > 0:
            raise ModelError("quad_tol must be positive")
        if not self.mu > 0:
            raise ModelError("shift mu must be positive for a negative mean")
        if not self.tail_moments().a > 0:
            raise ModelError(
                f"{self.family}: mean of xi is {-self.tail_moments().a:.6g}, "
                "need a negative mean"
            )

    @property
    def support_inf(self) -> float:
        return -self.mu

    @property
    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params, "quad_tol": self.quad_tol}

    # -- tail functionals --------------------------------------------------

    def tail(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def density(self, x):
        raise NotImplementedError

    def _tail_scalar(self, u):
        return float(self.tail(u))

    def integrated_tail(self, x):
        return self.integrated_tail_quad(x)

    def integrated_tail_quad(self, x):
        """``int_x^inf tail(u) du`` by quadrature (linear below the support)."""
        scalar = np.ndim(x) == 0
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(xs)
        lo = self.support_inf
        base = None
        for i, xi in enumerate(xs):
            if xi < lo:
                if base is None:
                    base = self._integrated_tail_quad(lo)
                out[i] = (lo - xi) + base
            else:
                out[i] = self._integrated_tail_quad(xi)
        return _out(out[0] if scalar else out, scalar)

    def _integrated_tail_quad(self, x):
        return quad(self._tail_scalar, x, math.inf, rtol=self.quad_tol)

    @cached_property
    def _moments(self) -> TailMoments:
        a_plus = self.integrated_tail_quad(0.0)
        mean_y = self.integrated_tail_quad(self.support_inf)
        a_minus = quad(lambda z: float(self.cdf(z)), self.support_inf, 0.0,
                       rtol=self.quad_tol)
        return TailMoments(a=self.mu - mean_y, a_plus=a_plus, a_minus=a_minus)

    def tail_moments(self) -> TailMoments:
        return self._moments

    # -- light-tail support ------------------------------------------------

    @property
    def h_sup(self) -> float:
        """Right end of the interval where ``E exp(h xi)`` is finite."""
        return 0.0

    def mgf(self, h):
        raise NotImplementedError

    # -- sampling ----------------------------------------------------------

    def sample(self, rng, size=None):
        """Inverse-CDF draws of ``xi``; deterministic given the stream state."""
        u = 1.0 - as_generator(rng).random(size)
        y = self._draw(u)
        return float(y - self.mu) if size is None else y - self.mu

    def _draw(self, u):
        raise NotImplementedError


@dataclass(frozen=True)
class ParetoShift(IncrementModel):
    """``Y`` Lomax: ``P(Y > y) = (1 + y/sigma)^(-alpha)``, ``alpha > 1``."""

    alpha: float
    sigma: float
    mu: float
    quad_tol: float = 1e-10
    family = "pareto_shift"

    def __post_init__(self):
        if not self.alpha > 1:
            raise ModelError("alpha must exceed 1 for a finite mean")
        if not self.sigma > 0:
            raise ModelError("sigma must be positive")
        self._validate()

    @property
    def params(self):
        return {"alpha": self.alpha, "sigma": self.sigma, "mu": self.mu}

    def _z(self, x):
        return np.maximum(np.asarray(x, dtype=float) + self.mu, 0.0) / self.sigma

    def tail(self, x):
        return _out((1.0 + self._z(x)) ** -self.alpha, np.ndim(x) == 0)

    def _tail_scalar(self, u):
        y = u + self.mu
        return 1.0 if y <= 0 else (1.0 + y / self.sigma) ** -self.alpha

    def cdf(self, x):
        return _out(-np.expm1(-self.alpha * np.log1p(self._z(x))), np.ndim(x) == 0)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        z = self._z(x)
        d = np.where(x >= -self.mu,
                     self.alpha / self.sigma * (1.0 + z) ** (-self.alpha - 1), 0.0)
        return _out(d, x.ndim == 0)

    def integrated_tail(self, x):
        x = np.asarray(x, dtype=float)
        z = self._z(x)
        below = np.maximum(-self.mu - x, 0.0)
        v = self.sigma / (self.alpha - 1) * (1.0 + z) ** (1 - self.alpha) + below
        return _out(v, x.ndim == 0)

    @cached_property
    def _moments(self):
        mean_y = self.sigma / (self.alpha - 1)
        a_plus = float(self.integrated_tail(0.0))
        # int_{-mu}^0 F = mu - (Fs(-mu) - Fs(0))
        a_minus = self.mu - mean_y + a_plus
        return TailMoments(a=self.mu - mean_y, a_plus=a_plus, a_minus=a_minus)

    def mgf(self, h):
        return math.inf if h > 0 else (1.0 if h == 0 else float("nan"))

    def _draw(self, u):
        return self.sigma * (u ** (-1.0 / self.alpha) - 1.0)


@dataclass(frozen=True)
class WeibullShift(IncrementModel):
    """``Y`` Weibull: ``P(Y > y) = exp(-(y/sigma)^beta)``.

    ``beta < 1`` is heavy-tailed; ``beta >= 1`` has a finite mgf near 0.
    ``integrated_tail`` uses the regularized upper incomplete gamma function
    (vectorized); moments still come from quadrature, and
    :meth:`integrated_tail_quad` stays available as an independent check.
    """

    beta: float
    sigma: float
    mu: float
    quad_tol: float = 1e-10
    family = "weibull_shift"

    def __post_init__(self):
        if not self.beta > 0:
            raise ModelError("beta must be positive")
        if not self.sigma > 0:
            raise ModelError("sigma must be positive")
        self._validate()

    @property
    def params(self):
        return {"beta": self.beta, "sigma": self.sigma, "mu": self.mu}

    def _z(self, x):
        return np.maximum(np.asarray(x, dtype=float) + self.mu, 0.0) / self.sigma

    def tail(self, x):
        return _out(np.exp(-self._z(x) ** self.beta), np.ndim(x) == 0)

    def _tail_scalar(self, u):
        y = u + self.mu
        return 1.0 if y <= 0 else math.exp(-((y / self.sigma) ** self.beta))

    def cdf(self, x):
        return _out(-np.expm1(-self._z(x) ** self.beta), np.ndim(x) == 0)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        z = self._z(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.beta / self.sigma * z ** (self.beta - 1) * np.exp(-z ** self.beta)
        d = np.where(x > -self.mu, d, 0.0)
        return _out(d, x.ndim == 0)

    def integrated_tail(self, x):
        x = np.asarray(x, dtype=float)
        z = self._z(x)
        s = 1.0 / self.beta
        v = self.sigma * special.gamma(1 + s) * special.gammaincc(s, z ** self.beta)
        return _out(v + np.maximum(-self.mu - x, 0.0), x.ndim == 0)

    @property
    def h_sup(self):
        if self.beta > 1:
            return math.inf
        if self.beta == 1:
            return 1.0 / self.sigma
        return 0.0

    def mgf(self, h):
        if h == 0:
            return 1.0
        if h > self.h_sup or (h == self.h_sup and h > 0):
            return math.inf
        if self.beta == 1:
            return math.exp(-h * self.mu) / (1.0 - h * self.sigma)
        # E exp(h Y) = 1 + h int_0^inf exp(h y) P(Y > y) dy
        integrand = lambda y: math.exp(h * y - (y / self.sigma) ** self.beta)
        return math.exp(-h * self.mu) * (1.0 + h * quad(integrand, 0.0, math.inf,
                                                         rtol=1e-13))

    def _draw(self, u):
        return self.sigma * (-np.log(u)) ** (1.0 / self.beta)


@dataclass(frozen=True)
class ExpShift(IncrementModel):
    """``Y`` exponential with rate ``rate``; the light-tailed baseline."""

    rate: float
    mu: float
    quad_tol: float = 1e-10
    family = "exp_shift"

    def __post_init__(self):
        if not self.rate > 0:
            raise ModelError("rate must be positive")
        self._validate()

    @property
    def params(self):
        return {"lambda": self.rate, "mu": self.mu}

    def _y(self, x):
        return np.maximum(np.asarray(x, dtype=float) + self.mu, 0.0)

    def tail(self, x):
        return _out(np.exp(-self.rate * self._y(x)), np.ndim(x) == 0)

    def _tail_scalar(self, u):
        y = u + self.mu
        return 1.0 if y <= 0 else math.exp(-self.rate * y)

    def cdf(self, x):
        return _out(-np.expm1(-self.rate * self._y(x)), np.ndim(x) == 0)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        d = np.where(x >= -self.mu, self.rate * np.exp(-self.rate * self._y(x)), 0.0)
        return _out(d, x.ndim == 0)

    def integrated_tail(self, x):
        x = np.asarray(x, dtype=float)
        v = np.exp(-self.rate * self._y(x)) / self.rate + np.maximum(-self.mu - x, 0.0)
        return _out(v, x.ndim == 0)

    @cached_property
    def _moments(self):
        mean_y = 1.0 / self.rate
        a_plus = math.exp(-self.rate * self.mu) / self.rate
        return TailMoments(a=self.mu - mean_y, a_plus=a_plus,
                           a_minus=self.mu - mean_y + a_plus)

    @property
    def h_sup(self):
        return self.rate

    def mgf(self, h):
        if h >= self.rate:
            return math.inf
        return math.exp(-h * self.mu) * self.rate / (self.rate - h)

    def _draw(self, u):
        return -np.log(u) / self.rate


FAMILIES = {cls.family: cls for cls in (ParetoShift, WeibullShift, ExpShift)}


def model_from_dict(data: dict) -> IncrementModel:
    """Build a model from its JSON form, e.g.
    ``{"family": "pareto_shift", "alpha": 3, "sigma": 1, "mu": 1.5}``.
    """
    data = dict(data)
    try:
        cls = FAMILIES[data.pop("family")]
    except KeyError as exc:
        raise ModelError(f"unknown or missing family: {exc}") from None
    if cls is ExpShift and "lambda" in data:
        data["rate"] = data.pop("lambda")
    try:
        return cls(**{k: float(v) for k, v in data.items()})
    except TypeError as exc:
        raise ModelError(str(exc)) from None


def canonical_pareto(**kw) -> ParetoShift:
    """The reference heavy-tailed model used throughout: alpha=3, sigma=1, mu=1.5 (a=1)."""
    return ParetoShift(alpha=3.0, sigma=1.0, mu=1.5, **kw)
