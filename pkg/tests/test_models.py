import math

import numpy as np
import pytest
from scipy import integrate

from walktail import ExpShift, ParetoShift, RngStream, WeibullShift, model_from_dict
from walktail.errors import ModelError


def test_pareto_closed_forms(pareto):
    assert pareto.tail(0.0) == pytest.approx(2.5**-3, rel=1e-14)
    assert pareto.tail(-1.5) == 1.0
    assert pareto.density(0.0) == pytest.approx(0.0768, rel=1e-14)
    assert pareto.density(-2.0) == 0.0
    assert pareto.integrated_tail(2.5) == pytest.approx(0.02, rel=1e-14)
    assert pareto.integrated_tail(0.0) == pytest.approx(0.08, rel=1e-14)
    m = pareto.tail_moments()
    assert (m.a, m.a_plus, m.a_minus) == pytest.approx((1.0, 0.08, 1.08), rel=1e-14)


def test_exp_closed_forms(expo):
    assert expo.tail(0.0) == pytest.approx(math.exp(-2), rel=1e-14)
    m = expo.tail_moments()
    assert (m.a, m.a_plus, m.a_minus) == pytest.approx(
        (1.0, math.exp(-2), 1 + math.exp(-2)), rel=1e-14)
    total, _ = integrate.quad(lambda x: expo.density(x), -2.0, np.inf, epsabs=1e-13)
    assert total == pytest.approx(1.0, abs=1e-8)


def _random_models(n, seed=0):
    gen = np.random.default_rng(seed)
    out = []
    for i in range(n):
        kind = i % 3
        if kind == 0:
            alpha, sigma = gen.uniform(1.5, 6), gen.uniform(0.2, 3)
            mean_y = sigma / (alpha - 1)
            out.append(ParetoShift(alpha, sigma, mean_y * gen.uniform(1.2, 3)))
        elif kind == 1:
            beta, sigma = gen.uniform(0.4, 2.5), gen.uniform(0.2, 3)
            mean_y = sigma * math.gamma(1 + 1 / beta)
            out.append(WeibullShift(beta, sigma, mean_y * gen.uniform(1.2, 3)))
        else:
            rate = gen.uniform(0.3, 4)
            out.append(ExpShift(rate, gen.uniform(1.2, 3) / rate))
    return out


@pytest.mark.parametrize("model", _random_models(51), ids=lambda m: repr(m.params))
def test_moment_identity_against_independent_quadrature(model):
    m = model.tail_moments()
    assert abs(m.a_minus - m.a_plus - m.a) <= 1e-8 * m.a
    # oracle: scipy quad straight on tail/cdf, no package helpers
    a_plus, _ = integrate.quad(lambda u: model.tail(u), 0, np.inf, epsabs=0,
                               epsrel=1e-11, limit=500)
    a_minus, _ = integrate.quad(lambda u: model.cdf(u), -model.mu, 0, epsabs=0,
                                epsrel=1e-11, limit=500)
    assert m.a_plus == pytest.approx(a_plus, rel=1e-8)
    assert m.a_minus == pytest.approx(a_minus, rel=1e-8)


@pytest.mark.parametrize("model", _random_models(6, seed=1), ids=lambda m: m.family)
def test_integrated_tail_shape(model):
    x = np.linspace(model.support_inf - 1, 15, 400)
    fs = model.integrated_tail(x)
    assert np.all(np.diff(fs) <= 1e-15)
    assert np.all(np.diff(fs, 2) >= -1e-12)
    h = 1e-5
    for xi in (-0.3, 0.7, 4.0):
        deriv = (model.integrated_tail(xi + h) - model.integrated_tail(xi - h)) / (2 * h)
        assert deriv == pytest.approx(-model.tail(xi), rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("beta", [0.3, 0.5, 1.0, 1.7])
def test_weibull_gamma_form_matches_quadrature(beta):
    m = WeibullShift(beta, 1.0, 3 * math.gamma(1 + 1 / beta))
    for x in (-m.mu - 0.5, -0.2, 0.0, 3.0, 40.0):
        assert m.integrated_tail(x) == pytest.approx(m.integrated_tail_quad(x), rel=1e-9)


def test_sampling_matches_tail(pareto):
    draws = pareto.sample(RngStream(1, 0), size=10**6)
    se = draws.std(ddof=1) / 1e3
    assert abs(draws.mean() + 1.0) <= 3 * se
    for x in (-1.0, 0.0, 1.0, 5.0):
        p = pareto.tail(x)
        half = 3.3 * math.sqrt(p * (1 - p) / draws.size)
        assert abs(np.mean(draws > x) - p) <= half + 1e-12


def test_sampling_is_deterministic(expo):
    a = expo.sample(RngStream(5, 3), size=1000)
    b = expo.sample(RngStream(5, 3), size=1000)
    c = expo.sample(RngStream(5, 4), size=1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert isinstance(expo.sample(RngStream(5, 3)), float)


@pytest.mark.parametrize("model", [ParetoShift(2.5, 1.3, 2.0), WeibullShift(0.7, 1, 4),
                                   ExpShift(2.0, 1.0)], ids=lambda m: m.family)
def test_json_round_trip(model):
    assert model_from_dict(model.to_dict()) == model


def test_exp_json_uses_lambda():
    m = model_from_dict({"family": "exp_shift", "lambda": 1, "mu": 2})
    assert m.rate == 1.0 and m.to_dict()["lambda"] == 1.0


@pytest.mark.parametrize("build", [
    lambda: ParetoShift(3, 1, 0.5),      # E xi = 0
    lambda: ParetoShift(3, 1, 0.2),      # positive mean
    lambda: ExpShift(1.0, 0.9),
    lambda: WeibullShift(1.0, 1.0, 1.0),
    lambda: ParetoShift(1.0, 1, 5),      # infinite mean
    lambda: ExpShift(-1, 1),
])
def test_rejects_bad_parameters(build):
    with pytest.raises(ModelError):
        build()


def test_unknown_family():
    with pytest.raises(ModelError):
        model_from_dict({"family": "cauchy"})
