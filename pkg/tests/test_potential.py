import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walktail import (ExpShift, MartingaleCertificate, ParetoShift, TailPotential,
                      VerificationGrid, WeibullShift, canonical_pareto, certify_sub, certify_super,
                      drift_hat, drift_plain, longtail_ratio, potential_G,
                      potential_G_hat, sstar_ratio, subexp_ratio, threshold_r)
from walktail.errors import CertificationFailed, DomainError, ParameterError
from walktail.potential import drift_direct, drift_report, left_ratio

PARETO = canonical_pareto()


@pytest.mark.parametrize("c, x, expected", [
    (0.3, -1.0, 0.3), (0.3, 2.5, 0.02), (0.3, 0.0, 0.08)])
def test_potential_G(c, x, expected):
    assert potential_G(c, x, PARETO) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("c, x, expected", [
    (0.02, 0.0, 0.02), (0.02, 3.0, 5.5**-2 / 2), (1.0, -5.0, 1.0)])
def test_potential_G_hat(c, x, expected):
    assert potential_G_hat(c, x, PARETO) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("c, expected", [(0.02, 2.5), (0.5, 0.0), (0.08, 0.0)])
def test_threshold_r(c, expected):
    assert threshold_r(c, PARETO) == pytest.approx(expected, abs=1e-11)


def test_threshold_is_left_edge():
    r = threshold_r(0.01, PARETO)
    assert PARETO.integrated_tail(r) <= 0.01
    assert PARETO.integrated_tail(r - 1e-9) > 0.01


@pytest.mark.parametrize("c", [0.0, -1.0])
def test_nonpositive_plateau_rejected(c):
    with pytest.raises(ParameterError):
        potential_G(c, 1.0, PARETO)
    with pytest.raises(ParameterError):
        threshold_r(c, PARETO)


@settings(max_examples=1000, deadline=None)
@given(c=st.floats(1e-4, 5.0), x1=st.floats(-10, 200), gap=st.floats(0, 100))
def test_G_hat_nonincreasing(c, x1, gap):
    assert potential_G_hat(c, x1, PARETO) >= potential_G_hat(c, x1 + gap, PARETO)


MODELS = [PARETO, WeibullShift(0.5, 1.0, 3.0), ExpShift(1.0, 2.0)]


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.family)
def test_by_parts_identity_matches_direct_quadrature(model):
    gen = np.random.default_rng(11)
    for _ in range(20):
        c = float(gen.uniform(0.005, 2.0))
        t = threshold_r(c, model) + float(gen.uniform(0.01, 25.0))
        direct = drift_direct(c, t, model)
        assert drift_hat(c, t, model) == pytest.approx(direct, rel=1e-7)
        assert drift_plain(c, t, model) == pytest.approx(
            drift_direct(c, t, model, hat=False), rel=1e-7)


def test_drift_domain_errors():
    with pytest.raises(DomainError):
        drift_hat(0.02, 2.5, PARETO)
    with pytest.raises(DomainError):
        drift_plain(0.5, 0.0, PARETO)
    with pytest.raises(ParameterError):
        drift_report("neither", 0.5, 1.0, PARETO)


def test_tail_potential_bundle():
    pot = TailPotential.build(0.02, PARETO)
    assert pot.r_c == pytest.approx(2.5)
    assert pot.G_hat(0.0) == 0.02 and pot.G(-1.0) == 0.02


@pytest.mark.parametrize("t", [0.5, 7.0, 120.0, 500.0])
def test_sstar_fold_symmetry(t):
    assert sstar_ratio(t, PARETO) == pytest.approx(sstar_ratio(t, PARETO, fold=False),
                                                   rel=1e-9)


def test_class_diagnostics():
    assert sstar_ratio(500.0, PARETO) == pytest.approx(0.16, rel=0.1)
    assert sstar_ratio(1e-6, PARETO) < 1e-6
    assert subexp_ratio(500.0, PARETO) == pytest.approx(1.0, rel=0.02)
    assert subexp_ratio(1e-6, PARETO) < 1e-5
    assert subexp_ratio(500.0, PARETO, conditional=False) == pytest.approx(
        PARETO.tail(0.0), rel=0.02)
    assert subexp_ratio(50.0, ExpShift(1.0, 2.0)) > 10
    assert longtail_ratio(100.0, 1.0, PARETO) == pytest.approx((102.5 / 101.5)**3, rel=1e-12)
    assert longtail_ratio(37.0, 0.0, PARETO) == 1.0
    for t in (3.0, 30.0):
        assert longtail_ratio(t, 1.0, ExpShift(1.0, 2.0)) == pytest.approx(math.e, rel=1e-12)
    assert left_ratio(1e3, PARETO) == pytest.approx(1.08, rel=1e-2)


def test_diagnostics_underflow():
    with pytest.raises(DomainError):
        sstar_ratio(900.0, ExpShift(1.0, 2.0))


def test_r1_condition_monotone():
    ts = np.geomspace(1e-3, 1e3, 400)
    vals = 2 * (0.08 - PARETO.integrated_tail(ts / 2))
    assert np.all(np.diff(vals) >= 0)


@pytest.fixture(scope="module")
def canonical_certs():
    return certify_sub(0.5, PARETO), certify_super(0.5, PARETO)


def test_certificates_are_sound(canonical_certs):
    sub, sup = canonical_certs
    for cert in (sub, sup):
        assert cert.min_margin >= -1e-9
        assert cert.grid_t[0] == pytest.approx(cert.R)
        assert len(cert.grid_t) == 512
    # re-derive the margins through the public drift operators
    for t in sub.grid_t[::37]:
        m = drift_hat(sub.c, t, PARETO) - potential_G_hat(sub.c, t, PARETO)
        assert m >= -sub.tolerance
    for t in sup.grid_t[::37]:
        m = potential_G(sup.c, t, PARETO) - drift_plain(sup.c, t, PARETO)
        assert m >= -sup.tolerance


def test_certificate_regression_values(canonical_certs):
    sub, sup = canonical_certs
    assert sub.R == pytest.approx(1e-3)
    assert sup.R == pytest.approx(3.917, abs=0.01)
    assert sup.c == 0.5 and sub.c == 1.5 and sub.r_c == 0.0


def test_certificate_json_round_trip(canonical_certs):
    for cert in canonical_certs:
        d = json.loads(json.dumps(cert.to_dict()))
        back = MartingaleCertificate.from_dict(d)
        assert back.to_dict() == cert.to_dict()
        assert {"kind", "epsilon", "R", "t_max", "min_margin", "R1", "R2"} <= d.keys()


def test_sub_certificate_with_positive_threshold():
    # a small drift with a large a_plus forces r_c > 0
    model = ParetoShift(1.5, 1.0, 2.2)
    cert = certify_sub(0.1, model, VerificationGrid(n_points=128))
    assert cert.r_c > 0 and cert.R > cert.r_c
    assert cert.min_margin >= -1e-9


def test_large_epsilon():
    cert = certify_sub(160.0, PARETO, VerificationGrid(n_points=64))
    assert cert.r_c == 0.0 and cert.min_margin >= -1e-9


@pytest.mark.parametrize("eps", [0.0, -0.1])
def test_sub_rejects_nonpositive_epsilon(eps):
    with pytest.raises(ParameterError):
        certify_sub(eps, PARETO)


@pytest.mark.parametrize("eps", [1.0, 1.5, 0.0])
def test_super_rejects_epsilon_outside_range(eps):
    with pytest.raises(ParameterError):
        certify_super(eps, PARETO)


def test_light_tail_super_fails_with_curve():
    with pytest.raises(CertificationFailed) as info:
        certify_super(0.5, ExpShift(1.0, 2.0))
    ts, vals = info.value.curve
    assert len(ts) == len(vals) and vals[-1] > 2 * math.exp(-2) + 0.25


def test_light_tail_super_drift_is_violated():
    # the supermartingale inequality itself fails for large t, not only the sufficient test
    model = ExpShift(1.0, 2.0)
    rep = drift_report("super", 0.5, 10.0, model)
    assert rep.margin < 0
