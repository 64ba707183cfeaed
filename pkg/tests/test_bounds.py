import math

import numpy as np
import pytest

from walktail import (ExpShift, MartingaleCertificate, ParetoShift, WeibullShift,
                      asymp_Mtau, build_bound_table, canonical_pareto, choose_r, fkz_lower_bound,
                      lower_bound_M, lower_bound_Mtau, lundberg, upper_bound_M,
                      upper_bound_Mtau, veraverbecke)
from walktail import bounds as bd
from walktail.errors import DomainError, NoExponentError, ParameterError, SearchFailed

PARETO = canonical_pareto()


def cert(kind, R, eps=0.5, model=PARETO):
    a = model.tail_moments().a
    c = a + eps if kind == "sub" else a - eps
    return MartingaleCertificate(kind=kind, epsilon=eps, R=R, t_max=1e3, n_grid=512,
                                 tolerance=1e-9, min_margin=0.0, R1=R, R2=R, c=c,
                                 r_c=0.0, model=model.to_dict())


SUB10 = cert("sub", 10.0)
SUPER = cert("super", 3.0)


def fs(x):
    return (2.5 + x) ** -2 / 2


def test_veraverbecke():
    assert veraverbecke(2.5, PARETO) == pytest.approx(0.02, rel=1e-14)
    assert veraverbecke(22.5, PARETO) == pytest.approx(8e-4, rel=1e-14)
    with pytest.raises(DomainError):
        veraverbecke(-1.0, PARETO)


def test_veraverbecke_unit_ratio():
    # small drift, so Fs(x) = a has a positive root
    model = ParetoShift(1.5, 1.0, 2.2)
    a = model.tail_moments().a
    lo, hi = 0.0, 1e3
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if model.integrated_tail(mid) > a else (lo, mid)
    assert veraverbecke(hi, model) == pytest.approx(1.0, rel=1e-9)


def test_lower_bound_M():
    assert lower_bound_M(10.0, SUB10) == pytest.approx(22.5**-2 / 3, rel=1e-14)
    assert lower_bound_M(10.0, SUB10) == pytest.approx(6.584e-4, rel=1e-3)
    assert lower_bound_M(1e8, SUB10) < 1e-16
    with pytest.raises(ParameterError):
        lower_bound_M(10.0, SUPER)
    with pytest.raises(DomainError):
        lower_bound_M(0.0, SUB10)


def test_fkz():
    assert fkz_lower_bound(2.5, PARETO) == pytest.approx(0.02 / 1.02, rel=1e-14)
    xs = np.linspace(0.01, 100, 300)
    for x in xs:
        assert fkz_lower_bound(x, PARETO) >= fs(x) / 1.08
        assert fkz_lower_bound(x, PARETO) >= lower_bound_M(x, SUB10)
    assert fkz_lower_bound(1e6, PARETO) / veraverbecke(1e6, PARETO) == pytest.approx(1.0)


def test_choose_r():
    grid = [0.0, 0.5, 1.0, 2.0, 4.0]
    assert choose_r(SUPER, lambda r: 0.0, r_grid=grid) == 0.0
    with pytest.raises(SearchFailed) as info:
        choose_r(SUPER, lambda r: 1.0, cap=100.0)
    assert info.value.cap == 100.0
    # fs(r) <= fs(3) / 0.5 first holds at r = 5.5 / sqrt(2) - 2.5 ~ 1.39
    assert choose_r(SUPER, fs, r_grid=grid) == 2.0
    with pytest.raises(ParameterError):
        choose_r(SUB10, lambda r: 0.0)


def test_upper_bounds():
    r = 2.0
    x = 3.0 + r + 10.0
    assert upper_bound_M(x, SUPER, r) == pytest.approx(12.5**-2, rel=1e-14)
    assert upper_bound_M(x, SUPER, r) == pytest.approx(6.4e-3, rel=1e-12)
    assert upper_bound_Mtau(x, SUPER, r, 1.13) == pytest.approx(2 * 1.13 * 12.5**-3,
                                                                 rel=1e-14)
    assert upper_bound_Mtau(x, SUPER, r, 0.0) == 0.0
    vals = [upper_bound_Mtau(v, SUPER, r, 1.1) for v in np.linspace(5.5, 80, 50)]
    assert np.all(np.diff(vals) <= 0)
    for f in (lambda: upper_bound_M(5.0, SUPER, r),
              lambda: upper_bound_Mtau(4.0, SUPER, r, 1.0)):
        with pytest.raises(DomainError):
            f()


def test_upper_bound_clamped():
    assert upper_bound_M(3.0001, cert("super", 3.0, eps=0.99), 0.0) == 1.0


def test_lower_bound_Mtau():
    assert lower_bound_Mtau(5.0, SUB10, np.full(10, -1e-14)) == pytest.approx(0, abs=1e-14)
    val = lower_bound_Mtau(5.0, SUB10, [-1.0])
    assert val * 1.5 == pytest.approx(fs(15.0) - fs(16.0), rel=1e-12)
    with pytest.raises(ParameterError):
        lower_bound_Mtau(5.0, SUB10, [])


def test_asymp_Mtau():
    assert asymp_Mtau(15.0, PARETO, 1.127) == pytest.approx(1.127 * 17.5**-3)
    assert asymp_Mtau(15.0, PARETO, 1.0) == PARETO.tail(15.0)
    with pytest.raises(ParameterError):
        asymp_Mtau(1.0, PARETO, 0.0)


def test_eq0_ratio_single_sample():
    # one cycle with S_tau = -1: (Fs(x) - Fs(x+1)) / Fbar(x)
    assert bd.eq0_ratio(4.0, PARETO, [-1.0]) == pytest.approx(
        (fs(4.0) - fs(5.0)) / 6.5**-3, rel=1e-12)


def _bisect(f, lo, hi):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) < 0 else (lo, mid)
    return 0.5 * (lo + hi)


def test_lundberg_exponential():
    base = lundberg(ExpShift(1.0, 2.0))
    h_ref = _bisect(lambda h: math.exp(-2 * h) - (1 - h), 1e-6, 1 - 1e-12)
    assert base.h0 == pytest.approx(h_ref, abs=1e-12)
    assert base.h0 == pytest.approx(0.7968, abs=1e-4)
    assert base.residual < 1e-12
    assert base.doob(0.0) == 1.0
    assert base.local_prefactor is None


def test_lundberg_weibull_light():
    model = WeibullShift(2.0, 1.0, 1.2)
    base = lundberg(model)
    assert base.residual < 1e-12
    ref = _bisect(lambda h: model.mgf(h) - 1, 1e-3, 20.0)
    assert base.h0 == pytest.approx(ref, rel=1e-9)


def test_lundberg_heavy_raises():
    with pytest.raises(NoExponentError):
        lundberg(PARETO)
    with pytest.raises(NoExponentError):
        lundberg(WeibullShift(0.5, 1.0, 3.0))


def test_lundberg_with_samples():
    base = lundberg(ExpShift(1.0, 2.0), np.array([0.0, -1.0, -2.0]))
    expected = np.mean(np.exp(base.h0 * np.array([0.0, -1.0, -2.0])))
    assert base.exp_moment_Stau == pytest.approx(expected)
    assert base.local_prefactor == pytest.approx(1 - expected)


def _table(**kw):
    args = dict(model=PARETO, x_grid=[2.0, 5.0, 10.0, 20.0], sub_cert=cert("sub", 1e-3),
                super_cert=SUPER, r=2.0, tau_interval=(1.12, 1.13), tau_mean=1.125,
                stau_samples=-np.linspace(0.01, 3, 100))
    args.update(kw)
    return build_bound_table(**args)


def test_bound_table():
    table = _table()
    assert table.violations() == []
    first, last = table.rows[0], table.rows[-1]
    assert first["upper_M"] is None and first["notes"] == "upper:x_le_R_plus_r"
    assert last["notes"] == "" and all(last[k] is not None for k in bd.COLUMNS)
    for row in table.rows:
        for k in bd.COLUMNS[1:]:
            assert row[k] is None or 0 <= row[k] <= 1
    assert "h0" not in table.columns


def test_bound_table_missing_upper_inputs():
    assert _table(super_cert=None).rows[-1]["notes"] == "upper:no_super_certificate"
    assert _table(r=None).rows[-1]["notes"] == "upper:no_r_found"


def test_bound_table_csv(tmp_path):
    model = ExpShift(1.0, 2.0)
    table = _table(model=model, sub_cert=cert("sub", 1e-3, model=model),
                   super_cert=None, lundberg_baseline=lundberg(model))
    path = tmp_path / "b.csv"
    table.write_csv(path)
    raw = path.read_bytes()
    assert raw.count(b"\r\n") == 5
    header = raw.split(b"\r\n")[0].decode().split(",")
    assert header[-3:] == ["h0", "doob", "notes"]
