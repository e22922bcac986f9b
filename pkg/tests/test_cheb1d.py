import math

import numpy as np
import pytest

from rbfrank import cheb1d as c1
from rbfrank.errors import (
    ConditioningError,
    DomainError,
    EvaluationError,
    InvalidEllipseError,
    OrderTooLowError,
    SingularityError,
)


def test_constant_profile_coeffs():
    prof = c1.RadialProfile(lambda u: np.full_like(np.asarray(u, dtype=float), 2.5), D=1.3)
    for n in (0, 1, 5):
        a = c1.cheb_fit(prof, n).coeffs
        assert a[0] == pytest.approx(2.5, abs=1e-14)
        assert np.allclose(a[1:], 0, atol=1e-14)


def test_linear_profile_is_t1():
    # f(u) = 2u/D^2 - 1 maps to T_1 on the reference interval
    D = 1.7
    prof = c1.RadialProfile(lambda u: 2 * np.asarray(u) / D**2 - 1, D=D)
    a = c1.cheb_fit(prof, 4).coeffs
    assert np.allclose(a, [0, 1, 0, 0, 0], atol=1e-14)


@pytest.mark.derived
def test_exp_interpolant_dense_grid():
    approx = c1.cheb_fit(c1.gaussian(h=1.0, D=1.0), 10)
    u = np.linspace(0, 1, 1000)
    assert np.max(np.abs(c1.eval_cheb(approx, u) - np.exp(-u))) <= 1e-10


def test_nonfinite_node_value():
    prof = c1.RadialProfile(lambda u: np.where(np.asarray(u) == 0, np.nan, 1.0), D=1.0)
    with pytest.raises(EvaluationError):
        c1.cheb_fit(prof, 3)


def test_eval_cheb_trivial():
    assert c1.eval_cheb(c1.ChebApprox(np.array([3.0]), 0, 2), 0.7) == 3
    assert c1.eval_cheb(c1.ChebApprox(np.array([0.0, 1.0]), 0, 2), 2.0) == 1


@pytest.mark.derived
def test_eval_cheb_naive_trig_oracle(rng):
    a = rng.standard_normal(12)
    lo, hi = 0.0, 2.3
    approx = c1.ChebApprox(a, lo, hi)
    u = rng.uniform(lo, hi, 100)
    t = np.clip(2 * (u - lo) / (hi - lo) - 1, -1, 1)
    naive = sum(ak * np.cos(k * np.arccos(t)) for k, ak in enumerate(a))
    got = c1.eval_cheb(approx, u)
    assert np.allclose(got, naive, rtol=1e-12, atol=1e-12 * np.abs(a).sum())


def test_eval_cheb_domain():
    approx = c1.ChebApprox(np.array([1.0, 1.0]), 0.0, 1.0)
    c1.eval_cheb(approx, 1.0 + 1e-14)
    with pytest.raises(DomainError):
        c1.eval_cheb(approx, 1.01)


def test_monomialize_constant():
    assert np.allclose(c1.monomialize(c1.ChebApprox(np.array([4.2]), 0, 3)), [4.2])


@pytest.mark.derived
def test_monomialize_t1_by_hand():
    D = 1.5
    b = c1.monomialize(c1.ChebApprox(np.array([0.0, 1.0]), 0.0, D**2))
    assert b[0] == pytest.approx(-1.0)
    assert b[1] == pytest.approx(2 / D**2)


@pytest.mark.derived
def test_monomialize_exp_dense_grid():
    b = c1.monomialize(c1.cheb_fit(c1.gaussian(D=1.0), 12))
    u = np.linspace(0, 1, 1000)
    assert np.max(np.abs(c1.eval_power(b, u) - np.exp(-u))) <= 1e-8


def test_monomialize_cap():
    with pytest.raises(ConditioningError, match="Fourier-Taylor"):
        c1.monomialize(c1.ChebApprox(np.ones(32), 0, 1))


@pytest.mark.parametrize("n", [2, 5, 10, 15, 20])
def test_monomialize_matches_clenshaw(n):
    approx = c1.cheb_fit(c1.gaussian(D=1.0), n)
    b = c1.monomialize(approx)
    u = np.linspace(0, 1, 500)
    ref = c1.eval_cheb(approx, u)
    assert np.max(np.abs(c1.eval_power(b, u) - ref)) <= 1e-9 * np.max(np.abs(ref))


@pytest.mark.derived
def test_bound_analytic_values():
    assert c1.bound_analytic(2, 1, 0) == 2
    assert c1.bound_analytic(2, 1, 3) == pytest.approx(0.25)
    assert c1.bound_analytic(4, 10, 2) == pytest.approx(20 / 48)
    with pytest.raises(InvalidEllipseError):
        c1.bound_analytic(1.0, 1, 2)


def test_bound_analytic_monotone():
    vals = [c1.bound_analytic(3.0, 2.0, n) for n in range(10)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    vals = [c1.bound_analytic(r, 2.0, 3) for r in (1.5, 2, 3, 5)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


@pytest.mark.derived
def test_bound_finite_smooth_values():
    assert c1.bound_finite_smooth(math.pi, 1, 1, 2) == pytest.approx(1.0)
    assert c1.bound_finite_smooth(1, 1, 2, 4) == pytest.approx(2 / (math.pi * 2 * 16))
    assert c1.bound_finite_smooth(1, 2, 1, 5) == pytest.approx(4 * c1.bound_finite_smooth(1, 1, 1, 5))
    with pytest.raises(OrderTooLowError):
        c1.bound_finite_smooth(1, 1, 3, 3)


def test_bound_finite_smooth_monotone():
    vals = [c1.bound_finite_smooth(1, 1, 2, n) for n in range(3, 12)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    vals = [c1.bound_finite_smooth(1, D, 2, 6) for D in (0.5, 1, 2)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_ellipse_bound_constant():
    f = lambda u: np.full(np.shape(u), -3.0 + 0j)
    assert c1.estimate_ellipse_bound(f, (0, 1), 5.0) == pytest.approx(3.0)


@pytest.mark.derived
@pytest.mark.parametrize("R", [1.5, 2.0, 4.0, 10.0])
def test_ellipse_bound_exp_closed_form(R):
    # min Re over the boundary is 1/2 - (R + 1/R)/4 on [0, 1]
    est = c1.estimate_ellipse_bound(lambda u: np.exp(-u), (0, 1), R, samples=1024)
    assert est == pytest.approx(math.exp((R + 1 / R) / 4 - 0.5), rel=1e-12)


def test_ellipse_bound_cauchy_pole():
    f = lambda u: 1 / (1 + u)
    # the pole at u = -1 is reached for rho_sq = 3 + sqrt(8)
    with pytest.raises(SingularityError):
        c1.estimate_ellipse_bound(f, (0, 1), 10.0)
    assert c1.estimate_ellipse_bound(f, (0, 1), 3.0) > 0


@pytest.mark.parametrize("n", [2, 4, 8])
@pytest.mark.parametrize("R", [1.5, 3.0, 8.0])
def test_empirical_bound_validity(n, R):
    prof = c1.gaussian(D=1.0)
    C = c1.estimate_ellipse_bound(prof.f, prof.interval, R)
    err = np.max(np.abs(c1.eval_cheb(c1.cheb_fit(prof, n), np.linspace(0, 1, 2001)) - np.exp(-np.linspace(0, 1, 2001))))
    assert err <= 2 * c1.bound_analytic(R, C, n)


def test_coefficient_decay_sanity():
    prof = c1.gaussian(D=1.0)
    sm = c1.auto_analytic(prof.f, prof.interval, 10)
    a = c1.cheb_fit(prof, 14).coeffs
    k = np.arange(len(a))
    above_noise = np.abs(a) > 1e-14
    bound = 4 * 2 * sm.C * sm.rho_sq ** (-k.astype(float))
    assert np.all(np.abs(a)[above_noise] <= bound[above_noise])


def test_auto_analytic_respects_pole():
    sm = c1.auto_analytic(lambda u: 1 / (1 + u), (0.0, 1.0), 8)
    assert 1 < sm.rho_sq < 3 + math.sqrt(8)


def test_longdouble_fit():
    prof = c1.gaussian(D=1.0)
    approx = c1.cheb_fit(prof, 12, dtype=np.longdouble)
    u = np.linspace(0, 1, 101, dtype=np.longdouble)
    err = np.max(np.abs(c1.eval_cheb(approx, u) - np.exp(-u)))
    assert approx.coeffs.dtype == np.longdouble
    if np.finfo(np.longdouble).eps < 1e-18:
        assert err < 1e-16


def test_smoothness_validation():
    with pytest.raises(InvalidEllipseError):
        c1.Analytic(1.0, 1.0)
    with pytest.raises(OrderTooLowError):
        c1.FiniteSmooth(0, 1.0)
    with pytest.raises(DomainError):
        c1.RadialProfile(np.exp, D=0)


def test_total_variation_diagnostic():
    # TV of d/du e^{-u} on [0,1] is 1 - e^{-1}
    assert c1.total_variation(lambda u: np.exp(-u), 0, 1, 1) == pytest.approx(1 - math.exp(-1), rel=1e-4)
