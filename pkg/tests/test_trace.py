import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from critrace.flow import flow_jet
from critrace.periods import find_periods
from critrace.rk_cone import rk_from_jet
from critrace.symbol import CriticalData
from critrace.trace import (
    BranchError,
    DegeneracyError,
    TestFunction,
    amplitude_at_period,
    degeneracy_order,
    det_factor,
    mu_k_corrected,
    mu_k_statement,
    regularized_ratio,
    theorem1,
    theorem1_constant,
    theorem2,
    trace_exponent,
)


@pytest.fixture(scope="module")
def example1_report(example1):
    p, cd, period = example1
    R = rk_from_jet(flow_jet(p, cd, 3, period.T), period)
    return R, theorem2(cd, period, R, TestFunction(period.T, 0.5), N_cone=200000, seed=0)


def test_ratio_is_one_at_full_return(example1):
    _, cd, period = example1
    assert regularized_ratio(cd, period.T, period.T) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("dt", [1e-3, -2e-3, 0.05, -0.2])
def test_ratio_matches_quotient_off_the_period(example1, dt):
    _, cd, period = example1
    t = period.T + dt
    quotient = abs(dt) ** period.d_T / det_factor(cd, t)
    assert regularized_ratio(cd, period.T, t) == pytest.approx(quotient, rel=1e-9)


def test_hyperbolic_factor_positive_and_degenerate_at_zero():
    cd = CriticalData([0, 0, 0, 0], 0.0, [1.0, 0.7], [1, -1])
    ts = np.linspace(0.1, 6.0, 25)
    assert np.all(np.array([det_factor(cd, t) for t in ts]) > 0)
    assert degeneracy_order(cd, 2 * np.pi) == 1
    assert degeneracy_order(cd, 1.0) == 0
    with pytest.raises(DegeneracyError):
        regularized_ratio(cd, 2 * np.pi, np.array([0.0, 1.0]))


def test_ratio_rejects_higher_degeneracy_inside_range():
    cd = CriticalData([0, 0, 0, 0], 0.0, [1.0, 2.0], [1, 1])
    # around pi only the second block returns; the first one returns at 2 pi
    with pytest.raises(DegeneracyError):
        regularized_ratio(cd, np.pi, np.array([np.pi, 2 * np.pi]))


def test_definite_constant_single_block():
    assert theorem1_constant(1, 0, 4.0, 1) == pytest.approx(-0.25)


@given(d=st.integers(1, 4), sgn=st.integers(-4, 4), det=st.floats(0.1, 10.0), s=st.sampled_from([-1, 1]))
def test_definite_constant_modulus_and_phase(d, sgn, det, s):
    C = theorem1_constant(d, sgn, det, s)
    assert abs(C) == pytest.approx(0.5 * math.gamma(d) / math.sqrt(det), rel=1e-12)
    expected = -np.exp(1j * np.pi * (sgn / 4 + (d - 1) * s / 2))
    assert C / abs(C) == pytest.approx(expected, abs=1e-12)


def _eps_pairing(f, T, lo, hi, eps):
    re = integrate.quad(lambda t: f(t) * (t - T) / ((t - T) ** 2 + eps**2), lo, hi, points=[T], limit=500)[0]
    im = integrate.quad(lambda t: f(t) * eps / ((t - T) ** 2 + eps**2), lo, hi, points=[T], limit=500)[0]
    return re + 1j * im


def test_definite_pairing_matches_eps_oracle(definite):
    _, cd = definite
    period = find_periods(cd, 1.0, 7.0)[0]
    assert period.d_T == 1 and period.cls == "positive-definite"
    phi = TestFunction(period.T, 0.5)
    rep = theorem1(cd, period, phi)
    lo, hi = phi.support

    def f(t):
        t = np.array([t])
        return float(regularized_ratio(cd, period.T, t, check=False)[0] * phi.phihat(t)[0])

    v1 = _eps_pairing(f, period.T, lo, hi, 2e-3)
    v2 = _eps_pairing(f, period.T, lo, hi, 1e-3)
    oracle = (2 * v2 - v1) / (2 * np.pi) ** 2
    assert abs(rep.Lambda_T - oracle) < 1e-5 * abs(oracle)
    assert rep.exponent == 0
    assert rep.C_T == pytest.approx(-0.5j, abs=1e-12)


def test_definite_pairing_is_linear_in_phi(definite):
    _, cd = definite
    period = find_periods(cd, 1.0, 7.0)[0]
    a = theorem1(cd, period, TestFunction(period.T, 0.5))
    b = theorem1(cd, period, TestFunction(period.T, 0.5, height=-2.5))
    assert b.Lambda_T == pytest.approx(-2.5 * a.Lambda_T, rel=1e-10)


def test_example1_exponent_and_constants(example1, example1_report):
    _, cd, period = example1
    _, rep = example1_report
    assert period.d_T == 2 and period.is_total
    assert rep.exponent == Fraction(-1, 2)
    assert rep.mu_k == pytest.approx(-0.25 * math.gamma(0.5) / (2 * np.pi) ** 3, rel=1e-12)
    assert rep.mu_k_corrected == pytest.approx(-2 * np.pi * rep.mu_k, rel=1e-12)
    assert rep.flags["cone_intersection"] == "empty"
    assert rep.gamma_candidates["gamma((n-2)/k)"]["value"] is None


def test_example1_cone_factor(example1_report):
    _, rep = example1_report
    exact = 2 * math.sqrt(2) * math.pi**1.5
    value = complex(*rep.cone["value"])
    assert abs(value - exact) < max(3 * rep.cone["stderr"], 0.01 * exact)
    # the negative sign pattern rotates the cone integral by exp(-i pi / 4)
    ratio = rep.K_T / (rep.mu_k * value)
    assert ratio == pytest.approx(np.exp(-1j * np.pi / 4), abs=1e-12)
    assert abs(rep.K_T_corrected) == pytest.approx(math.sqrt(2) / 8, rel=0.01)


def test_seed_invariance_within_standard_errors(example1, example1_report):
    _, cd, period = example1
    R, rep0 = example1_report
    rep1 = theorem2(cd, period, R, TestFunction(period.T, 0.5), N_cone=200000, seed=7)
    v0, v1 = complex(*rep0.cone["value"]), complex(*rep1.cone["value"])
    se = math.hypot(rep0.cone["stderr"], rep1.cone["stderr"])
    assert abs(v0 - v1) < 3 * se


def test_leading_value_is_linear_in_phi(example1, example1_report):
    _, cd, period = example1
    R, rep = example1_report
    scaled = theorem2(cd, period, R, TestFunction(period.T, 0.5, height=3.0), N_cone=200000, seed=0)
    h = np.array([0.01, 0.001])
    assert np.allclose(scaled.leading_value(h), 3.0 * rep.leading_value(h), rtol=1e-12)
    assert np.allclose(rep.leading_value(h), rep.K_T * h**-0.5, rtol=1e-12)


def test_branches_are_exclusive(example1, definite):
    _, cd, period = example1
    with pytest.raises(BranchError):
        theorem1(cd, period, TestFunction(period.T, 0.5))
    _, cdd = definite
    pd = find_periods(cdd, 1.0, 7.0)[0]
    with pytest.raises(BranchError):
        theorem2(cdd, pd, None, TestFunction(pd.T, 0.5))


def test_support_must_isolate_the_period(example1, example1_report):
    _, cd, period = example1
    R, _ = example1_report
    with pytest.raises(DegeneracyError):
        theorem2(cd, period, R, TestFunction(period.T, 7.0), N_cone=1000)
    with pytest.raises(ValueError):
        theorem2(cd, period, R, TestFunction(period.T + 1.0, 0.5), N_cone=1000)


def test_exponent_values():
    assert trace_exponent(2, 4) == Fraction(-1, 2)
    assert trace_exponent(2, 3) == Fraction(-1, 3)
    assert trace_exponent(1, 3) == 0


def test_gamma_pole_reported_as_infinite():
    assert not np.isfinite(abs(mu_k_statement(4, 2, 0, 1.0, gamma_arg=0.0)))
    assert mu_k_corrected(4, 2, 0, 1.0) == pytest.approx(-2 * np.pi * mu_k_statement(4, 2, 0, 1.0))


def test_amplitude_at_period():
    phi = TestFunction(2 * np.pi, 0.5, height=2.0)
    assert amplitude_at_period(0.0, phi, 2 * np.pi) == pytest.approx(2.0)
    assert amplitude_at_period(0.5, phi, 2 * np.pi) == pytest.approx(2.0 * np.exp(1j * np.pi))
    assert amplitude_at_period(0.0, phi, 2 * np.pi + 0.6) == 0


def test_phi_table_matches_direct_quadrature():
    phi = TestFunction(2 * np.pi, 0.5)
    s = np.linspace(-59.0, 59.0, 1001)
    assert np.max(np.abs(phi.phi(s) - phi.phi_direct(s))) < 1e-9


def test_phi_inverts_to_phihat():
    phi = TestFunction(2 * np.pi, 0.5)
    s = np.linspace(-400.0, 400.0, 400001)
    vals = phi.phi(s)
    for t in (2 * np.pi, 2 * np.pi + 0.2, 2 * np.pi + 0.7):
        back = integrate.simpson(vals * np.exp(-1j * s * t), x=s)
        assert abs(back - phi.phihat(t)) < 1e-6


@pytest.mark.parametrize("N", [0, 1, 2, 3, 4])
def test_phi_decays_faster_than_powers(N):
    phi = TestFunction(2 * np.pi, 0.5)
    s = np.array([300.0, 600.0, 1200.0, 2400.0])
    weighted = s**N * np.abs(phi.phi(s))
    assert np.all(np.diff(weighted) < 0)


def test_test_function_validation():
    with pytest.raises(ValueError):
        TestFunction(1.0, 0.0)


@given(d=st.integers(1, 5), sgn=st.integers(-6, 6), det=st.floats(0.1, 10.0))
def test_positive_definite_constant_phase(d, sgn, det):
    C = theorem1_constant(d, sgn, det, 2 * d)
    symbolic = np.exp(1j * np.pi * (d - 1) * d) * np.exp(1j * np.pi * sgn / 4)
    assert -C / abs(C) == pytest.approx(symbolic, abs=1e-12)
    assert abs(C) * math.sqrt(det) == pytest.approx(0.5 * math.gamma(d))
