import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from critrace.flow import flow_jet, symplectic_matrix
from critrace.rk_cone import (
    HomogForm,
    HypothesisError,
    check_cone_geometry,
    cone_integral,
    cone_samples,
    rk_from_integral,
    rk_from_jet,
    sphere_area,
)

Q_EX1 = np.diag([0.5, -0.5, 0.5, -0.5])


def _example1_r4():
    q = {(0, 4, 0, 0): 1.0, (0, 2, 0, 2): 2.0, (0, 0, 0, 4): 1.0}
    return HomogForm(4, 4, {a: -2 * math.pi * c for a, c in q.items()})


def _siegel_moser_r3():
    # -pi (2 x1 x2 xi1 + xi2 (x1^2 - xi1^2))
    return HomogForm(3, 4, {(1, 1, 1, 0): -2 * math.pi, (2, 0, 0, 1): -math.pi, (0, 0, 2, 1): math.pi})


def test_example1_r4_both_routes(example1):
    p, cd, period = example1
    Rj = rk_from_jet(flow_jet(p, cd, 3, period.T), period)
    Ri = rk_from_integral(p, cd, period, 4)
    assert Rj.max_coeff_diff(Ri) <= 1e-8
    assert Rj.max_coeff_diff(_example1_r4()) <= 1e-8


def test_siegel_moser_r3_both_routes(siegel_moser):
    p, cd, periods = siegel_moser
    period = periods[1]
    Rj = rk_from_jet(flow_jet(p, cd, 2, period.T), period)
    Ri = rk_from_integral(p, cd, period, 3)
    assert Rj.max_coeff_diff(Ri) <= 1e-8
    assert Rj.max_coeff_diff(_siegel_moser_r3()) <= 1e-8


def _raw_flow(rhs, z, T):
    return solve_ivp(rhs, (0, T), z, method="DOP853", rtol=1e-13, atol=1e-14).y[:, -1]


def test_frozen_r_values_against_direct_integration():
    """Independent check: differentiate a hand-written flow by finite differences."""
    J = symplectic_matrix(2)
    T = 2 * math.pi

    def rhs_sm(_, z):
        x1, x2, p1, p2 = z
        return [p1 + x1 * x2 - p1 * p2, -2 * p2 + 0.5 * (x1**2 - p1**2), -(x1 + p1 * x2 + x1 * p2), -(-2 * x2 + x1 * p1)]

    def rhs_ex(_, z):
        x1, x2, p1, p2 = z
        q = x2**2 + p2**2
        return [p1, -p2 + 4 * q * p2, -x1, x2 - 4 * q * x2]

    v = np.array([0.4, -0.9, 0.7, 0.3])
    h = 1e-3
    f = lambda s: _raw_flow(rhs_sm, s * v, T)
    d2 = (f(h) - 2 * f(0) + f(-h)) / h**2
    assert (v @ J @ d2) / 6 == pytest.approx(_siegel_moser_r3()(v), rel=1e-5)

    g = lambda s: _raw_flow(rhs_ex, s * v, T)
    d3 = lambda e: (g(2 * e) - 2 * g(e) + 2 * g(-e) - g(-2 * e)) / (2 * e**3)
    D = (4 * d3(2e-3) - d3(4e-3)) / 3
    assert (v @ J @ D) / 24 == pytest.approx(_example1_r4()(v), rel=1e-4)


def test_rk_from_jet_rejects_wrong_time(example1):
    p, cd, period = example1
    with pytest.raises(ValueError):
        rk_from_jet(flow_jet(p, cd, 3, 1.0), period)


def test_rk_from_integral_requires_vanishing_lower_jets(siegel_moser):
    p, cd, periods = siegel_moser
    with pytest.raises(HypothesisError):
        rk_from_integral(p, cd, periods[1], 4)


coef = st.floats(-3, 3, allow_nan=False)


@given(st.lists(coef, min_size=5, max_size=5), st.floats(0.1, 3.0), st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_homogeneity_and_euler(cs, s, y):
    monos = [(4, 0, 0, 0), (1, 1, 1, 1), (0, 2, 2, 0), (0, 0, 1, 3), (2, 0, 0, 2)]
    R = HomogForm(4, 4, dict(zip(monos, cs)))
    y = np.array(y)
    assert R(s * y) == pytest.approx(s**4 * R(y), rel=1e-10, abs=1e-10)
    assert float(R.gradient(y) @ y) == pytest.approx(4 * R(y), rel=1e-10, abs=1e-10)


def test_from_tensor_matches_contraction(rng):
    T = rng.normal(size=(3, 3, 3))
    R = HomogForm.from_tensor(T)
    y = rng.normal(size=3)
    assert R(y) == pytest.approx(np.einsum("abc,a,b,c", T, y, y, y))


def test_liouville_mass_product_parameterization():
    s = cone_samples(Q_EX1, 400, method="product")
    assert s.deterministic
    assert s.mass == pytest.approx(2 * math.pi**2, rel=1e-12)


def test_liouville_mass_monte_carlo():
    s = cone_samples(Q_EX1, 50000, seed=3)
    m = cone_integral(lambda th: np.ones(len(th)), s)
    assert abs(m.value.real - 2 * math.pi**2) <= 4 * m.stderr + 1e-3
    assert np.max(np.abs(np.einsum("ni,ij,nj->n", s.theta, Q_EX1, s.theta))) < 1e-3


def test_cone_samples_seed_reproducible():
    a = cone_samples(Q_EX1, 2000, seed=5)
    b = cone_samples(Q_EX1, 2000, seed=5)
    assert np.array_equal(a.theta, b.theta) and np.array_equal(a.weights, b.weights)


def test_definite_form_has_empty_cone():
    with pytest.raises(HypothesisError):
        cone_samples(np.eye(4), 100)


def test_signature_one_three_mass():
    # cone of x0^2 - |y|^2 in R^4: two 2-spheres of radius 1/sqrt2, gradient norm sqrt2 (form coeffs 1)
    Q = np.diag([1.0, -1.0, -1.0, -1.0])
    s = cone_samples(Q, 400, method="product")
    expect = sphere_area(1) * sphere_area(3) * (1 / math.sqrt(2)) ** 2 / 2
    assert s.mass == pytest.approx(expect, rel=1e-12)


def test_i0_regularization_phase():
    s = cone_samples(Q_EX1, 400, method="product")
    neg = cone_integral(lambda th: -np.ones(len(th)), s, "i0-power", 0.5)
    pos = cone_integral(lambda th: np.ones(len(th)), s, "i0-power", 0.5)
    assert neg.value == pytest.approx(pos.value * np.exp(-0.5j * math.pi))


def test_geometry_example1_empty_intersection():
    g = check_cone_geometry(Q_EX1, _example1_r4())
    assert g.sign_pattern == "negative" and g.intersection_empty and g.passed
    assert g.r_max == pytest.approx(-math.pi / 2, rel=1e-9)


def test_geometry_siegel_moser_transversal():
    g = check_cone_geometry(Q_EX1, _siegel_moser_r3())
    assert g.sign_pattern == "mixed" and not g.intersection_empty and g.passed
    assert g.zeros.shape[0] > 0 and g.transversality_margin > 1e-3


def test_geometry_tangential_zero_set_fails():
    # R = Q * x1 vanishes on the whole cone: the gradients are parallel there
    R = HomogForm(3, 4, {(3, 0, 0, 0): 0.5, (1, 2, 0, 0): -0.5, (1, 0, 2, 0): 0.5, (1, 0, 0, 2): -0.5})
    assert not check_cone_geometry(Q_EX1, R).passed
