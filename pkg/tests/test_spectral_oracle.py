import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from critrace.spectral_oracle import (
    WindowError,
    eigenvalue_rule,
    gamma_sum,
    h_sweep,
    model_spectrum,
    stroboscopic_h_grid,
    verify_eigenvalue_rule,
)
from critrace.trace import TestFunction


def test_ground_state_at_unit_h():
    assert eigenvalue_rule(0, 0, 1.0) == pytest.approx(2.0)


@given(n1=st.integers(0, 500), n2=st.integers(0, 500), h=st.floats(1e-3, 1.0))
def test_first_ladder_is_uniform(n1, n2, h):
    step = eigenvalue_rule(n1 + 1, n2, h) - eigenvalue_rule(n1, n2, h)
    assert step == pytest.approx(h, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("h", [0.05, 0.1, 1.0])
def test_rule_matches_truncated_weyl_operator(h):
    assert verify_eigenvalue_rule(h, n_max=20) < 1e-10


@pytest.mark.parametrize("h,eps", [(0.05, 0.3), (0.02, 0.1), (0.01, 0.06)])
def test_window_matches_brute_force_enumeration(h, eps):
    spec = model_spectrum(h, eps=eps)
    n1, n2 = np.meshgrid(np.arange(4 * int(1 / h) + 200), np.arange(int(1 / h) + 50), indexing="ij")
    lam = eigenvalue_rule(n1, n2, h)
    inside = np.abs(lam) <= eps
    assert len(spec) == int(inside.sum())
    assert np.allclose(np.sort(spec.eigenvalues), np.sort(lam[inside]))


def test_state_count_grows_like_inverse_h_squared():
    c1 = len(model_spectrum(0.02, eps=0.06))
    c2 = len(model_spectrum(0.01, eps=0.06))
    assert c2 / c1 == pytest.approx(4.0, rel=0.1)


def test_cutoff_enlargement_does_not_change_window():
    spec = model_spectrum(0.02, eps=0.1)
    big = model_spectrum(0.02, cutoffs=(spec.cutoffs[0] + 60, spec.cutoffs[1] + 60), eps=0.1)
    assert np.array_equal(np.sort(spec.eigenvalues), np.sort(big.eigenvalues))


def test_small_cutoffs_raise():
    with pytest.raises(WindowError):
        model_spectrum(0.02, cutoffs=(5, 5), eps=0.1)


def test_empty_window_and_zero_test_function():
    phi = TestFunction(2 * np.pi, 0.5)
    empty = model_spectrum(0.02, E_c=-5.0, eps=0.5)
    assert len(empty) == 0
    assert gamma_sum(empty, -5.0, phi, 0.02) == 0
    spec = model_spectrum(0.02, eps=0.1)
    assert gamma_sum(spec, 0.0, TestFunction(2 * np.pi, 0.5, height=0.0), 0.02) == 0


def test_gamma_sum_rejects_mismatched_spectrum():
    spec = model_spectrum(0.02, eps=0.1)
    with pytest.raises(WindowError):
        gamma_sum(spec, 0.0, TestFunction(2 * np.pi, 0.5), 0.03)


def test_gamma_sum_is_linear_in_phi():
    spec = model_spectrum(0.02, eps=0.3)
    g1 = gamma_sum(spec, 0.0, TestFunction(2 * np.pi, 0.5), 0.02)
    g2 = gamma_sum(spec, 0.0, TestFunction(2 * np.pi, 0.5, height=-1.5), 0.02)
    assert g2 == pytest.approx(-1.5 * g1, rel=1e-12)


def test_stroboscopic_grid():
    hs = stroboscopic_h_grid()
    N = np.rint(1 / hs).astype(int)
    assert N[0] == 50 and N[-1] <= 400
    assert np.all(N % 16 == 50 % 16)
    assert np.all(np.diff(hs) < 0)


def test_sweep_result_shapes():
    phi = TestFunction(2 * np.pi, 0.5)
    hs = stroboscopic_h_grid(h_min=1 / 120, count=3)
    sw = h_sweep(phi, hs, background=lambda h: 0.0)
    assert len(list(sw.rows())) == hs.size
    assert sw.exponent_background == pytest.approx(sw.exponent)
    assert set(sw.as_dict()) >= {"h", "gamma_re", "gamma_im", "exponent", "method"}
