import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from critrace.flow import (
    FlowError,
    finite_difference_jet,
    flow_jet,
    hamilton_flow,
    hamilton_flow_batch,
    linearized_flow,
    symplectic_matrix,
)
from critrace.symbol import CriticalData, PolySymbol

blocks = st.lists(st.tuples(st.floats(0.2, 3.0), st.sampled_from([1, -1]), st.sampled_from([1, -1])), min_size=1, max_size=3)


@given(blocks, st.floats(-4.0, 4.0))
def test_monodromy_symplectic(bl, t):
    w = np.array([s * a for a, s, _ in bl])
    sigma = np.array([sg for _, _, sg in bl])
    cd = CriticalData(np.zeros(2 * len(bl)), 0.0, w, sigma)
    assert linearized_flow(cd, t).symplectic_defect() <= 1e-12 * max(1.0, np.exp(2 * np.max(np.abs(w)) * abs(t)))


def test_monodromy_matches_integrated_flow(siegel_moser):
    p, cd, _ = siegel_moser
    t, h = 1.3, 1e-6
    M = linearized_flow(cd, t).M
    cols = [(hamilton_flow(p, h * e, t).z - hamilton_flow(p, -h * e, t).z) / (2 * h) for e in np.eye(4)]
    assert np.allclose(np.array(cols).T, M, atol=1e-6)


def test_example1_total_period_identity(example1):
    _, cd, period = example1
    assert np.allclose(linearized_flow(cd, period.T).M, np.eye(4), atol=1e-14)


def test_energy_conserved(siegel_moser):
    p, _, _ = siegel_moser
    res = hamilton_flow_batch(p, 0.1 * np.random.default_rng(0).normal(size=(5, 4)), 6.0)
    assert res.energy_ok


def test_escape_raises():
    p = PolySymbol(1, {(0, 2): 0.5, (3, 0): -1.0})  # dx/dt = xi, dxi/dt = 3 x^2
    with pytest.raises(FlowError):
        hamilton_flow(p, [1.0, 1.0], 50.0, box=10.0)


def test_jet_symmetric_in_inputs(siegel_moser):
    p, cd, _ = siegel_moser
    T = flow_jet(p, cd, 3, 1.0).tensor
    assert np.allclose(T, T.transpose(0, 2, 1, 3))
    assert np.allclose(T, T.transpose(0, 1, 3, 2))


@pytest.mark.parametrize("k", [2, 3])
def test_jet_matches_finite_difference(siegel_moser, k):
    p, cd, _ = siegel_moser
    v = np.array([0.3, -0.5, 0.8, 0.1])
    jet = flow_jet(p, cd, k, 1.0)
    fd = finite_difference_jet(p, cd.z0.coords, 1.0, v, k)
    ref = jet(*([v] * k))
    assert np.max(np.abs(fd - ref)) <= 1e-4 * max(1.0, np.max(np.abs(ref)))


def test_quadratic_jet_vanishes_for_quartic(example1):
    p, cd, period = example1
    assert flow_jet(p, cd, 2, period.T).is_zero(atol=1e-12)


def test_jet_order_bounds(example1):
    p, cd, _ = example1
    with pytest.raises(ValueError):
        flow_jet(p, cd, 5, 1.0)


def test_symplectic_matrix_shape():
    J = symplectic_matrix(2)
    assert np.array_equal(J @ J, -np.eye(4))
