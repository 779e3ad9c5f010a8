import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from critrace.symbol import (
    CriticalData,
    DimensionError,
    PhasePoint,
    PolySymbol,
    derivative_tensor,
    dump_hamiltonian,
    gradient,
    hessian,
    parse_hamiltonian,
    verify_critical,
)


def test_fixtures_verify(example1, siegel_moser, definite):
    for p, cd in (example1[:2], siegel_moser[:2], definite):
        rep = verify_critical(p, cd)
        assert rep.passed, rep.messages


def test_siegel_moser_frequency_signs(siegel_moser):
    p, cd, _ = siegel_moser
    wrong = CriticalData(cd.z0, 0.0, np.array([1.0, 2.0]), np.array([1, 1]))
    assert not verify_critical(p, wrong).passed
    assert verify_critical(p, CriticalData(cd.z0, 0.0, np.array([1.0, -2.0]), np.array([1, 1]))).passed


def test_example1_hessian_blocks(example1):
    p, cd, _ = example1
    assert np.allclose(hessian(p, cd.z0), np.diag([1.0, -1.0, 1.0, -1.0]))
    assert np.allclose(cd.w, [1.0, -1.0])


def test_from_symbol_reads_blocks(siegel_moser):
    p, cd, _ = siegel_moser
    cd2 = CriticalData.from_symbol(p, cd.z0)
    assert np.allclose(cd2.w, cd.w) and np.array_equal(cd2.sigma, cd.sigma)


def test_hyperbolic_block_extraction():
    p = PolySymbol(1, {(2, 0): 1.5, (0, 2): -1.5})
    cd = CriticalData.from_symbol(p, [0.0, 0.0])
    assert cd.sigma[0] == -1 and cd.w[0] == pytest.approx(3.0)


def test_dump_parse_roundtrip(siegel_moser):
    p, cd, _ = siegel_moser
    p2, cd2 = parse_hamiltonian(dump_hamiltonian(p, cd))
    assert p2.terms == p.terms
    assert np.allclose(cd2.w, cd.w)


def test_parse_errors():
    with pytest.raises(ValueError):
        parse_hamiltonian("n 1\nz0 0 0\nterms\n2 0 1\n")  # missing Ec
    with pytest.raises(ValueError):
        parse_hamiltonian("n 1\nz0 0 0\nEc 0\nterms\n2 1\n")
    with pytest.raises(DimensionError):
        PhasePoint([0.0, 1.0, 2.0])


def test_shifted_matches_evaluation(rng):
    p = PolySymbol(1, {(2, 0): 1.0, (1, 2): -0.5, (0, 3): 2.0})
    z0 = np.array([0.3, -0.7])
    q = p.shifted(z0)
    for u in rng.normal(size=(5, 2)):
        assert q(u) == pytest.approx(p(z0 + u), rel=1e-12, abs=1e-12)


exps = st.tuples(*(st.integers(0, 3) for _ in range(4)))
symbols = st.dictionaries(exps, st.floats(-2, 2, allow_nan=False).filter(lambda c: abs(c) > 1e-3), min_size=1, max_size=6)


@given(symbols, st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_gradient_matches_central_difference(terms, z):
    p = PolySymbol(2, terms)
    z = np.array(z)
    g = gradient(p, z)
    h = 1e-5
    fd = np.array([(p(z + h * e) - p(z - h * e)) / (2 * h) for e in np.eye(4)])
    assert np.allclose(g, fd, atol=1e-6 * (1 + np.max(np.abs(g))))


@given(symbols, st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_derivative_tensor_symmetric(terms, z):
    D = derivative_tensor(PolySymbol(2, terms), np.array(z), 3)
    for perm in [(1, 0, 2), (0, 2, 1), (2, 1, 0)]:
        assert np.allclose(D, D.transpose(perm))
