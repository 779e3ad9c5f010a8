import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from critrace import _kernels as K

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")

finite = st.floats(-3.0, 3.0, allow_nan=False)


@needs_numba
@given(
    exps=hnp.arrays(np.int64, st.tuples(st.integers(0, 6), st.just(4)), elements=st.integers(0, 4)),
    pts=hnp.arrays(np.float64, st.tuples(st.integers(1, 20), st.just(4)), elements=finite),
    data=st.data(),
)
def test_poly_eval_parity(exps, pts, data):
    coefs = data.draw(hnp.arrays(np.float64, exps.shape[0], elements=finite))
    a = K.poly_eval_numba(exps, coefs, pts)
    b = K.poly_eval_numpy(exps, coefs, pts)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-10)


@needs_numba
@given(
    arrs=hnp.arrays(np.float64, st.tuples(st.just(3), st.integers(1, 30)), elements=finite),
    delta=st.floats(1e-4, 0.5),
)
def test_circle_bands_parity(arrs, delta):
    qa, qb, bab = (np.ascontiguousarray(r) for r in arrs)
    for x, y in zip(K.circle_bands_numba(qa, qb, bab, delta), K.circle_bands_numpy(qa, qb, bab, delta)):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-12)


@needs_numba
@pytest.mark.parametrize("dim,l", [(1, 0), (1, 3), (2, 4), (3, 3), (4, 2), (4, 5)])
def test_l1_sphere_parity(dim, l):
    a = K.l1_sphere_numba(dim, l)
    b = K.l1_sphere_numpy(dim, l)
    assert a.shape == b.shape
    assert np.array_equal(np.unique(a, axis=0), np.unique(b, axis=0))
    assert np.all(np.abs(a).sum(axis=1) == l)


@needs_numba
@given(
    vals=hnp.arrays(np.complex128, st.integers(2, 40), elements=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)),
    xq=hnp.arrays(np.float64, st.integers(1, 40), elements=st.floats(-1.0, 50.0)),
    data=st.data(),
)
def test_hermite_parity(vals, xq, data):
    ders = data.draw(hnp.arrays(np.complex128, vals.shape[0], elements=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)))
    a = K.hermite_eval_numba(0.0, 0.5, vals, ders, xq)
    b = K.hermite_eval_numpy(0.0, 0.5, vals, ders, xq)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_hermite_reproduces_cubics():
    x = np.linspace(-1, 2, 31)
    f = lambda s: 2 * s**3 - s + 1
    df = lambda s: 6 * s**2 - 1
    xq = np.linspace(-1, 2, 301)
    out = K.hermite_eval(x[0], x[1] - x[0], f(x).astype(complex), df(x).astype(complex), xq)
    assert np.allclose(out, f(xq), atol=1e-12)


def test_disable_flag_selects_numpy_path():
    env = dict(os.environ, CRITRACE_DISABLE_NUMBA="1")
    code = "from critrace import _kernels as K; print(K.USE_NUMBA)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
