"""Hot numerical kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``CRITRACE_DISABLE_NUMBA`` is unset (or set to ``0``).  Both paths
are always importable under explicit names (``*_numba`` / ``*_numpy``) so the
parity tests and the benchmark can exercise them side by side.

Kernels
-------
poly_eval
    Evaluate a sparse polynomial at many points.
circle_bands
    Thin-shell band geometry of a quadratic form along great circles.
l1_sphere
    Enumerate integer vectors with a prescribed l1 norm.
hermite_eval
    Cubic Hermite interpolation on a uniform grid.
"""

from __future__ import annotations

import itertools
import math
import os

import numpy as np

_FLAG = "CRITRACE_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in ("", "0", "false", "no")


try:  # optional accelerator
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _numba_requested()


def _njit(fn):
    if not HAVE_NUMBA:
        return fn
    return _numba.njit(cache=True)(fn)


# ---------------------------------------------------------------------------
# polynomial evaluation
# ---------------------------------------------------------------------------


def _poly_eval_loop(exps, coefs, pts):
    npts, dim = pts.shape
    nterms = exps.shape[0]
    out = np.zeros(npts)
    for p in range(npts):
        acc = 0.0
        for t in range(nterms):
            term = coefs[t]
            for i in range(dim):
                e = exps[t, i]
                if e:
                    x = pts[p, i]
                    v = 1.0
                    for _ in range(e):
                        v *= x
                    term *= v
            acc += term
        out[p] = acc
    return out


poly_eval_numba = _njit(_poly_eval_loop)


def poly_eval_numpy(exps, coefs, pts):
    if exps.shape[0] == 0:
        return np.zeros(pts.shape[0])
    mono = np.ones((pts.shape[0], exps.shape[0]))
    for i in range(pts.shape[1]):
        col = exps[:, i]
        if np.any(col):
            mono *= pts[:, i : i + 1] ** col[None, :]
    return mono @ coefs


# ---------------------------------------------------------------------------
# great-circle thin-shell bands
# ---------------------------------------------------------------------------


def _circle_bands_loop(qa, qb, bab, delta):
    # Along theta(phi) = a cos(phi) + b sin(phi) the form reads
    # g = c + rho cos(u), u = 2 phi - psi.  Per circle return the u-length of
    # one band component in [0, pi], a representative u in that component
    # (the root when it exists, else the nearest extremum) and a root flag.
    m = qa.shape[0]
    length = np.zeros(m)
    ustar = np.zeros(m)
    psi = np.zeros(m)
    root = np.zeros(m, dtype=np.bool_)
    for i in range(m):
        c = 0.5 * (qa[i] + qb[i])
        a = 0.5 * (qa[i] - qb[i])
        b = bab[i]
        rho = math.hypot(a, b)
        psi[i] = np.arctan2(b, a)
        if rho == 0.0:
            continue
        lo = (-delta - c) / rho
        hi = (delta - c) / rho
        if lo >= 1.0 or hi <= -1.0:
            continue
        if hi > 1.0:
            hi = 1.0
        if lo < -1.0:
            lo = -1.0
        a1 = np.arccos(hi)
        a2 = np.arccos(lo)
        length[i] = a2 - a1
        x = -c / rho
        if -1.0 < x < 1.0:
            ustar[i] = np.arccos(x)
            root[i] = True
        elif x >= 1.0:
            ustar[i] = 0.0
        else:
            ustar[i] = np.pi
    return length, ustar, psi, root


circle_bands_numba = _njit(_circle_bands_loop)


def circle_bands_numpy(qa, qb, bab, delta):
    c = 0.5 * (qa + qb)
    a = 0.5 * (qa - qb)
    rho = np.hypot(a, bab)
    psi = np.arctan2(bab, a)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lo = (-delta - c) / rho
        hi = (delta - c) / rho
        x = -c / rho
    live = (rho > 0) & (lo < 1.0) & (hi > -1.0)
    a1 = np.arccos(np.clip(np.where(live, hi, 1.0), -1.0, 1.0))
    a2 = np.arccos(np.clip(np.where(live, lo, 1.0), -1.0, 1.0))
    length = np.where(live, a2 - a1, 0.0)
    root = live & (x > -1.0) & (x < 1.0)
    ustar = np.where(root, np.arccos(np.clip(np.where(root, x, 0.0), -1, 1)), 0.0)
    ustar = np.where(live & ~root & (x < 0), np.pi, ustar)
    return length, ustar, psi, root


# ---------------------------------------------------------------------------
# integer vectors of fixed l1 norm
# ---------------------------------------------------------------------------


def _count_l1(dim, l):
    # number of integer vectors in Z^dim with l1 norm exactly l
    from math import comb

    if l == 0:
        return 1
    return sum(comb(dim, j) * (2**j) * comb(l - 1, j - 1) for j in range(1, min(dim, l) + 1))


def _l1_fill(dim, l, out):
    # iterative depth-first enumeration in lexicographic order of
    # (entry_0, entry_1, ...) from -l to l
    cur = np.zeros(dim, dtype=np.int64)
    rem = np.zeros(dim + 1, dtype=np.int64)
    rem[0] = l
    row = 0
    pos = 0
    cur[0] = -l - 1
    while pos >= 0:
        if pos == dim - 1:
            r = rem[pos]
            if r == 0:
                cur[pos] = 0
                for j in range(dim):
                    out[row, j] = cur[j]
                row += 1
            else:
                cur[pos] = -r
                for j in range(dim):
                    out[row, j] = cur[j]
                row += 1
                cur[pos] = r
                for j in range(dim):
                    out[row, j] = cur[j]
                row += 1
            pos -= 1
            continue
        cur[pos] += 1
        if cur[pos] > rem[pos]:
            pos -= 1
            continue
        rem[pos + 1] = rem[pos] - abs(cur[pos])
        pos += 1
        if pos < dim - 1:
            cur[pos] = -rem[pos] - 1
    return row


_l1_fill_numba = _njit(_l1_fill)


def l1_sphere_numba(dim, l):
    out = np.zeros((_count_l1(dim, l), dim), dtype=np.int64)
    _l1_fill_numba(dim, l, out)
    return out


def l1_sphere_numpy(dim, l):
    rows = []
    for vec in itertools.product(range(-l, l + 1), repeat=dim):
        if sum(abs(v) for v in vec) == l:
            rows.append(vec)
    return np.array(rows, dtype=np.int64).reshape(-1, dim)


# ---------------------------------------------------------------------------
# cubic Hermite interpolation on a uniform grid
# ---------------------------------------------------------------------------


def _hermite_loop(x0, dx, vals, ders, xq):
    n = vals.shape[0]
    out = np.zeros(xq.shape[0], dtype=vals.dtype)
    for i in range(xq.shape[0]):
        s = (xq[i] - x0) / dx
        # grid endpoints may be off by rounding in s
        if s < -1e-9 or s > n - 1 + 1e-9:
            continue
        j = int(s)
        if j >= n - 1:
            j = n - 2
        u = s - j
        u2 = u * u
        u3 = u2 * u
        h00 = 2 * u3 - 3 * u2 + 1
        h10 = u3 - 2 * u2 + u
        h01 = -2 * u3 + 3 * u2
        h11 = u3 - u2
        out[i] = h00 * vals[j] + h10 * dx * ders[j] + h01 * vals[j + 1] + h11 * dx * ders[j + 1]
    return out


hermite_eval_numba = _njit(_hermite_loop)


def hermite_eval_numpy(x0, dx, vals, ders, xq):
    n = vals.shape[0]
    s = (xq - x0) / dx
    inside = (s >= -1e-9) & (s <= n - 1 + 1e-9)
    j = np.clip(np.floor(s).astype(np.int64), 0, n - 2)
    u = s - j
    u2, u3 = u * u, u * u * u
    out = (
        (2 * u3 - 3 * u2 + 1) * vals[j]
        + (u3 - 2 * u2 + u) * dx * ders[j]
        + (-2 * u3 + 3 * u2) * vals[j + 1]
        + (u3 - u2) * dx * ders[j + 1]
    )
    return np.where(inside, out, 0)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def poly_eval(exps, coefs, pts):
    """Evaluate ``sum_t coefs[t] * prod_i pts[:, i] ** exps[t, i]``."""
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    coefs = np.ascontiguousarray(coefs, dtype=np.float64)
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if USE_NUMBA:
        return poly_eval_numba(exps, coefs, pts)
    return poly_eval_numpy(exps, coefs, pts)


def circle_bands(qa, qb, bab, delta):
    """Band geometry ``(length, ustar, psi, has_root)`` per great circle."""
    args = [np.ascontiguousarray(v, dtype=np.float64) for v in (qa, qb, bab)]
    if USE_NUMBA:
        return circle_bands_numba(*args, float(delta))
    return circle_bands_numpy(*args, float(delta))


def l1_sphere(dim, l):
    """All vectors of ``Z^dim`` with l1 norm ``l`` as an ``(K, dim)`` array."""
    if USE_NUMBA:
        return l1_sphere_numba(int(dim), int(l))
    return l1_sphere_numpy(int(dim), int(l))


def hermite_eval(x0, dx, vals, ders, xq):
    """Cubic Hermite interpolant on the grid ``x0 + dx * arange(len(vals))``.

    Queries outside the grid evaluate to zero.
    """
    xq = np.ascontiguousarray(xq, dtype=np.float64)
    if USE_NUMBA:
        return hermite_eval_numba(float(x0), float(dx), vals, ders, xq)
    return hermite_eval_numpy(float(x0), float(dx), vals, ders, xq)
