"""Periods of the linearized flow, fixed spaces, restricted forms and resonances.

For the block normal form an elliptic block ``j`` returns to itself at
``T in (2 pi / |w_j|) Z``; hyperbolic blocks never do for ``T != 0``.  The
fixed space of ``dPhi_T`` is therefore spanned by coordinate vectors of the
returning blocks, which is how it is built here (no numerical kernel).

Commensurability of frequency ratios uses continued-fraction reconstruction
with a denominator cap of ``1e6`` and a residual tolerance of ``1e-9``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .symbol import CriticalData

__all__ = [
    "PeriodRecord",
    "ResonanceSet",
    "rational_approx",
    "exact_rational",
    "find_periods",
    "restrict_forms",
    "resonance_module",
    "pseudo_resonant",
]

DENOM_CAP = 10**6
RESIDUAL_TOL = 1e-9


def _convergents(x: float, cap: int):
    """Continued-fraction convergents ``p/q`` of ``x`` with ``q <= cap``."""
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    r = x
    for _ in range(64):
        a = math.floor(r)
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        if k1 > cap:
            return
        yield Fraction(h1, k1)
        frac = r - a
        if frac <= 1e-300:
            return
        r = 1.0 / frac


def rational_approx(x: float, cap: int = DENOM_CAP, tol: float = RESIDUAL_TOL) -> Fraction | None:
    """First continued-fraction convergent of ``x`` within ``tol``, else ``None``.

    The denominator is capped at ``cap``.  Note that with the default cap,
    quadratic irrationals such as ``sqrt(2)`` admit convergents within
    ``1e-9`` (with denominators of order ``1e4``); callers that need a
    genuinely exact relation use :func:`exact_rational`.
    """
    scale = max(1.0, abs(x))
    for f in _convergents(float(x), cap):
        if abs(float(f) - x) <= tol * scale:
            return f
    return None


def exact_rational(x: float, cap: int = DENOM_CAP) -> Fraction | None:
    """Rational reconstruction that also reproduces ``x`` to float rounding."""
    f = rational_approx(x, cap)
    if f is not None and abs(float(f) - x) <= 64 * np.finfo(float).eps * max(1.0, abs(x)):
        return f
    return None


@dataclass
class PeriodRecord:
    """A period ``T`` of ``dPhi_t(z0)`` and the data attached to it.

    ``Q_T`` is the matrix of the quadratic form ``p_2`` restricted to the
    fixed space in the coordinates of ``F_basis`` (so ``Q_T(y) = y^T Q_T y``).
    ``q_T`` is the Hessian of ``p`` restricted to the complement, i.e. twice
    the matrix of ``p_2`` there.
    """

    T: float
    blocks: tuple
    F_basis: np.ndarray
    d_T: int
    is_total: bool
    complement_basis: np.ndarray | None = None
    Q_T: np.ndarray | None = None
    q_T: np.ndarray | None = None
    cls: str | None = None
    sgn_qT: int | None = None
    sign_QT: int | None = None
    det_qT: float | None = None
    flags: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "T": self.T,
            "blocks": list(self.blocks),
            "d_T": self.d_T,
            "is_total": self.is_total,
            "Q_T": None if self.Q_T is None else self.Q_T.tolist(),
            "q_T": None if self.q_T is None else self.q_T.tolist(),
            "class": self.cls,
            "sgn_qT": self.sgn_qT,
            "sign_QT": self.sign_QT,
            "det_qT": self.det_qT,
            "flags": dict(self.flags),
        }


def _block_basis(n: int, blocks) -> np.ndarray:
    cols = []
    for j in blocks:
        e = np.zeros(2 * n)
        e[j] = 1.0
        cols.append(e)
    for j in blocks:
        e = np.zeros(2 * n)
        e[n + j] = 1.0
        cols.append(e)
    return np.array(cols).T.reshape(2 * n, len(cols))


def _returns(wj: float, wi: float, m: int) -> bool:
    """Does block ``j`` return at ``T = 2 pi m / |w_i|``?"""
    r = rational_approx(abs(wj) / abs(wi))
    if r is None:
        return False
    return (m * r.numerator) % r.denominator == 0


def find_periods(cd: CriticalData, t_min: float, t_max: float, tol: float = 1e-9) -> list[PeriodRecord]:
    """Periods of the linearized flow in ``[t_min, t_max]`` (``t_min > 0``).

    Each record is completed by :func:`restrict_forms`.
    """
    if t_min <= 0:
        t_min = tol
    n = cd.n
    ell = [j for j in range(n) if cd.sigma[j] == 1]
    cands: list[tuple[float, int, int]] = []
    for i in ell:
        base = 2 * math.pi / abs(cd.w[i])
        m0 = max(1, math.ceil(t_min / base - tol))
        m = m0
        while m * base <= t_max * (1 + tol):
            cands.append((m * base, i, m))
            m += 1
    cands.sort()
    records: list[PeriodRecord] = []
    for T, i, m in cands:
        if records and abs(records[-1].T - T) <= tol * max(1.0, T):
            continue
        blocks = tuple(j for j in ell if j == i or _returns(cd.w[j], cd.w[i], m))
        basis = _block_basis(n, blocks)
        rec = PeriodRecord(T=T, blocks=blocks, F_basis=basis, d_T=len(blocks), is_total=len(blocks) == n)
        records.append(restrict_forms(cd, rec, tol))
    return records


def _signature(eigs: np.ndarray, tol: float) -> tuple[int, bool]:
    pos = int(np.sum(eigs > tol))
    neg = int(np.sum(eigs < -tol))
    return pos - neg, bool(np.any(np.abs(eigs) <= tol))


def restrict_forms(cd: CriticalData, period: PeriodRecord, tol: float = 1e-9) -> PeriodRecord:
    """Fill in ``Q_T``, ``q_T``, the definiteness class and signatures."""
    n = cd.n
    H = cd.normal_hessian()
    B = period.F_basis
    others = tuple(j for j in range(n) if j not in period.blocks)
    Bc = _block_basis(n, others) if others else np.zeros((2 * n, 0))
    Q = 0.5 * B.T @ H @ B
    q = Bc.T @ H @ Bc
    eQ = np.linalg.eigvalsh(Q)
    sign_Q, degQ = _signature(eQ, tol)
    flags = dict(period.flags)
    if q.size:
        eq = np.linalg.eigvalsh(q)
        sgn_q, degq = _signature(eq, tol)
        det_q = float(np.prod(eq))
    else:
        sgn_q, degq, det_q = 0, False, 1.0
        flags["empty_complement"] = True
    if np.all(eQ > tol):
        cls = "positive-definite"
    elif np.all(eQ < -tol):
        cls = "negative-definite"
    else:
        cls = "indefinite"
    if degQ or degq:
        flags["degenerate"] = True
    flags.setdefault("H5", "assumed")
    period.complement_basis = Bc
    period.Q_T = Q
    period.q_T = q
    period.cls = cls
    period.sgn_qT = sgn_q
    period.sign_QT = sign_Q
    period.det_qT = det_q
    period.flags = flags
    return period


# ---------------------------------------------------------------------------
# resonances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResonanceSet:
    """Integer vectors ``k`` of l1 norm ``l`` with ``<k, (w, w)> = 0``."""

    order: int
    vectors: np.ndarray
    exact: bool

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def contains(self, k) -> bool:
        k = np.asarray(k, dtype=np.int64)
        return bool(np.any(np.all(self.vectors == k, axis=1)))


def _integer_weights(w: np.ndarray) -> np.ndarray | None:
    """Common-denominator integer representation of ``w`` when rational."""
    fr = [exact_rational(float(x)) for x in w]
    if any(f is None for f in fr):
        return None
    den = math.lcm(*(f.denominator for f in fr))
    if den > DENOM_CAP:
        return None
    return np.array([f.numerator * (den // f.denominator) for f in fr], dtype=np.int64)


def _zero_mask(K: np.ndarray, w: np.ndarray, tol: float) -> tuple[np.ndarray, bool]:
    wi = _integer_weights(w)
    if wi is not None:
        return (K @ wi) == 0, True
    return np.abs(K @ w) <= tol * max(1.0, float(np.max(np.abs(w)))), False


def resonance_module(w, l: int, tol: float = RESIDUAL_TOL) -> ResonanceSet:
    """Exhaustive resonances of order ``l`` (``l <= 6``) of the doubled vector ``(w, w)``."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if l > 6:
        raise ValueError("resonance enumeration is bounded to l <= 6")
    W = np.concatenate([w, w])
    K = _kernels.l1_sphere(W.size, l)
    mask, exact = _zero_mask(K, W, tol)
    return ResonanceSet(order=l, vectors=K[mask], exact=exact)


def pseudo_resonant(w, l: int, tol: float = RESIDUAL_TOL):
    """Is some signed sum of ``l`` entries of ``w`` (with repetition) zero?

    Returns ``(flag, witness)`` where the witness is a list of
    ``(index, sign)`` pairs of length ``l``.  Picking an index with both signs
    cancels, so the search runs over net coefficient vectors ``c`` with
    ``|c|_1 <= l`` and ``|c|_1 = l (mod 2)``.
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    if l > 8:
        raise ValueError("pseudo-resonance search is bounded to l <= 8")
    if l <= 0:
        return (l == 0), []
    for norm in range(l % 2, l + 1, 2):
        K = _kernels.l1_sphere(w.size, norm)
        mask, _ = _zero_mask(K, w, tol)
        hit = np.flatnonzero(mask)
        if hit.size:
            c = K[hit[0]]
            picks = [(int(j), int(np.sign(cj))) for j, cj in enumerate(c) for _ in range(abs(int(cj)))]
            pad = (l - len(picks)) // 2
            picks += [(0, 1), (0, -1)] * pad
            return True, picks
    return False, None
