"""Polynomial Hamiltonian symbols and their critical-point data.

Phase-space points are ordered ``(x_1..x_n, xi_1..xi_n)``.  A symbol is a
finite sum of monomials ``c_alpha z^alpha`` with real coefficients; all
derivatives are computed exactly from the coefficient table.

The Hamiltonian normal form checked at a critical point is

    p(z0 + z) = E_c + 1/2 sum_j w_j (x_j^2 + sigma_j xi_j^2) + O(|z|^3),

so the Hessian at ``z0`` is ``diag(w, sigma * w)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import _kernels

__all__ = [
    "PhasePoint",
    "PolySymbol",
    "CriticalData",
    "CriticalReport",
    "DimensionError",
    "evaluate",
    "gradient",
    "hessian",
    "homogeneous_part",
    "derivative_tensor",
    "verify_critical",
    "load_hamiltonian",
    "dump_hamiltonian",
]


class DimensionError(ValueError):
    """Raised when a point and a symbol live in different phase spaces."""


@dataclass(frozen=True)
class PhasePoint:
    """A point of ``T*R^n`` stored as ``(x_1..x_n, xi_1..xi_n)``."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float).reshape(-1)
        if c.size == 0 or c.size % 2:
            raise DimensionError(f"phase point needs an even number of coordinates, got {c.size}")
        object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return self.coords.size // 2

    @property
    def x(self) -> np.ndarray:
        return self.coords[: self.n]

    @property
    def xi(self) -> np.ndarray:
        return self.coords[self.n :]


def _coords(z) -> np.ndarray:
    if isinstance(z, PhasePoint):
        return z.coords
    return np.asarray(z, dtype=float)


@dataclass(frozen=True)
class PolySymbol:
    """Sparse real polynomial on ``R^{2n}``.

    Parameters
    ----------
    n : int
        Configuration dimension; the symbol has ``2n`` variables.
    terms : dict
        Map from exponent tuples of length ``2n`` to coefficients.  Zero
        coefficients are dropped and duplicate keys cannot occur.
    subprincipal : float
        Value ``p^1(z0)`` of the subprincipal symbol at the critical point.
    max_degree : int, optional
        Declared bound on the total degree.  Defaults to the actual degree.
    """

    n: int
    terms: dict
    subprincipal: float = 0.0
    max_degree: int | None = None
    _exps: np.ndarray = field(init=False, repr=False, compare=False)
    _coefs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        clean = {}
        for alpha, c in self.terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != 2 * self.n:
                raise DimensionError(f"exponent {alpha} has length {len(alpha)}, expected {2 * self.n}")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            c = float(c)
            if not np.isfinite(c):
                raise ValueError(f"non-finite coefficient for {alpha}")
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
        clean = {a: c for a, c in sorted(clean.items()) if c != 0.0}
        object.__setattr__(self, "terms", clean)
        deg = max((sum(a) for a in clean), default=0)
        if self.max_degree is None:
            object.__setattr__(self, "max_degree", deg)
        elif deg > self.max_degree:
            raise ValueError(f"degree {deg} exceeds declared maximum {self.max_degree}")
        exps = np.array(list(clean), dtype=np.int64).reshape(-1, 2 * self.n)
        object.__setattr__(self, "_exps", exps)
        object.__setattr__(self, "_coefs", np.array(list(clean.values()), dtype=float))

    # -- basic structure -------------------------------------------------

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def __add__(self, other: "PolySymbol") -> "PolySymbol":
        if other.n != self.n:
            raise DimensionError("cannot add symbols of different dimension")
        t = dict(self.terms)
        for a, c in other.terms.items():
            t[a] = t.get(a, 0.0) + c
        return PolySymbol(self.n, t, self.subprincipal)

    def is_zero(self) -> bool:
        return not self.terms

    # -- evaluation ------------------------------------------------------

    def __call__(self, z):
        return evaluate(self, z)

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate at the rows of an ``(N, 2n)`` array."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.shape[1] != self.dim:
            raise DimensionError(f"points have {pts.shape[1]} columns, symbol has {self.dim} variables")
        return _kernels.poly_eval(self._exps, self._coefs, pts)

    def partial(self, i: int) -> "PolySymbol":
        """Exact partial derivative with respect to variable ``i``."""
        t = {}
        for a, c in self.terms.items():
            if a[i]:
                b = list(a)
                b[i] -= 1
                t[tuple(b)] = t.get(tuple(b), 0.0) + c * a[i]
        return PolySymbol(self.n, t)

    def shifted(self, z0) -> "PolySymbol":
        """Re-center: return ``u -> p(z0 + u)`` expanded exactly."""
        z0 = _coords(z0)
        if z0.size != self.dim:
            raise DimensionError("shift point has the wrong dimension")
        if not np.any(z0):
            return self
        t: dict = {}
        for a, c in self.terms.items():
            ranges = [range(ai + 1) for ai in a]
            for b in itertools.product(*ranges):
                coef = c
                for ai, bi, zi in zip(a, b, z0):
                    if ai != bi:
                        coef *= math.comb(ai, bi) * zi ** (ai - bi)
                if coef != 0.0:
                    t[b] = t.get(b, 0.0) + coef
        return PolySymbol(self.n, t, self.subprincipal, max_degree=self.max_degree)

    def homogeneous(self, j: int) -> "PolySymbol":
        """Degree-``j`` terms (about the origin of the current coordinates)."""
        return PolySymbol(self.n, {a: c for a, c in self.terms.items() if sum(a) == j})


def evaluate(p: PolySymbol, z) -> float:
    """Value of ``p`` at a single point ``z``."""
    z = _coords(z)
    if z.shape[-1] != p.dim:
        raise DimensionError(f"point of dimension {z.shape[-1]} for symbol in {p.dim} variables")
    return float(p.eval_many(z.reshape(1, -1))[0])


def gradient(p: PolySymbol, z) -> np.ndarray:
    """Exact gradient of ``p`` at ``z``."""
    z = _coords(z)
    if z.size != p.dim:
        raise DimensionError("point dimension mismatch")
    return np.array([evaluate(p.partial(i), z) for i in range(p.dim)])


def hessian(p: PolySymbol, z) -> np.ndarray:
    """Exact Hessian of ``p`` at ``z``; symmetric by construction."""
    z = _coords(z)
    if z.size != p.dim:
        raise DimensionError("point dimension mismatch")
    m = p.dim
    H = np.zeros((m, m))
    firsts = [p.partial(i) for i in range(m)]
    for i in range(m):
        for j in range(i, m):
            H[i, j] = H[j, i] = evaluate(firsts[i].partial(j), z)
    return H


def homogeneous_part(p: PolySymbol, j: int, center=None) -> PolySymbol:
    """Degree-``j`` part of ``p`` expanded about ``center`` (default origin)."""
    if j < 0:
        raise ValueError("degree must be non-negative")
    q = p if center is None else p.shifted(center)
    return q.homogeneous(j)


def derivative_tensor(p: PolySymbol, z, order: int) -> np.ndarray:
    """Symmetric tensor ``d^order p(z)`` of shape ``(2n,)*order``."""
    z = _coords(z)
    q = p.shifted(z)
    m = p.dim
    T = np.zeros((m,) * order)
    if order == 0:
        return np.array(q.terms.get((0,) * m, 0.0))
    for a, c in q.terms.items():
        if sum(a) != order:
            continue
        val = c * math.prod(math.factorial(ai) for ai in a)
        idx = [i for i, ai in enumerate(a) for _ in range(ai)]
        for perm in set(itertools.permutations(idx)):
            T[perm] = val
    return T


# ---------------------------------------------------------------------------
# critical data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CriticalData:
    """Declared non-degenerate equilibrium and its block structure.

    Parameters
    ----------
    z0 : PhasePoint
        The equilibrium.
    E_c : float
        Critical energy ``p(z0)``.
    w : ndarray
        Block frequencies (nonzero, signed).
    sigma : ndarray
        ``+1`` for elliptic blocks, ``-1`` for hyperbolic blocks.
    """

    z0: PhasePoint
    E_c: float
    w: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        z0 = self.z0 if isinstance(self.z0, PhasePoint) else PhasePoint(self.z0)
        w = np.asarray(self.w, dtype=float).reshape(-1)
        s = np.asarray(self.sigma, dtype=int).reshape(-1)
        if w.size != z0.n or s.size != z0.n:
            raise DimensionError("w and sigma need one entry per block")
        if np.any(w == 0):
            raise ValueError("block frequencies must be nonzero")
        if not np.all(np.isin(s, (-1, 1))):
            raise ValueError("sigma entries must be +1 or -1")
        object.__setattr__(self, "z0", z0)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "sigma", s)

    @property
    def n(self) -> int:
        return self.z0.n

    def normal_hessian(self) -> np.ndarray:
        """Hessian of the declared quadratic normal form."""
        return np.diag(np.concatenate([self.w, self.sigma * self.w]))

    @property
    def elliptic(self) -> np.ndarray:
        return self.sigma == 1

    @classmethod
    def from_symbol(cls, p: PolySymbol, z0, E_c: float | None = None, tol: float = 1e-10):
        """Read ``w`` and ``sigma`` off a diagonal Hessian at ``z0``."""
        z0 = PhasePoint(_coords(z0))
        H = hessian(p, z0)
        n = p.n
        if np.max(np.abs(H - np.diag(np.diag(H))), initial=0.0) > tol:
            raise ValueError("Hessian at z0 is not diagonal in the given coordinates")
        hx, hxi = np.diag(H)[:n], np.diag(H)[n:]
        if np.any(np.abs(hx) <= tol):
            raise ValueError("degenerate Hessian block")
        ratio = hxi / hx
        if np.max(np.abs(np.abs(ratio) - 1.0)) > tol:
            raise ValueError("Hessian blocks are not of the form w(x^2 + sigma xi^2)")
        return cls(z0, evaluate(p, z0) if E_c is None else E_c, hx, np.sign(ratio).astype(int))


@dataclass(frozen=True)
class CriticalReport:
    """Outcome of :func:`verify_critical`."""

    grad_norm: float
    hessian_residual: float
    energy_residual: float
    extracted_w: np.ndarray
    extracted_sigma: np.ndarray
    tol: float
    passed: bool
    messages: tuple = ()

    def as_dict(self) -> dict:
        return {
            "grad_norm": self.grad_norm,
            "hessian_residual": self.hessian_residual,
            "energy_residual": self.energy_residual,
            "extracted_w": self.extracted_w.tolist(),
            "extracted_sigma": self.extracted_sigma.tolist(),
            "tol": self.tol,
            "passed": self.passed,
            "messages": list(self.messages),
        }


def verify_critical(p: PolySymbol, cd: CriticalData, tol: float = 1e-10) -> CriticalReport:
    """Check that ``cd`` describes a non-degenerate critical point of ``p``.

    The check passes iff the gradient norm and the max-abs Hessian residual
    against ``diag(w, sigma w)`` are both at most ``tol``.  The energy
    residual ``p(z0) - E_c`` is reported alongside.
    """
    if cd.n != p.n:
        raise DimensionError("critical data and symbol dimensions differ")
    g = gradient(p, cd.z0)
    H = hessian(p, cd.z0)
    n = p.n
    hx, hxi = np.diag(H)[:n], np.diag(H)[n:]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(hx != 0, hxi / hx, 0.0)
    gn = float(np.linalg.norm(g))
    hres = float(np.max(np.abs(H - cd.normal_hessian())))
    eres = float(evaluate(p, cd.z0) - cd.E_c)
    msgs = []
    if gn > tol:
        msgs.append(f"gradient norm {gn:.3e} exceeds tol {tol:.1e}")
    if hres > tol:
        msgs.append(f"Hessian differs from the declared normal form by {hres:.3e}")
    if abs(eres) > tol:
        msgs.append(f"p(z0) - E_c = {eres:.3e}")
    return CriticalReport(
        grad_norm=gn,
        hessian_residual=hres,
        energy_residual=eres,
        extracted_w=hx.copy(),
        extracted_sigma=np.sign(ratio).astype(int),
        tol=tol,
        passed=gn <= tol and hres <= tol,
        messages=tuple(msgs),
    )


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------


def _num(tok: str) -> float:
    return float(Fraction(tok)) if "/" in tok else float(tok)


def load_hamiltonian(path) -> tuple[PolySymbol, CriticalData]:
    """Parse a Hamiltonian file.

    Format (``#`` starts a comment, blank lines ignored)::

        n 2
        z0 0 0 0 0
        Ec 0
        p1 0
        w 1 -1          # optional, read off the Hessian when absent
        sigma 1 1       # optional
        terms
        2 0 0 0 1/2
        ...

    Each line after ``terms`` lists ``2n`` exponents (order ``x_1..x_n
    xi_1..xi_n``) followed by a coefficient; fractions like ``1/2`` are
    accepted.
    """
    text = Path(path).read_text()
    return parse_hamiltonian(text)


def parse_hamiltonian(text: str) -> tuple[PolySymbol, CriticalData]:
    header: dict[str, list[str]] = {}
    terms: dict = {}
    in_terms = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if not in_terms:
            key = toks[0].lower()
            if key == "terms":
                in_terms = True
                continue
            header[key] = toks[1:]
            continue
        if "n" not in header:
            raise ValueError("'n' must precede the terms block")
        n = int(header["n"][0])
        if len(toks) != 2 * n + 1:
            raise ValueError(f"line {lineno}: expected {2 * n} exponents and a coefficient")
        alpha = tuple(int(t) for t in toks[:-1])
        terms[alpha] = terms.get(alpha, 0.0) + _num(toks[-1])
    for key in ("n", "z0", "ec"):
        if key not in header:
            raise ValueError(f"missing header field '{key}'")
    n = int(header["n"][0])
    z0 = np.array([_num(t) for t in header["z0"]])
    if z0.size != 2 * n:
        raise ValueError("z0 must have 2n entries")
    p1 = _num(header["p1"][0]) if "p1" in header else 0.0
    p = PolySymbol(n, terms, subprincipal=p1)
    E_c = _num(header["ec"][0])
    if "w" in header:
        w = np.array([_num(t) for t in header["w"]])
        sigma = np.array([int(t) for t in header.get("sigma", ["1"] * n)])
        cd = CriticalData(PhasePoint(z0), E_c, w, sigma)
    else:
        cd = CriticalData.from_symbol(p, z0, E_c)
    return p, cd


def dump_hamiltonian(p: PolySymbol, cd: CriticalData) -> str:
    """Inverse of :func:`parse_hamiltonian` (coefficients written as floats)."""
    lines = [
        f"n {p.n}",
        "z0 " + " ".join(repr(float(v)) for v in cd.z0.coords),
        f"Ec {cd.E_c!r}",
        f"p1 {p.subprincipal!r}",
        "w " + " ".join(repr(float(v)) for v in cd.w),
        "sigma " + " ".join(str(int(s)) for s in cd.sigma),
        "terms",
    ]
    for a, c in p.terms.items():
        lines.append(" ".join(str(e) for e in a) + f" {c!r}")
    return "\n".join(lines) + "\n"
