"""The homogeneous invariant ``R_k`` on a fixed space and integrals over its cone.

``R_k`` is built in two independent ways:

* from a flow jet, ``R_k(z) = (1/k!) sigma(z, d^{k-1} Phi_T(z^{k-1}))`` with
  ``sigma(u, v) = u^T J v``;
* from the pulled-back variational integral
  ``(1/k!) int_0^T sigma(z, dPhi_{-s} D^{k-1}X(dPhi_s z, ...)) ds``, sampled on
  a symmetric grid and interpolated by least squares.

Cone integrals ``int_{C cap S} f dL`` use the Liouville measure ``dL``
defined by ``dL ^ dQ = dtheta`` (surface measure divided by the
sphere-tangential gradient norm of ``Q``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .flow import JetTensor, _cheb_antiderivative, _monodromy_stack, symplectic_matrix, vector_field_tensors
from .periods import PeriodRecord
from .symbol import CriticalData, PolySymbol, derivative_tensor

__all__ = [
    "HypothesisError",
    "HomogForm",
    "ConeSamples",
    "ConeIntegral",
    "ConeGeometryReport",
    "rk_from_jet",
    "rk_from_integral",
    "sphere_area",
    "cone_samples",
    "cone_integral",
    "check_cone_geometry",
    "polish_common_zeros",
]


class HypothesisError(ValueError):
    """A mathematical precondition of an operation does not hold."""


def sphere_area(m: int) -> float:
    """Surface measure of the unit sphere ``S^{m-1}`` in ``R^m`` (``|S^0| = 2``)."""
    return 2.0 * math.pi ** (m / 2) / math.gamma(m / 2)


# ---------------------------------------------------------------------------
# homogeneous forms
# ---------------------------------------------------------------------------


def _multi_indices(m: int, k: int) -> list[tuple[int, ...]]:
    out = []
    for combo in itertools.combinations_with_replacement(range(m), k):
        a = [0] * m
        for i in combo:
            a[i] += 1
        out.append(tuple(a))
    return sorted(out, reverse=True)


@dataclass(frozen=True)
class HomogForm:
    """Homogeneous polynomial of degree ``k`` on ``R^m``.

    Parameters
    ----------
    degree : int
    dim : int
    coeffs : dict
        Map from exponent tuples (all of total degree ``degree``) to real
        coefficients.
    """

    degree: int
    dim: int
    coeffs: dict
    _exps: np.ndarray = field(init=False, repr=False, compare=False)
    _vals: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        clean = {}
        for a, c in self.coeffs.items():
            a = tuple(int(v) for v in a)
            if len(a) != self.dim or sum(a) != self.degree:
                raise ValueError(f"monomial {a} is not of degree {self.degree} in {self.dim} variables")
            c = float(c)
            if c != 0.0:
                clean[a] = clean.get(a, 0.0) + c
        clean = dict(sorted(clean.items(), reverse=True))
        object.__setattr__(self, "coeffs", clean)
        object.__setattr__(self, "_exps", np.array(list(clean), dtype=np.int64).reshape(-1, self.dim))
        object.__setattr__(self, "_vals", np.array(list(clean.values()), dtype=float))

    # construction
    @classmethod
    def from_tensor(cls, T: np.ndarray) -> "HomogForm":
        """Form ``y -> T(y, ..., y)`` of a (not necessarily symmetric) tensor."""
        k = T.ndim
        m = T.shape[0]
        coeffs: dict = {}
        for idx in itertools.product(range(m), repeat=k):
            v = T[idx]
            if v == 0.0:
                continue
            a = [0] * m
            for i in idx:
                a[i] += 1
            a = tuple(a)
            coeffs[a] = coeffs.get(a, 0.0) + float(v)
        return cls(k, m, coeffs)

    @classmethod
    def zero(cls, k: int, m: int) -> "HomogForm":
        return cls(k, m, {})

    # evaluation
    def __call__(self, Y) -> np.ndarray | float:
        Y = np.asarray(Y, dtype=float)
        single = Y.ndim == 1
        Y2 = np.atleast_2d(Y)
        if Y2.shape[1] != self.dim:
            raise ValueError(f"points of dimension {Y2.shape[1]} for a form on R^{self.dim}")
        out = _kernels.poly_eval(self._exps, self._vals, Y2)
        return float(out[0]) if single else out

    def partial(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        ex = self._exps.copy()
        mask = ex[:, i] > 0
        c = self._vals[mask] * ex[mask, i]
        ex = ex[mask]
        ex[:, i] -= 1
        return ex, c

    def gradient(self, Y) -> np.ndarray:
        Y2 = np.atleast_2d(np.asarray(Y, dtype=float))
        G = np.zeros_like(Y2)
        for i in range(self.dim):
            ex, c = self.partial(i)
            if c.size:
                G[:, i] = _kernels.poly_eval(ex, c, Y2)
        return G[0] if np.ndim(Y) == 1 else G

    # algebra
    def scaled(self, c: float) -> "HomogForm":
        return HomogForm(self.degree, self.dim, {a: c * v for a, v in self.coeffs.items()})

    def coefficient(self, alpha) -> float:
        return self.coeffs.get(tuple(alpha), 0.0)

    def max_coeff_diff(self, other: "HomogForm") -> float:
        if (self.degree, self.dim) != (other.degree, other.dim):
            raise ValueError("forms of different shape")
        keys = set(self.coeffs) | set(other.coeffs)
        return max((abs(self.coefficient(a) - other.coefficient(a)) for a in keys), default=0.0)

    def is_zero(self, atol: float = 0.0) -> bool:
        return all(abs(v) <= atol for v in self.coeffs.values())

    def as_dict(self) -> dict:
        return {
            "degree": self.degree,
            "dim": self.dim,
            "coefficients": [[list(a), c] for a, c in self.coeffs.items()],
        }


# ---------------------------------------------------------------------------
# R_k from a jet and from the variational integral
# ---------------------------------------------------------------------------


def rk_from_jet(jet: JetTensor, period: PeriodRecord, tol: float = 1e-9) -> HomogForm:
    """``R_k`` with ``k = jet.order + 1`` in the coordinates of ``period.F_basis``.

    Raises
    ------
    ValueError
        If the jet was not taken at the period.
    """
    if abs(jet.t - period.T) > tol * max(1.0, abs(period.T)):
        raise ValueError(f"jet taken at t = {jet.t} but the period is T = {period.T}")
    k = jet.order + 1
    n = jet.dim // 2
    J = symplectic_matrix(n)
    B = period.F_basis
    # T[a0, a1..a_{k-1}] = (1/k!) (B e_a0)^T J jet(B e_a1, ...)
    T = np.tensordot(B.T @ J, jet.tensor, axes=(1, 0))
    for _ in range(jet.order):
        T = np.tensordot(T, B, axes=(1, 0))
    return HomogForm.from_tensor(T / math.factorial(k))


def _sample_grid(m: int, k: int) -> np.ndarray:
    vals = np.arange(-(k // 2 + 1), k // 2 + 2, dtype=float)
    pts = np.array(list(itertools.product(vals, repeat=m)))
    return pts[np.any(pts != 0, axis=1)]


def _contract(D: np.ndarray, U: np.ndarray) -> np.ndarray:
    """``D(u, ..., u)`` row-wise for the rows of ``U``."""
    out = np.broadcast_to(D, (U.shape[0],) + D.shape)
    for _ in range(D.ndim - 1):
        out = np.einsum("n...a,na->n...", out, U)
    return out


def rk_from_integral(
    p: PolySymbol,
    cd: CriticalData,
    period: PeriodRecord,
    k: int,
    tol: float = 1e-10,
    n_start: int = 33,
    n_max: int = 1025,
) -> HomogForm:
    """``R_k`` by quadrature of the pulled-back vector-field derivative.

    Requires ``d^j p(z0) = 0`` for ``3 <= j < k`` (otherwise lower jets
    enter and the single-pullback formula does not apply).

    Raises
    ------
    HypothesisError
        If a lower derivative of ``p`` at ``z0`` is nonzero.
    RuntimeError
        If the quadrature does not converge.
    """
    for j in range(3, k):
        if np.any(derivative_tensor(p, cd.z0, j)):
            raise HypothesisError(f"d^{j} p(z0) != 0: the single-pullback formula needs it to vanish")
    D = vector_field_tensors(p, cd.z0, k - 1)[k - 1]
    B = period.F_basis
    Y = _sample_grid(B.shape[1], k)
    Z = Y @ B.T
    n = cd.n
    J = symplectic_matrix(n)
    T = period.T
    N = n_start
    prev = None
    vals = None
    while N <= n_max:
        x, S = _cheb_antiderivative(N)
        wts = S[-1] * T
        s = T * x
        M = _monodromy_stack(cd, s)
        Minv = _monodromy_stack(cd, -s)
        acc = np.zeros(Z.shape[0])
        for q in range(N):
            U = Z @ M[q].T
            V = _contract(D, U) @ Minv[q].T
            acc += wts[q] * np.einsum("ni,ij,nj->n", Z, J, V)
        vals = acc / math.factorial(k)
        if prev is not None and np.max(np.abs(vals - prev)) <= tol * max(1.0, np.max(np.abs(vals))):
            break
        prev = vals
        N = 2 * N - 1
    else:
        raise RuntimeError("R_k quadrature did not converge")
    alphas = _multi_indices(B.shape[1], k)
    A = np.stack([np.prod(Y ** np.array(a)[None, :], axis=1) for a in alphas], axis=1)
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    scale = max(1.0, float(np.max(np.abs(coef))))
    coef = np.where(np.abs(coef) <= 1e-13 * scale, 0.0, coef)
    return HomogForm(k, B.shape[1], dict(zip(alphas, coef)))


# ---------------------------------------------------------------------------
# cone sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConeSamples:
    """Weighted points of ``C_Q cap S`` approximating the Liouville measure.

    ``group`` labels samples that share a draw (a great circle for ``mc``);
    standard errors are computed from per-group sums.
    """

    theta: np.ndarray
    weights: np.ndarray
    group: np.ndarray
    n_groups: int
    method: str
    seed: int | None
    N: int
    delta: float | None = None
    deterministic: bool = False

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))


def _check_indefinite(Q: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError("Q must be a square matrix")
    Q = 0.5 * (Q + Q.T)
    e = np.linalg.eigvalsh(Q)
    scale = max(1.0, float(np.max(np.abs(e))))
    if np.all(e > tol * scale) or np.all(e < -tol * scale):
        raise HypothesisError("empty cone: Q is definite")
    return Q


def _unit_rows(rng: np.random.Generator, count: int, m: int) -> np.ndarray:
    g = rng.standard_normal((count, m))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _project_to_cone(Q: np.ndarray, theta: np.ndarray, steps: int = 6) -> np.ndarray:
    """Newton steps along the sphere-tangential gradient of ``Q``."""
    th = theta.copy()
    for _ in range(steps):
        q = np.einsum("ni,ij,nj->n", th, Q, th)
        g = 2 * th @ Q
        g -= np.sum(g * th, axis=1, keepdims=True) * th
        gg = np.sum(g * g, axis=1)
        th = th - (q / np.where(gg > 0, gg, 1.0))[:, None] * g
        th /= np.linalg.norm(th, axis=1, keepdims=True)
    return th


def _mc_chunk(Q, count, rng, delta, m):
    a = _unit_rows(rng, count, m)
    b = rng.standard_normal((count, m))
    b -= np.sum(b * a, axis=1, keepdims=True) * a
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    qa = np.einsum("ni,ij,nj->n", a, Q, a)
    qb = np.einsum("ni,ij,nj->n", b, Q, b)
    bab = np.einsum("ni,ij,nj->n", a, Q, b)
    length, ustar, psi, root = _kernels.circle_bands(qa, qb, bab, delta)
    live = np.flatnonzero(length > 0)
    # four band components per circle, centred at u*, 2pi - u*, and +2pi
    us = np.stack([ustar[live], 2 * np.pi - ustar[live], ustar[live] + 2 * np.pi, 4 * np.pi - ustar[live]], axis=1)
    phi = 0.5 * (us + psi[live, None])
    c, s = np.cos(phi), np.sin(phi)
    th = c[..., None] * a[live, None, :] + s[..., None] * b[live, None, :]
    th = th.reshape(-1, m)
    graze = np.repeat(~root[live], 4)
    if np.any(graze):
        th[graze] = _project_to_cone(Q, th[graze])
    lens = np.repeat(0.5 * length[live], 4)
    return th, lens, np.repeat(live, 4)


def cone_samples(Q, N: int, seed: int = 0, method: str = "mc", delta: float = 1e-3, chunk: int = 1 << 16) -> ConeSamples:
    """Weighted samples of the Liouville measure on ``{Q = 0} cap S^{m-1}``.

    Parameters
    ----------
    Q : ndarray
        Symmetric matrix of the quadratic form ``Q(theta) = theta^T Q theta``.
    N : int
        Number of great circles (``mc``) or points (``product``).
    method : {"mc", "product"}
        ``mc`` is a thin-shell estimator: uniformly random great circles are
        cut by the shell ``|Q| < delta`` in closed form; each band component
        contributes its angular length ``/(2 delta)`` at the cone point inside
        it.  ``product`` parameterizes the cone exactly when the positive and
        the negative eigenvalues of ``Q`` are each a single repeated value.

    Raises
    ------
    HypothesisError
        If ``Q`` is definite.
    ValueError
        If ``product`` is requested for a form that is not block uniform.
    """
    Q = _check_indefinite(Q)
    m = Q.shape[0]
    if method == "product":
        return _product_samples(Q, N, seed)
    if method != "mc":
        raise ValueError(f"unknown cone sampling method {method!r}")
    ss = np.random.SeedSequence(seed)
    nchunks = max(1, -(-N // chunk))
    children = ss.spawn(nchunks)
    thetas, lens, groups = [], [], []
    done = 0
    for ci, child in enumerate(children):
        count = min(chunk, N - done)
        rng = np.random.default_rng(child)
        th, ln, grp = _mc_chunk(Q, count, rng, delta, m)
        thetas.append(th)
        lens.append(ln)
        groups.append(grp + done)
        done += count
    theta = np.concatenate(thetas) if thetas else np.zeros((0, m))
    ln = np.concatenate(lens) if lens else np.zeros(0)
    grp = np.concatenate(groups) if groups else np.zeros(0, dtype=np.int64)
    w = sphere_area(m) / (2 * np.pi) * ln / (2 * delta) / N
    return ConeSamples(theta, w, grp, N, "mc", seed, N, delta)


def _product_samples(Q: np.ndarray, N: int, seed: int) -> ConeSamples:
    e, V = np.linalg.eigh(Q)
    scale = float(np.max(np.abs(e)))
    pos, neg = e > 1e-12 * scale, e < -1e-12 * scale
    if np.any(~(pos | neg)):
        raise ValueError("product parameterization needs a nondegenerate form")
    a_vals, b_vals = e[pos], -e[neg]
    if np.ptp(a_vals) > 1e-12 * scale or np.ptp(b_vals) > 1e-12 * scale:
        raise ValueError("product parameterization needs block-uniform eigenvalues")
    a, b = float(a_vals.mean()), float(b_vals.mean())
    p_, q_ = int(pos.sum()), int(neg.sum())
    ru, rv = math.sqrt(b / (a + b)), math.sqrt(a / (a + b))
    mass = sphere_area(p_) * ru ** (p_ - 1) * sphere_area(q_) * rv ** (q_ - 1) / (2 * math.sqrt(a * b))
    Vp, Vn = V[:, pos], V[:, neg]

    def factor(dim, count, rng):
        if dim == 1:
            return np.array([[1.0], [-1.0]])
        if dim == 2:
            ang = 2 * np.pi * (np.arange(count) + 0.5) / count
            return np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return _unit_rows(rng, count, dim)

    rng = np.random.default_rng(seed)
    per = max(2, int(round(math.sqrt(N))))
    U = factor(p_, per, rng)
    W = factor(q_, per, rng)
    if p_ > 2 or q_ > 2:
        # random product: pair the draws instead of forming a grid
        cnt = N
        U = factor(p_, cnt, rng) if p_ > 2 else U[rng.integers(0, U.shape[0], cnt)]
        W = factor(q_, cnt, rng) if q_ > 2 else W[rng.integers(0, W.shape[0], cnt)]
        th = ru * U @ Vp.T + rv * W @ Vn.T
    else:
        th = (ru * U @ Vp.T)[:, None, :] + (rv * W @ Vn.T)[None, :, :]
        th = th.reshape(-1, Q.shape[0])
    K = th.shape[0]
    grid = p_ <= 2 and q_ <= 2
    return ConeSamples(th, np.full(K, mass / K), np.arange(K), K, "product", seed, K, deterministic=grid)


# ---------------------------------------------------------------------------
# cone integrals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConeIntegral:
    """Result of :func:`cone_integral`."""

    value: complex
    stderr: float
    excluded_mass: float
    n_excluded: int
    converged: bool
    regularization: str
    alpha: float
    method: str

    def as_dict(self) -> dict:
        return {
            "value": [self.value.real, self.value.imag],
            "stderr": self.stderr,
            "excluded_mass": self.excluded_mass,
            "n_excluded": self.n_excluded,
            "converged": self.converged,
            "regularization": self.regularization,
            "alpha": self.alpha,
            "method": "monte-carlo" if self.method == "mc" else "closed-form",
        }


def cone_integral(f, samples: ConeSamples, regularization: str = "none", alpha: float = 0.0, eps: float = 1e-6) -> ConeIntegral:
    """Weighted sum ``sum_i w_i g(f(theta_i))``.

    ``g`` is the identity for ``none``, ``|f|^{-alpha}`` for ``abs-power`` and
    ``(f + i0)^{-alpha}`` for ``i0-power``.  For the two power
    regularizations samples with ``|f| < eps`` are excluded and their mass is
    reported; the estimate counts as converged when the excluded region's
    share of the integral, estimated as ``excluded_mass * eps**(-alpha)``,
    is below the Monte Carlo standard error (or nothing was excluded).
    """
    vals = np.asarray(f(samples.theta), dtype=float) if callable(f) else np.asarray(f, dtype=float)
    w = samples.weights
    excluded = np.zeros(vals.shape, dtype=bool)
    if regularization == "none":
        g = vals.astype(complex)
    elif regularization in ("abs-power", "i0-power"):
        excluded = np.abs(vals) < eps
        safe = np.where(excluded, 1.0, np.abs(vals))
        g = safe ** (-alpha) + 0j
        if regularization == "i0-power":
            g = np.where(vals < 0, g * np.exp(-1j * np.pi * alpha), g)
        g = np.where(excluded, 0.0, g)
    else:
        raise ValueError(f"unknown regularization {regularization!r}")
    contrib = w * g
    value = complex(np.sum(contrib))
    sums = np.zeros(samples.n_groups, dtype=complex)
    np.add.at(sums, samples.group, contrib)
    G = samples.n_groups
    if samples.deterministic or G < 2:
        stderr = 0.0
    else:
        stderr = float(np.sqrt(G * np.sum(np.abs(sums - value / G) ** 2) / (G - 1)))
    ex_mass = float(np.sum(w[excluded]))
    if not np.all(np.isfinite(contrib)):
        raise FloatingPointError("divergent cone integral: non-finite contributions")
    tail = ex_mass * eps ** (-alpha) if regularization != "none" else 0.0
    converged = bool(excluded.sum() == 0 or tail <= max(stderr, 1e-12 * abs(value)))
    return ConeIntegral(value, stderr, ex_mass, int(excluded.sum()), converged, regularization, float(alpha), samples.method)


# ---------------------------------------------------------------------------
# cone geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConeGeometryReport:
    """Sign pattern of ``R`` on the cone and transversality of the common zeros."""

    sign_pattern: str
    r_min: float
    r_max: float
    intersection_empty: bool
    zeros: np.ndarray
    transversality_margin: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "sign_pattern": self.sign_pattern,
            "r_min": self.r_min,
            "r_max": self.r_max,
            "intersection_empty": self.intersection_empty,
            "n_zeros": int(self.zeros.shape[0]),
            "transversality_margin": self.transversality_margin,
            "passed": self.passed,
        }


def _wedge_norm(gq: np.ndarray, gr: np.ndarray) -> np.ndarray:
    a = np.sum(gq * gq, axis=1)
    b = np.sum(gr * gr, axis=1)
    c = np.sum(gq * gr, axis=1)
    return np.sqrt(np.maximum(a * b - c * c, 0.0))


def _tangential(G: np.ndarray, th: np.ndarray) -> np.ndarray:
    return G - np.sum(G * th, axis=1, keepdims=True) * th


def polish_common_zeros(Q: np.ndarray, R: HomogForm, seeds: np.ndarray, iters: int = 50, tol: float = 1e-13) -> np.ndarray:
    """Gauss-Newton on ``(Q, R, |theta|^2 - 1) = 0`` from each seed; converged points only."""
    found = []
    for th in seeds:
        x = th / np.linalg.norm(th)
        ok = False
        for _ in range(iters):
            F = np.array([x @ Q @ x, R(x), x @ x - 1.0])
            if np.max(np.abs(F)) <= tol:
                ok = True
                break
            Jm = np.vstack([2 * Q @ x, R.gradient(x), 2 * x])
            x = x - np.linalg.lstsq(Jm, F, rcond=None)[0]
        if ok:
            found.append(x)
    if not found:
        return np.zeros((0, Q.shape[0]))
    pts = np.array(found)
    keep = []
    for i, x in enumerate(pts):
        if all(np.linalg.norm(x - pts[j]) > 1e-6 for j in keep):
            keep.append(i)
    return pts[keep]


def check_cone_geometry(Q, R: HomogForm, N: int = 20000, seed: int = 0, n_seeds: int = 64, margin_tol: float = 1e-6) -> ConeGeometryReport:
    """Sample ``R`` on the cone of ``Q`` and polish any common zeros."""
    Q = _check_indefinite(Q)
    smp = cone_samples(Q, N, seed=seed, method="mc")
    th = smp.theta
    r = R(th)
    rmin, rmax = float(np.min(r)), float(np.max(r))
    scale = max(abs(rmin), abs(rmax), 1e-300)
    if rmin > 1e-12 * scale:
        pattern = "positive"
    elif rmax < -1e-12 * scale:
        pattern = "negative"
    else:
        pattern = "mixed"
    if pattern != "mixed":
        return ConeGeometryReport(pattern, rmin, rmax, True, np.zeros((0, Q.shape[0])), float("inf"), True)
    gr = _tangential(R.gradient(th), th)
    ratio = np.abs(r) / np.maximum(np.linalg.norm(gr, axis=1), 1e-300)
    order = np.argsort(ratio)[:n_seeds]
    zeros = polish_common_zeros(Q, R, th[order])
    if zeros.shape[0] == 0:
        return ConeGeometryReport(pattern, rmin, rmax, False, zeros, 0.0, False)
    gq = _tangential(2 * zeros @ Q, zeros)
    grz = _tangential(R.gradient(zeros), zeros)
    margin = float(np.min(_wedge_norm(gq, grz)))
    return ConeGeometryReport(pattern, rmin, rmax, False, zeros, margin, margin > margin_tol)
