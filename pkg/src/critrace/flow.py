"""Hamiltonian flow, closed-form monodromy and higher flow jets at an equilibrium.

Conventions: ``J = [[0, I], [-I, 0]]`` and ``dz/dt = J grad p``, i.e.
``dx/dt = d_xi p`` and ``dxi/dt = -d_x p``.

Flow jets ``d^k Phi_t(z0)`` for ``k <= 4`` come from the variational
integral

    d^k Phi_t = dPhi_t  int_0^t dPhi_{-s} P_k(s) ds,

where ``P_k`` collects the Faa di Bruno terms built from exact derivatives
of the vector field ``X = J grad p`` at ``z0`` and the lower jets.  The
integrals are evaluated with a Chebyshev-Lobatto spectral antiderivative on
``[0, t]`` so that every lower jet is available on the same node set.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.integrate import solve_ivp

from . import _kernels
from .symbol import CriticalData, PolySymbol, _coords, derivative_tensor

__all__ = [
    "FlowError",
    "FlowResult",
    "Monodromy",
    "JetTensor",
    "symplectic_matrix",
    "hamilton_flow",
    "hamilton_flow_batch",
    "linearized_flow",
    "flow_jet",
    "vector_field_tensors",
    "finite_difference_jet",
]


class FlowError(RuntimeError):
    """Integration failure: step-size underflow or bounding-box escape."""


def symplectic_matrix(n: int) -> np.ndarray:
    """Standard ``J`` on ``R^{2n}``."""
    I = np.eye(n)
    Z = np.zeros((n, n))
    return np.block([[Z, I], [-I, Z]])


# ---------------------------------------------------------------------------
# nonlinear flow
# ---------------------------------------------------------------------------


class _Field:
    """Vectorized ``X(z) = J grad p(z)`` for batches of points."""

    def __init__(self, p: PolySymbol):
        self.p = p
        self.n = p.n
        self.parts = [p.partial(i) for i in range(p.dim)]

    def grad(self, Z: np.ndarray) -> np.ndarray:
        G = np.empty_like(Z)
        for i, q in enumerate(self.parts):
            G[:, i] = _kernels.poly_eval(q._exps, q._coefs, Z) if q.terms else 0.0
        return G

    def __call__(self, Z: np.ndarray) -> np.ndarray:
        G = self.grad(Z)
        n = self.n
        return np.concatenate([G[:, n:], -G[:, :n]], axis=1)


@dataclass(frozen=True)
class FlowResult:
    """End state of an integrated trajectory (or batch of trajectories)."""

    z: np.ndarray
    t: float
    energy_drift: float
    nfev: int
    tol: float

    @property
    def energy_ok(self) -> bool:
        return self.energy_drift <= 100 * self.tol


def hamilton_flow_batch(p: PolySymbol, Z, t: float, tol: float = 1e-12, box: float = 1e3) -> FlowResult:
    """Integrate ``dz/dt = J grad p`` from each row of ``Z`` up to time ``t``.

    All trajectories are advanced as one system by an adaptive
    Dormand-Prince 8(5,3) integrator with ``rtol = atol = tol``.

    Raises
    ------
    FlowError
        If the integrator fails or any trajectory leaves the box
        ``max |z_i| <= box``.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    B, m = Z.shape
    if m != p.dim:
        raise ValueError("initial points have the wrong dimension")
    if t == 0:
        return FlowResult(Z.copy(), 0.0, 0.0, 0, tol)
    field = _Field(p)

    def rhs(_, y):
        return field(y.reshape(B, m)).reshape(-1)

    def escape(_, y):
        return box - np.max(np.abs(y))

    escape.terminal = True
    sol = solve_ivp(rhs, (0.0, t), Z.reshape(-1), method="DOP853", rtol=tol, atol=tol, events=escape)
    if sol.status == 1:
        raise FlowError(f"trajectory left the box |z| <= {box} at t = {sol.t_events[0][0]:.6g}")
    if sol.status != 0:
        raise FlowError(f"integrator failed: {sol.message}")
    Zt = sol.y[:, -1].reshape(B, m)
    e0 = p.eval_many(Z)
    e1 = p.eval_many(Zt)
    drift = float(np.max(np.abs(e1 - e0)))
    return FlowResult(Zt, float(t), drift, int(sol.nfev), tol)


def hamilton_flow(p: PolySymbol, z, t: float, tol: float = 1e-12, box: float = 1e3) -> FlowResult:
    """Integrate a single trajectory; ``result.z`` is the end point."""
    res = hamilton_flow_batch(p, _coords(z).reshape(1, -1), t, tol, box)
    return FlowResult(res.z[0], res.t, res.energy_drift, res.nfev, tol)


# ---------------------------------------------------------------------------
# linearized flow
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Monodromy:
    """Linearized flow ``M = dPhi_t(z0)``."""

    t: float
    M: np.ndarray

    def symplectic_defect(self) -> float:
        n = self.M.shape[0] // 2
        J = symplectic_matrix(n)
        return float(np.max(np.abs(self.M.T @ J @ self.M - J)))


def _monodromy_stack(cd: CriticalData, ts: np.ndarray) -> np.ndarray:
    """Closed-form ``dPhi_t`` for an array of times, shape ``(len(ts), 2n, 2n)``."""
    ts = np.asarray(ts, dtype=float).reshape(-1)
    n = cd.n
    out = np.zeros((ts.size, 2 * n, 2 * n))
    for j in range(n):
        a = cd.w[j] * ts
        if cd.sigma[j] == 1:
            c, s = np.cos(a), np.sin(a)
            out[:, j, j] = c
            out[:, j, n + j] = s
            out[:, n + j, j] = -s
            out[:, n + j, n + j] = c
        else:
            c, s = np.cosh(a), np.sinh(a)
            out[:, j, j] = c
            out[:, j, n + j] = -s
            out[:, n + j, j] = -s
            out[:, n + j, n + j] = c
    return out


def linearized_flow(cd: CriticalData, t: float) -> Monodromy:
    """Closed-form monodromy of the quadratic normal form.

    Elliptic blocks rotate by ``w_j t``; hyperbolic blocks are hyperbolic
    rotations by ``w_j t``.
    """
    return Monodromy(float(t), _monodromy_stack(cd, [t])[0])


# ---------------------------------------------------------------------------
# jets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JetTensor:
    """Symmetric multilinear map ``d^k Phi_t(z0)``.

    ``tensor[i, a1, ..., ak]`` is the ``i``-th output component; the input
    indices are symmetric.
    """

    order: int
    t: float
    tensor: np.ndarray

    @property
    def dim(self) -> int:
        return self.tensor.shape[0]

    def __call__(self, *vectors) -> np.ndarray:
        if len(vectors) != self.order:
            raise ValueError(f"jet of order {self.order} needs {self.order} vectors")
        out = self.tensor
        for v in reversed(vectors):
            out = out @ np.asarray(v, dtype=float)
        return out

    def diag(self, Z) -> np.ndarray:
        """Evaluate ``jet(z, ..., z)`` for each row of ``Z``."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        out = np.broadcast_to(self.tensor, (Z.shape[0],) + self.tensor.shape)
        for _ in range(self.order):
            out = np.einsum("n...a,na->n...", out, Z)
        return out

    def is_zero(self, atol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.tensor), initial=0.0) <= atol)


def vector_field_tensors(p: PolySymbol, z0, kmax: int) -> dict[int, np.ndarray]:
    """Derivative tensors ``D^j X(z0)`` of ``X = J grad p`` for ``1 <= j <= kmax``.

    ``D[j][i, a1..aj] = sum_m J[i, m] d^{j+1} p(z0)[m, a1..aj]``.
    """
    J = symplectic_matrix(p.n)
    return {j: np.tensordot(J, derivative_tensor(p, z0, j + 1), axes=(1, 0)) for j in range(1, kmax + 1)}


def _symmetrize_inputs(T: np.ndarray) -> np.ndarray:
    """Average over permutations of the input axes ``2..`` (axis 0 is the batch)."""
    k = T.ndim - 2
    if k <= 1:
        return T
    acc = np.zeros_like(T)
    perms = list(itertools.permutations(range(2, 2 + k)))
    for perm in perms:
        acc += np.transpose(T, (0, 1) + perm)
    return acc / len(perms)


@lru_cache(maxsize=16)
def _cheb_antiderivative(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Lobatto nodes on [0, 1] and the matrix mapping samples to ``int_0^x``."""
    x = np.cos(np.pi * np.arange(N) / (N - 1))[::-1]  # ascending in [-1, 1]
    V = C.chebvander(x, N - 1)
    Vinv = np.linalg.inv(V)
    S = np.zeros((N, N))
    for col in range(N):
        coef = Vinv[:, col]
        S[:, col] = C.chebval(x, C.chebint(coef, lbnd=-1.0))
    return (x + 1.0) / 2.0, S / 2.0


def _jets_on_nodes(D: dict, cd: CriticalData, t: float, k: int, N: int) -> np.ndarray:
    """Jets of orders ``1..k`` at the Lobatto nodes of ``[0, t]``."""
    x, S = _cheb_antiderivative(N)
    s = t * x
    M = _monodromy_stack(cd, s)
    Minv = _monodromy_stack(cd, -s)
    jets = {1: M}
    zero = {j: not np.any(D[j]) for j in D}
    m = M.shape[1]
    for order in range(2, k + 1):
        P = np.zeros((N, m) + (m,) * order)
        if not zero[order]:
            sub = "pqrst"[: order + 1]
            ins = ",".join(f"n{sub[i + 1]}{'abcd'[i]}" for i in range(order))
            P += np.einsum(f"{sub},{ins}->np{'abcd'[:order]}", D[order], *([M] * order))
        J2 = jets.get(2)
        J3 = jets.get(3)
        if order == 3 and not zero[2] and np.any(J2):
            P += 3 * _symmetrize_inputs(np.einsum("pqr,nqa,nrbc->npabc", D[2], M, J2))
        if order == 4:
            if not zero[3] and np.any(J2):
                P += 6 * _symmetrize_inputs(np.einsum("pqrs,nqa,nrb,nscd->npabcd", D[3], M, M, J2))
            if not zero[2] and np.any(J3):
                P += 4 * _symmetrize_inputs(np.einsum("pqr,nqa,nrbcd->npabcd", D[2], M, J3))
            if not zero[2] and np.any(J2):
                P += 3 * _symmetrize_inputs(np.einsum("pqr,nqab,nrcd->npabcd", D[2], J2, J2))
        F = np.einsum("npq,nq...->np...", Minv, P)
        if not np.any(F):
            jets[order] = np.zeros_like(P)
            continue
        I = t * np.tensordot(S, F, axes=(1, 0))
        jets[order] = np.einsum("npq,nq...->np...", M, I)
    return jets


def flow_jet(p: PolySymbol, cd: CriticalData, k: int, t: float, tol: float = 1e-10, n_start: int = 33, n_max: int = 513) -> JetTensor:
    """``d^k Phi_t(z0)`` for ``2 <= k <= 4`` by the variational integral.

    The spectral node count doubles until two successive tensors agree to
    ``tol`` (relative to the tensor size, with a unit floor).

    Raises
    ------
    ValueError
        Unsupported order.
    FlowError
        No convergence by ``n_max`` nodes.
    """
    if not 2 <= k <= 4:
        raise ValueError(f"jet order {k} not supported (2 <= k <= 4)")
    m = p.dim
    if t == 0:
        return JetTensor(k, 0.0, np.zeros((m,) * (k + 1)))
    D = vector_field_tensors(p, cd.z0, k)
    N = n_start
    prev = None
    while N <= n_max:
        cur = _jets_on_nodes(D, cd, t, k, N)[k][-1]
        if prev is not None:
            scale = max(1.0, float(np.max(np.abs(cur))))
            if float(np.max(np.abs(cur - prev))) <= tol * scale:
                return JetTensor(k, float(t), _symmetrize_inputs(cur[None])[0])
        prev = cur
        N = 2 * N - 1
    raise FlowError(f"jet quadrature did not reach tol {tol:g} with {n_max} nodes")


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------

_STENCILS = {
    1: ({1: 0.5, -1: -0.5}, 1),
    2: ({1: 1.0, 0: -2.0, -1: 1.0}, 2),
    3: ({2: 0.5, 1: -1.0, -1: 1.0, -2: -0.5}, 3),
    4: ({2: 1.0, 1: -4.0, 0: 6.0, -1: -4.0, -2: 1.0}, 4),
}


def finite_difference_jet(p: PolySymbol, z0, t: float, v, k: int, tol: float = 1e-13, h: float | None = None) -> np.ndarray:
    """Directional derivative ``d^k/de^k Phi_t(z0 + e v)`` at ``e = 0``.

    Central differences at steps ``h`` and ``h/2`` combined by one Richardson
    step (the stencils are second order).  Default ``h = tol**(1/(k+2))``.
    """
    if k not in _STENCILS:
        raise ValueError("finite differences implemented for 1 <= k <= 4")
    z0 = _coords(z0)
    v = np.asarray(v, dtype=float)
    h = tol ** (1.0 / (k + 2)) if h is None else h
    weights, power = _STENCILS[k]
    offsets = sorted(weights)
    pts = [z0 + step * o * v for step in (h, h / 2) for o in offsets]
    res = hamilton_flow_batch(p, np.array(pts), t, tol=tol)
    Z = res.z
    no = len(offsets)

    def stencil(block, step):
        return sum(weights[o] * block[i] for i, o in enumerate(offsets)) / step**power

    d1 = stencil(Z[:no], h)
    d2 = stencil(Z[no:], h / 2)
    return (4 * d2 - d1) / 3
