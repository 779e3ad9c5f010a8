"""Blow-up charts that bring the model trace phase to monomial normal forms.

The model phase on ``R_t x R_+ x S^{m-1}`` is

    Psi(t, r, theta) = t r^2 (Q(theta) + r^{k-2} h1(t, r, theta))
                       + r^k (R(theta) + r Rt(r, theta)).

Near a base point ``theta0`` three coordinate systems are used:

first   (Q(theta0) != 0)            Psi = chi0 chi1^2
second  (Q = 0, R != 0 at theta0)   Psi = chi0 chi2 chi1^2 +- chi1^k
third   (Q = R = 0, independent)    Psi = chi0 chi1^2 chi2 + chi1^k chi3

Sphere coordinates around ``theta0`` are ``theta(eta) = (theta0 + E eta) /
|theta0 + E eta|`` with ``E`` an orthonormal basis of the tangent space,
rotated so that the leading tangent directions follow the gradients of
``Q`` (and ``R``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .rk_cone import HomogForm, HypothesisError

__all__ = ["ModelPhase", "ChartRecord", "ChartReport", "build_chart", "verify_chart", "numerical_jacobian"]


@dataclass(frozen=True)
class ModelPhase:
    """Model trace phase data.

    Parameters
    ----------
    d : int
        Half the dimension of the fixed space (``m = 2 d``).
    k : int
        Degree of ``R``.
    Q : ndarray
        Symmetric ``m x m`` matrix of the quadratic form (``t``-independent).
    R : HomogForm
        Leading homogeneous term of degree ``k``.
    h1, Rt : callable, optional
        Perturbations ``h1(t, r, theta)`` and ``Rt(r, theta)`` evaluated on
        arrays (``theta`` of shape ``(N, m)``); zero when omitted.
    """

    d: int
    k: int
    Q: np.ndarray
    R: HomogForm
    h1: Callable | None = None
    Rt: Callable | None = None

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (2 * self.d, 2 * self.d):
            raise ValueError("Q must be 2d x 2d")
        if abs(np.linalg.det(Q)) == 0.0:
            raise ValueError("Q must be nondegenerate")
        if self.R.degree != self.k or self.R.dim != 2 * self.d:
            raise ValueError("R must be homogeneous of degree k on R^{2d}")
        object.__setattr__(self, "Q", 0.5 * (Q + Q.T))

    @property
    def m(self) -> int:
        return 2 * self.d

    def q(self, th: np.ndarray) -> np.ndarray:
        return np.einsum("ni,ij,nj->n", th, self.Q, th)

    def h(self, t, r, th) -> np.ndarray:
        return np.zeros(len(th)) if self.h1 is None else np.asarray(self.h1(t, r, th), dtype=float)

    def rt(self, r, th) -> np.ndarray:
        return np.zeros(len(th)) if self.Rt is None else np.asarray(self.Rt(r, th), dtype=float)

    def phase(self, t, r, th) -> np.ndarray:
        """``Psi(t, r, theta)`` for arrays ``t, r`` of shape ``(N,)``."""
        k = self.k
        return t * r**2 * (self.q(th) + r ** (k - 2) * self.h(t, r, th)) + r**k * (self.R(th) + r * self.rt(r, th))


def _tangent_basis(theta0: np.ndarray, lead: list[np.ndarray]) -> np.ndarray:
    """Orthonormal basis of ``theta0^perp`` whose first columns span ``lead``."""
    m = theta0.size
    cols = [theta0]
    for v in lead + list(np.eye(m)):
        v = v - sum((c @ v) * c for c in cols)
        nv = np.linalg.norm(v)
        if nv > 1e-10:
            cols.append(v / nv)
        if len(cols) == m:
            break
    return np.array(cols[1:]).T


@dataclass(frozen=True)
class ChartRecord:
    """A blow-up chart around ``theta0``."""

    kind: str
    theta0: np.ndarray
    E: np.ndarray
    model: ModelPhase
    sign: int
    jacobian: float

    def theta(self, eta: np.ndarray) -> np.ndarray:
        th = self.theta0[None, :] + np.atleast_2d(eta) @ self.E.T
        return th / np.linalg.norm(th, axis=1, keepdims=True)

    def chi(self, t, r, eta) -> np.ndarray:
        """Chart coordinates, shape ``(N, m + 1)``, from ``(t, r, eta)``."""
        md = self.model
        t = np.asarray(t, dtype=float).reshape(-1)
        r = np.asarray(r, dtype=float).reshape(-1)
        eta = np.atleast_2d(eta)
        th = self.theta(eta)
        k = md.k
        Q = md.q(th)
        R = md.R(th)
        h = md.h(t, r, th)
        Rt = md.rt(r, th)
        if self.kind == "first":
            lead = [t * Q + r ** (k - 2) * (t * h + R + r * Rt), r]
            rest = eta
        elif self.kind == "second":
            A = np.abs(R + r * Rt)
            lead = [t * A ** (-2.0 / k), r * A ** (1.0 / k), Q + r ** (k - 2) * h]
            rest = eta[:, 1:]
        else:
            lead = [t, r, Q + r ** (k - 2) * h, R + r * Rt]
            rest = eta[:, 2:]
        return np.column_stack(lead + [rest])

    def normal_form(self, chi: np.ndarray) -> np.ndarray:
        k = self.model.k
        if self.kind == "first":
            return chi[:, 0] * chi[:, 1] ** 2
        if self.kind == "second":
            return chi[:, 0] * chi[:, 2] * chi[:, 1] ** 2 + self.sign * chi[:, 1] ** k
        return chi[:, 0] * chi[:, 1] ** 2 * chi[:, 2] + chi[:, 1] ** k * chi[:, 3]

    def as_dict(self) -> dict:
        return {"kind": self.kind, "theta0": self.theta0.tolist(), "sign": self.sign, "jacobian": self.jacobian}


def build_chart(model: ModelPhase, theta0, kind: str, tol: float = 1e-9) -> ChartRecord:
    """Construct a chart of the requested kind at ``theta0`` (normalized).

    Raises
    ------
    HypothesisError
        If the kind's precondition fails at ``theta0``.
    """
    th0 = np.asarray(theta0, dtype=float)
    th0 = th0 / np.linalg.norm(th0)
    Q0 = float(model.q(th0[None])[0])
    R0 = float(model.R(th0))
    gQ = 2 * model.Q @ th0
    gQ -= (gQ @ th0) * th0
    gR = model.R.gradient(th0)
    gR -= (gR @ th0) * th0
    if kind == "first":
        if abs(Q0) <= tol:
            raise HypothesisError("first chart needs Q(theta0) != 0")
        E = _tangent_basis(th0, [])
        jac = abs(Q0)
        sign = 0
    elif kind == "second":
        if abs(Q0) > tol or abs(R0) <= tol:
            raise HypothesisError("second chart needs Q(theta0) = 0 and R(theta0) != 0")
        E = _tangent_basis(th0, [gQ])
        dq = float(gQ @ E[:, 0])
        jac = abs(R0) ** (-1.0 / model.k) * abs(dq)
        sign = 1 if R0 > 0 else -1
    elif kind == "third":
        if abs(Q0) > tol or abs(R0) > tol:
            raise HypothesisError("third chart needs Q(theta0) = R(theta0) = 0")
        E = _tangent_basis(th0, [gQ, gR])
        minor = np.array([[gQ @ E[:, 0], gQ @ E[:, 1]], [gR @ E[:, 0], gR @ E[:, 1]]])
        jac = abs(float(np.linalg.det(minor)))
        if jac <= tol:
            raise HypothesisError("third chart needs independent gradients of Q and R")
        sign = 0
    else:
        raise ValueError(f"unknown chart kind {kind!r}")
    return ChartRecord(kind, th0, E, model, sign, jac)


def numerical_jacobian(chart: ChartRecord, t: float = 0.0, r: float = 0.0, eta=None, h: float = 1e-3) -> np.ndarray:
    """Central-difference Jacobian of ``chi`` in ``(t, r, eta)`` with one Richardson step."""
    m = chart.model.m
    eta = np.zeros(m - 1) if eta is None else np.asarray(eta, dtype=float)
    x0 = np.concatenate([[t, r], eta])

    def f(x):
        x = np.atleast_2d(x)
        return chart.chi(x[:, 0], x[:, 1], x[:, 2:])

    def d(step):
        cols = []
        for i in range(x0.size):
            e = np.zeros_like(x0)
            e[i] = step
            cols.append((f(x0 + e) - f(x0 - e))[0] / (2 * step))
        return np.array(cols).T

    return (4 * d(h / 2) - d(h)) / 3


@dataclass(frozen=True)
class ChartReport:
    """Outcome of :func:`verify_chart`."""

    kind: str
    residual: float
    max_condition: float
    jacobian_analytic: float
    jacobian_numeric: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "residual": self.residual,
            "max_condition": self.max_condition,
            "jacobian_analytic": self.jacobian_analytic,
            "jacobian_numeric": self.jacobian_numeric,
            "passed": self.passed,
        }


def _default_grid(m: int, radius: float = 0.05):
    ts = np.linspace(0.0, 0.1, 5)
    rs = np.linspace(0.0, 0.1, 5)
    dirs = []
    for i in range(8):
        v = np.zeros(m - 1)
        ang = 2 * np.pi * i / 8
        v[0] = np.cos(ang)
        if m - 1 > 1:
            v[1] = np.sin(ang)
        else:
            v[0] = 1.0 if i % 2 == 0 else -1.0
        if m - 1 > 2:
            v[2 + i % (m - 3)] += 0.5 * np.sin(ang)
        dirs.append(radius * v / np.linalg.norm(v))
    return ts, rs, np.array(dirs)


def verify_chart(chart: ChartRecord, model: ModelPhase | None = None, grid=None, tol: float = 1e-10) -> ChartReport:
    """Max ``|Psi - NF(chi)|`` over a grid near ``(0, 0, theta0)`` and chart conditioning."""
    model = chart.model if model is None else model
    ts, rs, etas = _default_grid(model.m) if grid is None else grid
    T, Rr, idx = np.meshgrid(ts, rs, np.arange(len(etas)), indexing="ij")
    t = T.ravel()
    r = Rr.ravel()
    eta = etas[idx.ravel()]
    th = chart.theta(eta)
    psi = model.phase(t, r, th)
    nf = chart.normal_form(chart.chi(t, r, eta))
    resid = float(np.max(np.abs(psi - nf)))
    conds = []
    for tt in (ts[0], ts[-1]):
        for rr in (rs[0], rs[-1]):
            for e in etas:
                Jn = numerical_jacobian(chart, tt, rr, e, h=1e-4)
                conds.append(np.linalg.cond(Jn))
    Jn0 = numerical_jacobian(chart)
    jn = abs(float(np.linalg.det(Jn0)))
    maxc = float(np.max(conds))
    return ChartReport(chart.kind, resid, maxc, chart.jacobian, jn, resid <= tol and np.isfinite(maxc) and maxc < 1e12)
