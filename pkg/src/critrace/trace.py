"""Leading trace-formula coefficients at a period of the linearized flow.

Two branches, chosen by the restricted Hessian ``Q_T`` on the fixed space:

* definite ``Q_T``: ``gamma ~ C(T) Lambda_T(phi)`` (order ``h^0``);
* indefinite ``Q_T``: ``gamma ~ h^e K_T phihat(T) exp(i T p1(z0))`` with
  ``e = (2 d_T + k - 2)/k - d_T``.

Fourier convention: ``phihat(t) = int phi(s) exp(-i s t) ds``, so
``phi(s) = (1/2pi) int phihat(t) exp(i s t) dt``.

Both the constants as stated and a corrected normalization of ``mu_k`` are
reported for the indefinite branch; the correction (a factor ``-2 pi``)
is the one reproduced by the model-integral oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import special

from . import _kernels
from .oscillatory import ExpBump, SmoothAmplitude, boundary_value, pair_distribution
from .periods import PeriodRecord, find_periods
from .rk_cone import HomogForm, HypothesisError, ConeSamples, check_cone_geometry, cone_integral, cone_samples
from .symbol import CriticalData, PolySymbol

__all__ = [
    "BranchError",
    "DegeneracyError",
    "TestFunction",
    "TraceReport",
    "det_factor",
    "degeneracy_order",
    "regularized_ratio",
    "theorem1",
    "theorem2",
    "theorem1_constant",
    "mu_k_statement",
    "mu_k_corrected",
    "amplitude_at_period",
    "trace_exponent",
    "total_period_model_integral",
]


class BranchError(HypothesisError):
    """The requested theorem does not apply to the period's ``Q_T``."""


class DegeneracyError(ValueError):
    """The linearized flow degenerates at a time other than the declared period."""


# ---------------------------------------------------------------------------
# test function
# ---------------------------------------------------------------------------


class TestFunction:
    """Test function with ``phihat`` an exponential bump on ``[T - delta, T + delta]``.

    ``phi`` is evaluated from the inverse transform tabulated with its
    derivative on a uniform grid and interpolated by cubic Hermite splines.

    Parameters
    ----------
    T_center : float
    delta : float
        Half-width of ``supp phihat``.
    height : float
        ``phihat(T_center)``.
    s_max : float
        Half-width of the tabulation range for ``phi``; ``phi`` is computed
        by direct quadrature beyond it.
    ds : float
        Tabulation step.
    """

    __test__ = False  # not a pytest class

    def __init__(self, T_center: float, delta: float = 0.5, height: float = 1.0, s_max: float = 60.0, ds: float = 0.004):
        if delta <= 0:
            raise ValueError("delta must be positive")
        self.T_center = float(T_center)
        self.delta = float(delta)
        self.height = float(height)
        self._bump = ExpBump(self.T_center, self.delta, self.height)
        self._rules: dict = {}
        self.s_max = float(s_max)
        self.ds = float(ds)
        self._table = None

    @property
    def support(self) -> tuple[float, float]:
        return (self.T_center - self.delta, self.T_center + self.delta)

    def phihat(self, t):
        return self._bump(np.asarray(t, dtype=float))

    def phihat_deriv(self, t, j: int):
        return self._bump.deriv(np.asarray(t, dtype=float), j)

    def profile(self) -> ExpBump:
        return self._bump

    def _quad_phi(self, s, deriv: int = 0):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty(s.shape, dtype=complex)
        order = np.argsort(np.abs(s))
        for i in range(0, s.size, 4096):
            idx = order[i : i + 4096]
            blk = s[idx]
            # Gauss-Legendre resolves exp(i s t) over the support with ~0.7 |s| delta nodes
            nodes, weights = self._rule(int(0.7 * np.max(np.abs(blk)) * self.delta))
            t = self.T_center + self.delta * nodes
            w = self.delta * weights * self.phihat(t) * (1j * t) ** deriv
            out[idx] = np.exp(1j * np.outer(blk, t)) @ w
        return out / (2 * np.pi)

    def _rule(self, extra: int):
        n = 160 + 32 * ((extra + 31) // 32)
        if n not in self._rules:
            self._rules[n] = np.polynomial.legendre.leggauss(n)
        return self._rules[n]

    def phi_direct(self, s):
        """``phi(s)`` by Gauss-Legendre quadrature of the inverse transform."""
        return self._quad_phi(s)

    def _ensure_table(self):
        if self._table is None:
            n = int(round(2 * self.s_max / self.ds)) + 1
            grid = -self.s_max + self.ds * np.arange(n)
            self._table = (grid[0], np.ascontiguousarray(self._quad_phi(grid)), np.ascontiguousarray(self._quad_phi(grid, 1)))
        return self._table

    def phi(self, s):
        """``phi(s)``: Hermite interpolation inside the table, quadrature outside."""
        s = np.asarray(s, dtype=float)
        flat = s.reshape(-1)
        x0, vals, ders = self._ensure_table()
        out = np.asarray(_kernels.hermite_eval(x0, self.ds, vals, ders, flat), dtype=complex)
        outside = np.abs(flat) > self.s_max
        if np.any(outside):
            out[outside] = self._quad_phi(flat[outside])
        return out.reshape(s.shape)

    def scaled(self, c: float) -> "TestFunction":
        return TestFunction(self.T_center, self.delta, self.height * c, self.s_max, self.ds)


# ---------------------------------------------------------------------------
# determinant factor and regularized ratio
# ---------------------------------------------------------------------------


def det_factor(cd: CriticalData, t: float) -> float:
    """``|det(Id - dPhi_t(z0))|^{1/2}`` from the closed block formulas.

    Elliptic block: ``2 - 2 cos(w t)``; hyperbolic block: ``2 - 2 cosh(w t)``.
    """
    t = float(t)
    vals = np.where(cd.sigma == 1, 2 - 2 * np.cos(cd.w * t), 2 - 2 * np.cosh(cd.w * t))
    return float(np.sqrt(np.abs(np.prod(vals))))


def degeneracy_order(cd: CriticalData, t: float, tol: float = 1e-9) -> int:
    """Number of blocks for which ``dPhi_t(z0)`` has the eigenvalue 1 (``d_t``)."""
    ell = cd.sigma == 1
    ph = np.mod(cd.w * t / (2 * np.pi) + 0.5, 1.0) - 0.5
    return int(np.sum(ell & (np.abs(ph) <= tol * max(1.0, abs(t)))))


def _returning_blocks(cd: CriticalData, T: float) -> np.ndarray:
    ell = cd.sigma == 1
    ph = np.mod(cd.w * T / (2 * np.pi) + 0.5, 1.0) - 0.5
    return ell & (np.abs(ph) <= 1e-9 * max(1.0, abs(T)))


def regularized_ratio(cd: CriticalData, T: float, t, check: bool = True):
    """Continuous extension of ``(t - T)^{d_T} / |det(Id - dPhi_t(z0))|^{1/2}`` through ``t = T``.

    Each returning elliptic block contributes ``1 / (|w| sinc(w (t - T) / 2 pi))``
    (its analytic form, equal to the quotient for ``t > T``); the remaining
    blocks contribute ``|2 - 2 cos(w t)|^{-1/2}`` or ``|2 - 2 cosh(w t)|^{-1/2}``.

    Raises
    ------
    DegeneracyError
        If a non-returning block degenerates at some requested ``t``
        (``t`` is a point of larger degeneracy than ``T``).
    """
    t = np.asarray(t, dtype=float)
    ret = _returning_blocks(cd, T)
    out = np.ones(t.shape)
    for j in range(cd.n):
        w = cd.w[j]
        if ret[j]:
            out = out / (abs(w) * np.sinc(w * (t - T) / (2 * np.pi)))
        elif cd.sigma[j] == 1:
            v = 2 - 2 * np.cos(w * t)
            if check and np.any(v <= 1e-12):
                raise DegeneracyError(f"block {j} degenerates inside the requested range")
            out = out / np.sqrt(np.abs(v))
        else:
            v = np.abs(2 - 2 * np.cosh(w * t))
            if check and np.any(v <= 1e-300):
                raise DegeneracyError("hyperbolic block degenerates at t = 0")
            out = out / np.sqrt(v)
    return out


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------


def theorem1_constant(d_T: int, sgn_qT: int, det_qT: float, sign_QT: int) -> complex:
    """``C(T) = -1/2 exp(i pi sgn(q_T)/4) / |det q_T|^{1/2} exp(i pi (d_T - 1) sign(Q_T)/2) Gamma(d_T)``."""
    return complex(
        -0.5
        * np.exp(1j * np.pi * sgn_qT / 4)
        / math.sqrt(abs(det_qT))
        * np.exp(1j * np.pi * (d_T - 1) * sign_QT / 2)
        * math.gamma(d_T)
    )


def mu_k_statement(k: int, d_T: int, sgn_qT: int, det_qT: float, gamma_arg: float | None = None) -> complex:
    """``mu_k = -(1/k) Gamma((2 d_T - 2)/k) exp(i pi sgn(q_T)/4) / (|det q_T|^{1/2} (2 pi)^{d_T + 1})``.

    ``gamma_arg`` overrides the argument of ``Gamma`` (used to evaluate the
    alternative ``(n - 2)/k``); a pole gives ``inf``.
    """
    g_arg = (2 * d_T - 2) / k if gamma_arg is None else gamma_arg
    g = float(special.gamma(g_arg))
    if not np.isfinite(g):
        return complex(np.inf)
    return complex(-(1.0 / k) * g * np.exp(1j * np.pi * sgn_qT / 4) / (math.sqrt(abs(det_qT)) * (2 * np.pi) ** (d_T + 1)))


def mu_k_corrected(k: int, d_T: int, sgn_qT: int, det_qT: float) -> complex:
    """``mu_k`` with the normalization reproduced by the model oracle: ``-2 pi`` times the stated one."""
    return -2 * np.pi * mu_k_statement(k, d_T, sgn_qT, det_qT)


def trace_exponent(d_T: int, k: int) -> Fraction:
    """Power of ``h`` in the indefinite branch: ``(2 d_T + k - 2)/k - d_T``."""
    return Fraction(2 * d_T + k - 2, k) - d_T


def amplitude_at_period(p1, phi: TestFunction, T: float) -> complex:
    """``phihat(T) exp(i T p1(z0))``; ``p1`` is a number or a :class:`PolySymbol`."""
    val = p1.subprincipal if isinstance(p1, PolySymbol) else float(p1)
    return complex(float(phi.phihat(T)) * np.exp(1j * T * val))


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass
class TraceReport:
    """Assembled leading coefficients for one period.

    Exactly one branch is populated: ``C_T``/``Lambda_T`` for a definite
    ``Q_T``, ``mu_k``/``K_T`` for an indefinite one.
    """

    period: PeriodRecord
    branch: str
    exponent: Fraction
    amplitude: complex
    C_T: complex | None = None
    Lambda_T: complex | None = None
    mu_k: complex | None = None
    K_T: complex | None = None
    mu_k_corrected: complex | None = None
    K_T_corrected: complex | None = None
    cone: dict | None = None
    gamma_candidates: dict | None = None
    flags: dict = field(default_factory=dict)

    def leading_value(self, h, corrected: bool = False):
        """Leading term of ``gamma_1`` at ``h``."""
        h = np.asarray(h, dtype=float)
        if self.branch == "definite":
            return self.C_T * self.Lambda_T * np.ones(h.shape)
        K = self.K_T_corrected if corrected else self.K_T
        return h ** float(self.exponent) * K * self.amplitude

    def as_dict(self) -> dict:
        def c(z):
            return None if z is None else {"re": z.real, "im": z.imag, "abs": abs(z)}

        out = {
            "period": self.period.as_dict(),
            "branch": self.branch,
            "exponent": str(self.exponent),
            "amplitude": c(self.amplitude),
            "flags": dict(self.flags),
        }
        if self.branch == "definite":
            out.update({"C_T": c(self.C_T), "Lambda_T": c(self.Lambda_T), "method": "closed-form+quadrature"})
        else:
            out.update(
                {
                    "mu_k": c(self.mu_k),
                    "K_T": c(self.K_T),
                    "mu_k_corrected": c(self.mu_k_corrected),
                    "K_T_corrected": c(self.K_T_corrected),
                    "cone": self.cone,
                    "gamma_candidates": self.gamma_candidates,
                    "method": "closed-form+monte-carlo",
                }
            )
        return out


def _check_support(cd: CriticalData, period: PeriodRecord, phi: TestFunction):
    lo, hi = phi.support
    if not lo < period.T < hi:
        raise ValueError("the period must lie inside supp phihat")
    others = [r.T for r in find_periods(cd, max(lo, 1e-9), hi) if abs(r.T - period.T) > 1e-9 * max(1.0, period.T)]
    if others:
        raise DegeneracyError(f"supp phihat contains other periods: {others}")


def theorem1(cd: CriticalData, period: PeriodRecord, phi: TestFunction, p1: float = 0.0, tol: float = 1e-10) -> TraceReport:
    """Definite branch: ``C(T)`` and ``Lambda_T(phi)``.

    ``Lambda_T = (2 pi)^{-1-d_T} <(t - T - i0)^{-d_T}, ratio(t) phihat(t) exp(i t p1)>``.

    Raises
    ------
    BranchError
        If ``Q_T`` is indefinite.
    """
    if period.cls == "indefinite":
        raise BranchError("theorem1 needs a definite Q_T")
    _check_support(cd, period, phi)
    d = period.d_T
    T = period.T
    C = theorem1_constant(d, period.sgn_qT, period.det_qT, period.sign_QT)
    lo, hi = phi.support

    def f(t):
        t = np.asarray(t, dtype=float)
        inside = (t > lo) & (t < hi)
        tt = np.where(inside, t, T)
        val = regularized_ratio(cd, T, tt, check=False) * phi.phihat(tt) * np.exp(1j * tt * p1)
        return np.where(inside, val, 0.0)

    amp = SmoothAmplitude.from_callable(f, 1, [(lo, hi)], order=max(d, 2))
    pairing = pair_distribution(boundary_value(d, -1, T), amp, tol)
    Lam = pairing / (2 * np.pi) ** (1 + d)
    flags = dict(period.flags)
    flags["branch"] = "definite"
    return TraceReport(
        period=period,
        branch="definite",
        exponent=Fraction(0),
        amplitude=amplitude_at_period(p1, phi, T),
        C_T=C,
        Lambda_T=complex(Lam),
        flags=flags,
    )


def theorem2(
    cd: CriticalData,
    period: PeriodRecord,
    R: HomogForm,
    phi: TestFunction,
    N_cone: int = 200000,
    seed: int = 0,
    p1: float = 0.0,
    samples: ConeSamples | None = None,
) -> TraceReport:
    """Indefinite branch: ``mu_k(T)``, the cone integral and ``K_T``.

    Raises
    ------
    BranchError
        If ``Q_T`` is definite or ``n < 2``.
    HypothesisError
        If ``R`` has non-transversal zeros on the cone.
    """
    if period.cls != "indefinite":
        raise BranchError("theorem2 needs an indefinite Q_T")
    if cd.n < 2:
        raise BranchError("theorem2 needs n >= 2")
    _check_support(cd, period, phi)
    d = period.d_T
    k = R.degree
    geo = check_cone_geometry(period.Q_T, R, seed=seed)
    if not geo.passed:
        raise HypothesisError("R_k has non-transversal zeros on the cone")
    smp = samples if samples is not None else cone_samples(period.Q_T, N_cone, seed=seed)
    alpha = (2 * d - 2) / k
    if geo.intersection_empty:
        sgn = 1 if geo.sign_pattern == "positive" else -1
        ci = cone_integral(R, smp, "abs-power", alpha)
        phase = np.exp(1j * np.pi * (d - 1) * sgn / k)
    else:
        sgn = 0
        ci = cone_integral(R, smp, "i0-power", alpha)
        phase = np.exp(1j * np.pi * (d - 1) / k)
    mu = mu_k_statement(k, d, period.sgn_qT, period.det_qT)
    mu_c = mu_k_corrected(k, d, period.sgn_qT, period.det_qT)
    alt = mu_k_statement(k, d, period.sgn_qT, period.det_qT, gamma_arg=(cd.n - 2) / k)
    K = complex(mu * phase * ci.value)
    Kc = complex(mu_c * phase * ci.value)
    flags = dict(period.flags)
    flags.update({"branch": "indefinite", "cone_intersection": "empty" if geo.intersection_empty else "transversal", "sign_R": sgn})
    gamma_candidates = {
        "gamma((2d_T-2)/k)": {"argument": alpha, "value": float(special.gamma(alpha)) if alpha > 0 else None},
        "gamma((n-2)/k)": {"argument": (cd.n - 2) / k, "value": None if not np.isfinite(abs(alt)) else float(special.gamma((cd.n - 2) / k))},
        "selected": "gamma((2d_T-2)/k)",
    }
    cone = ci.as_dict()
    cone.update({"geometry": geo.as_dict(), "samples": int(smp.N), "seed": smp.seed, "sampling": smp.method})
    return TraceReport(
        period=period,
        branch="indefinite",
        exponent=trace_exponent(d, k),
        amplitude=amplitude_at_period(p1, phi, period.T),
        mu_k=mu,
        K_T=K,
        mu_k_corrected=mu_c,
        K_T_corrected=Kc,
        cone=cone,
        gamma_candidates=gamma_candidates,
        flags=flags,
    )


# ---------------------------------------------------------------------------
# model oracle for a total period with d_T = 2
# ---------------------------------------------------------------------------


def total_period_model_integral(
    f_profile,
    c: float,
    k: int,
    lam: float,
    g2=None,
    tol: float = 1e-9,
    sigma_max: float | None = None,
    dsigma: float = 0.025,
):
    """Model phase integral for ``d_T = n = 2`` at a total period.

    ``I(lam) = int_R int_{R^4} exp(i lam (t Q(y) + c |v|^k)) f(t) g2(|v|) dy dt`` with
    ``Q(y) = (|u|^2 - |v|^2)/2``, ``y = (u, v)``.  In polar coordinates on
    each plane and with ``s = lam (rho1^2 - rho2^2)/2`` this becomes

        I = (2 pi)^2 / lam int_0^inf rho g2(rho) exp(i lam c rho^k) Cum(lam rho^2 / 2) drho,
        Cum(s0) = int_{-s0}^inf F(s) ds,  F(s) = int f(t) exp(i s t) dt.

    ``F`` is tabulated by Gauss-Legendre quadrature, ``Cum`` comes from a
    spline antiderivative, and the ``rho`` integral is done by
    :func:`quad_oscillatory`.

    Parameters
    ----------
    f_profile : Profile
        Compactly supported ``t`` amplitude (the shifted ``phihat``).
    c : float
        Coefficient of ``|v|^k`` (the value of ``R`` on ``|v| = 1``).
    k : int
    lam : float
    g2 : Profile, optional
        Cut-off in ``rho``; defaults to a plateau equal to 1 on ``[0, 0.3]`` and vanishing beyond 0.5.
    """
    from scipy.interpolate import CubicSpline

    from .oscillatory import Plateau, quad_oscillatory

    g2 = Plateau(0.0, 0.3, 0.5) if g2 is None else g2
    lo, hi = f_profile.support
    if sigma_max is None:
        # F decays on the scale 1/(hi - lo); 1000 suffices for a unit-width support
        sigma_max = 1000.0 / max(hi - lo, 1.0)
    x, w = np.polynomial.legendre.leggauss(max(200, int(0.6 * sigma_max * (hi - lo)) + 100))
    tn = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x
    wn = 0.5 * (hi - lo) * w * f_profile(tn)
    sig = np.arange(-sigma_max, sigma_max + dsigma / 2, dsigma)
    F = np.empty(sig.size, dtype=complex)
    for i in range(0, sig.size, 8192):
        F[i : i + 8192] = np.exp(1j * np.outer(sig[i : i + 8192], tn)) @ wn
    spl = CubicSpline(sig, F).antiderivative()
    total = complex(spl(sigma_max))

    def cum(s0):
        s0 = np.minimum(np.asarray(s0, dtype=float), sigma_max)
        return total - spl(-s0)

    def amp(rho):
        return rho * g2(rho) * cum(lam * rho**2 / 2)

    A = SmoothAmplitude.from_callable(amp, 1, [(0.0, g2.support[1])])
    val = quad_oscillatory(lambda X: c * X[:, 0] ** k, A, lam, tol)
    return (2 * np.pi) ** 2 / lam * val
