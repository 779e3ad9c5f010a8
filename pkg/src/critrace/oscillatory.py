"""Model oscillatory integrals: amplitudes, distributional pairings, asymptotic
expansions and a brute-force quadrature oracle.

Fourier convention: ``F(g)(xi) = int g(x) exp(-i x xi) dx``.  With it

    F(x_-^alpha)(xi) = Gamma(alpha + 1) exp(i pi (alpha + 1) / 2) (xi + i0)^(-alpha-1).

Expansions are stored as decay orders: a term ``(order, c)`` stands for
``c * lam**(-order)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

__all__ = [
    "Profile",
    "ExpBump",
    "Plateau",
    "Gaussian",
    "Polynomial1D",
    "CallableProfile",
    "ProductProfile",
    "SmoothAmplitude",
    "Expansion",
    "Distribution",
    "boundary_value",
    "ft_minus_power",
    "pair_distribution",
    "expand_rk",
    "expand_t_rk",
    "expand_second_nf",
    "expand_third_nf",
    "quad_oscillatory",
    "QuadResult",
    "fit_scaling",
    "fit_with_corrections",
    "second_form_gaussian_oracle",
    "third_form_gaussian_oracle",
    "FitRejected",
    "QuadratureError",
    "DerivativeOrderError",
]


class DerivativeOrderError(ValueError):
    """An amplitude does not provide the derivative order an operation needs."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach its tolerance within budget."""


class FitRejected(ValueError):
    """Scaling data not suitable for a power-law fit."""


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


def _fd_weights(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference offsets and weights for the ``order``-th derivative."""
    p = order // 2 + 2
    offs = np.arange(-p, p + 1, dtype=float)
    V = np.vander(offs, increasing=True).T
    rhs = np.zeros(offs.size)
    rhs[order] = math.factorial(order)
    return offs, np.linalg.solve(V, rhs)


def _fd_step(order: int, scale: float, tol: float) -> float:
    return scale * tol ** (1.0 / (order + 2))


def _fd_derivative(func: Callable, alpha: Sequence[int], xs: Sequence[np.ndarray], steps: Sequence[float]):
    """Tensor-product central differences of ``func(*xs)`` with one Richardson step."""

    def once(scale):
        total = 0.0
        axes = [i for i, a in enumerate(alpha) if a > 0]
        if not axes:
            return func(*xs)
        stencils = []
        for i in axes:
            offs, w = _fd_weights(alpha[i])
            stencils.append((offs * steps[i] * scale, w / (steps[i] * scale) ** alpha[i]))
        for combo in itertools.product(*[range(len(s[0])) for s in stencils]):
            wprod = 1.0
            shifted = list(xs)
            for (offs, w), axis, idx in zip(stencils, axes, combo):
                wprod *= w[idx]
                shifted[axis] = xs[axis] + offs[idx]
            if wprod != 0.0:
                total = total + wprod * func(*shifted)
        return total

    # central stencils here are 6th order for even and 4th order for odd derivative orders
    acc = 4 if any(a % 2 for a in alpha if a > 0) else 6
    d1 = once(1.0)
    d2 = once(0.5)
    fac = 2.0**acc
    return (fac * d2 - d1) / (fac - 1.0)


# ---------------------------------------------------------------------------
# one-dimensional profiles
# ---------------------------------------------------------------------------


class Profile:
    """Smooth function of one variable with derivative evaluator."""

    support: tuple[float, float] = (-np.inf, np.inf)
    fd_tol: float = 1e-10

    def __call__(self, x):
        raise NotImplementedError

    def deriv(self, x, j: int):
        if j == 0:
            return self(np.asarray(x, dtype=float))
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        scale = min(1.0, 0.25 * (hi - lo)) if np.isfinite(hi - lo) else 1.0
        return _fd_derivative(lambda y: self(y), (j,), (x,), (_fd_step(j, scale, self.fd_tol),))


class ExpBump(Profile):
    """``height * exp(1 - 1/(1 - u^2))`` for ``u = (x - center)/radius`` in (-1, 1), else 0.

    Derivatives of every order are analytic.
    """

    def __init__(self, center: float = 0.0, radius: float = 1.0, height: float = 1.0):
        self.center = float(center)
        self.radius = float(radius)
        self.height = float(height)
        self.support = (self.center - self.radius, self.center + self.radius)

    def _u(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.radius

    def __call__(self, x):
        u = self._u(x)
        out = np.zeros_like(u)
        m = np.abs(u) < 1
        out[m] = self.height * np.exp(1.0 - 1.0 / (1.0 - u[m] ** 2))
        return out

    def deriv(self, x, j: int):
        u = np.atleast_1d(self._u(x))
        out = np.zeros(u.shape)
        m = np.abs(u) < 1 - 2e-3
        if not np.any(m):
            return out.reshape(np.shape(self._u(x)))
        um = u[m]
        g = [None]
        for q in range(1, j + 1):
            g.append(-0.5 * math.factorial(q) * ((1 - um) ** (-q - 1) + (-1) ** q * (1 + um) ** (-q - 1)))
        b = [self.height * np.exp(1.0 - 1.0 / (1.0 - um**2))]
        for i in range(j):
            b.append(sum(math.comb(i, q) * g[q + 1] * b[i - q] for q in range(i + 1)))
        out[m] = b[j] / self.radius**j
        return out.reshape(np.shape(self._u(x)))


def _psi(s):
    out = np.zeros_like(s)
    m = s > 0
    out[m] = np.exp(-1.0 / s[m])
    return out


class Plateau(Profile):
    """Equal to ``height`` on ``|x - center| <= flat`` and 0 beyond ``outer``.

    The transition is the standard ``exp(-1/s)`` smooth step.  Derivatives
    are exact (zero) on the flat part and outside, finite differences on the
    transition band.
    """

    def __init__(self, center: float = 0.0, flat: float = 1.0, outer: float = 2.0, height: float = 1.0):
        if not 0 <= flat < outer:
            raise ValueError("need 0 <= flat < outer")
        self.center = float(center)
        self.flat = float(flat)
        self.outer = float(outer)
        self.height = float(height)
        self.support = (self.center - self.outer, self.center + self.outer)

    def __call__(self, x):
        y = (np.abs(np.asarray(x, dtype=float) - self.center) - self.flat) / (self.outer - self.flat)
        y = np.atleast_1d(y)
        a = _psi(1 - y)
        b = _psi(y)
        out = np.where(y <= 0, 1.0, np.where(y >= 1, 0.0, a / np.where(a + b > 0, a + b, 1.0)))
        return (self.height * out).reshape(np.shape(np.asarray(x)))

    def deriv(self, x, j: int):
        if j == 0:
            return self(x)
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        d = np.abs(flat - self.center)
        band = (d > self.flat) & (d < self.outer)
        out = np.zeros(flat.shape)
        if np.any(band):
            step = _fd_step(j, 0.25 * (self.outer - self.flat), self.fd_tol)
            out[band] = _fd_derivative(lambda y: self(y), (j,), (flat[band],), (step,))
        return out.reshape(x.shape)


class Gaussian(Profile):
    """``height * exp(-((x - center)/width)^2)``; support cut at 12 widths."""

    def __init__(self, center: float = 0.0, width: float = 1.0, height: float = 1.0):
        self.center = float(center)
        self.width = float(width)
        self.height = float(height)
        self.support = (self.center - 12 * self.width, self.center + 12 * self.width)

    def __call__(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.width
        return self.height * np.exp(-(u**2))

    def deriv(self, x, j: int):
        u = (np.asarray(x, dtype=float) - self.center) / self.width
        return self.height * (-1) ** j * special.eval_hermite(j, u) * np.exp(-(u**2)) / self.width**j


class Polynomial1D(Profile):
    """Polynomial ``sum c_i x^i`` (no compact support on its own)."""

    def __init__(self, coeffs):
        self.poly = np.polynomial.Polynomial(np.asarray(coeffs, dtype=complex if np.iscomplexobj(coeffs) else float))

    def __call__(self, x):
        return self.poly(np.asarray(x, dtype=float))

    def deriv(self, x, j: int):
        return self.poly.deriv(j)(np.asarray(x, dtype=float)) if j else self(x)


class CallableProfile(Profile):
    """Arbitrary vectorized callable, derivatives by finite differences unless supplied."""

    def __init__(self, func: Callable, support=(-np.inf, np.inf), deriv: Callable | None = None, fd_tol: float = 1e-10):
        self.func = func
        self.support = tuple(float(s) for s in support)
        self._deriv = deriv
        self.fd_tol = fd_tol

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def deriv(self, x, j: int):
        if self._deriv is not None:
            return self._deriv(np.asarray(x, dtype=float), j)
        return super().deriv(x, j)


class ProductProfile(Profile):
    """Pointwise product of profiles; derivatives by the Leibniz rule."""

    def __init__(self, *factors: Profile):
        self.factors = factors
        lo = max(f.support[0] for f in factors)
        hi = min(f.support[1] for f in factors)
        self.support = (lo, hi)

    def __call__(self, x):
        out = 1.0
        for f in self.factors:
            out = out * f(x)
        return out

    def deriv(self, x, j: int):
        if len(self.factors) == 1:
            return self.factors[0].deriv(x, j)
        head, tail = self.factors[0], ProductProfile(*self.factors[1:])
        return sum(math.comb(j, i) * head.deriv(x, i) * tail.deriv(x, j - i) for i in range(j + 1))


# ---------------------------------------------------------------------------
# multivariate amplitude
# ---------------------------------------------------------------------------


class SmoothAmplitude:
    """Compactly supported smooth amplitude of 1 to 4 variables.

    Either separable (a product of :class:`Profile` factors times a complex
    constant) or a general vectorized callable whose derivatives come from
    finite differences with step ``tol**(1/(order + 2))``.

    Parameters
    ----------
    arity : int
    factors : sequence of Profile, optional
    func : callable, optional
        ``func(*xs)`` for the non-separable case.
    support : sequence of (lo, hi), optional
        Bounding box; defaults to the factor supports.
    order : int
        Highest derivative order callers may request.
    scale : complex
        Constant prefactor.
    """

    def __init__(self, arity: int, factors=None, func=None, support=None, order: int = 12, scale: complex = 1.0, fd_tol: float = 1e-10, deriv=None):
        if not 1 <= arity <= 4:
            raise ValueError("arity must be between 1 and 4")
        if (factors is None) == (func is None):
            raise ValueError("give exactly one of factors or func")
        self.arity = arity
        self.factors = tuple(factors) if factors is not None else None
        self.func = func
        self.order = int(order)
        self.scale = complex(scale) if np.iscomplexobj(scale) or isinstance(scale, complex) else float(scale)
        self.fd_tol = fd_tol
        self._deriv = deriv
        if self.factors is not None and len(self.factors) != arity:
            raise ValueError("need one factor per variable")
        if support is None:
            if self.factors is None:
                raise ValueError("support bound required for a callable amplitude")
            support = [f.support for f in self.factors]
        self.support = [tuple(float(v) for v in s) for s in support]

    # constructors --------------------------------------------------------
    @classmethod
    def separable(cls, *factors: Profile, scale: complex = 1.0, order: int = 12, support=None) -> "SmoothAmplitude":
        return cls(len(factors), factors=factors, scale=scale, order=order, support=support)

    @classmethod
    def from_callable(cls, func, arity: int, support, order: int = 8, deriv=None, fd_tol: float = 1e-10) -> "SmoothAmplitude":
        return cls(arity, func=func, support=support, order=order, deriv=deriv, fd_tol=fd_tol)

    @classmethod
    def zero(cls, arity: int, support=None) -> "SmoothAmplitude":
        support = support or [(-1.0, 1.0)] * arity
        return cls(arity, factors=[ExpBump()] * arity, scale=0.0, support=support)

    # evaluation ----------------------------------------------------------
    def _args(self, xs):
        if len(xs) == 1 and self.arity > 1:
            X = np.asarray(xs[0], dtype=float)
            xs = tuple(X[..., i] for i in range(self.arity))
        if len(xs) != self.arity:
            raise ValueError(f"expected {self.arity} coordinates")
        return np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in xs])

    def __call__(self, *xs):
        xs = self._args(xs)
        if self.factors is not None:
            out = self.scale
            for f, x in zip(self.factors, xs):
                out = out * f(x)
            return out * np.ones(xs[0].shape)
        return self.scale * self.func(*xs)

    def derivative(self, alpha, *xs):
        """Mixed partial derivative ``d^alpha a`` at the given points."""
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.arity:
            raise ValueError("multi-index length must equal arity")
        if sum(alpha) > self.order:
            raise DerivativeOrderError(f"derivative order {sum(alpha)} exceeds declared order {self.order}")
        xs = self._args(xs)
        if self.factors is not None:
            out = self.scale
            for f, a, x in zip(self.factors, alpha, xs):
                out = out * f.deriv(x, a)
            return out * np.ones(xs[0].shape)
        if self._deriv is not None:
            return self.scale * self._deriv(alpha, *xs)
        steps = []
        for lo, hi in self.support:
            width = hi - lo if np.isfinite(hi - lo) else 4.0
            steps.append(_fd_step(max(alpha), min(1.0, 0.25 * width), self.fd_tol))
        return self.scale * _fd_derivative(self.func, alpha, xs, steps)

    def slice(self, axis: int, at, alpha=None) -> "SmoothAmplitude":
        """One-variable amplitude ``s -> d^alpha a(at with coordinate axis = s)``."""
        alpha = tuple(alpha) if alpha is not None else (0,) * self.arity
        at = [float(v) for v in at]
        parent = self

        def point(s):
            s = np.asarray(s, dtype=float)
            return [s if i == axis else np.full(s.shape, at[i]) for i in range(parent.arity)]

        def func(s):
            return parent.derivative(alpha, *point(s))

        def deriv(beta, s):
            a = list(alpha)
            a[axis] += beta[0]
            return parent.derivative(tuple(a), *point(s))

        return SmoothAmplitude(1, func=func, support=[self.support[axis]], order=self.order - sum(alpha), deriv=deriv)

    def values_at_origin(self, alpha) -> complex:
        return complex(np.asarray(self.derivative(alpha, *[np.zeros(1)] * self.arity)).reshape(-1)[0])

    def is_zero(self) -> bool:
        return self.scale == 0


# ---------------------------------------------------------------------------
# expansions
# ---------------------------------------------------------------------------


@dataclass
class Expansion:
    """Asymptotic series ``sum_i c_i lam**(-order_i) + O(lam**(-remainder_order))``.

    ``orders`` are strictly increasing; ``exponents`` gives the matching
    (negative) powers of ``lam``.
    """

    terms: list = field(default_factory=list)
    remainder_order: Fraction = Fraction(0)
    remainder_note: str = ""

    def __post_init__(self):
        merged: dict[Fraction, complex] = {}
        for o, c in self.terms:
            merged[Fraction(o)] = merged.get(Fraction(o), 0.0) + complex(c)
        self.terms = [(o, merged[o]) for o in sorted(merged)]
        self.remainder_order = Fraction(self.remainder_order)

    @property
    def orders(self) -> list[Fraction]:
        return [o for o, _ in self.terms]

    @property
    def exponents(self) -> list[Fraction]:
        return [-o for o, _ in self.terms]

    def is_zero(self) -> bool:
        return all(c == 0 for _, c in self.terms)

    def leading(self) -> tuple[Fraction, complex] | None:
        for o, c in self.terms:
            if c != 0:
                return o, c
        return None

    def partial_sum(self, lam, nterms: int | None = None):
        lam = np.asarray(lam, dtype=float)
        out = np.zeros(lam.shape, dtype=complex)
        for o, c in self.terms[:nterms]:
            out = out + c * lam ** (-float(o))
        return out if out.ndim else complex(out)

    def as_dict(self) -> dict:
        return {
            "terms": [{"exponent": str(-o), "re": c.real, "im": c.imag} for o, c in self.terms],
            "remainder_exponent": str(-self.remainder_order),
            "remainder_note": self.remainder_note,
        }


# ---------------------------------------------------------------------------
# distributions and pairings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Distribution:
    """``prefactor * (x - center + i0*side)^(-power)`` with ``side`` = +1 or -1."""

    power: float
    side: int
    center: float = 0.0
    prefactor: complex = 1.0

    def __post_init__(self):
        if self.side not in (1, -1):
            raise ValueError("side must be +1 or -1")
        if self.power <= 0:
            raise ValueError("power must be positive")


def boundary_value(m: float, side: int = -1, center: float = 0.0) -> Distribution:
    """``(x - center + i0*side)^(-m)``; ``side=-1`` is ``(x - i0)^(-m)``."""
    return Distribution(float(m), side, center)


def ft_minus_power(alpha: float) -> Distribution:
    """``F(x_-^alpha)`` written as a multiple of ``(xi + i0)^(-alpha-1)`` (alpha > -1)."""
    if alpha <= -1:
        raise ValueError("alpha must exceed -1")
    pref = special.gamma(alpha + 1) * np.exp(1j * np.pi * (alpha + 1) / 2)
    return Distribution(alpha + 1.0, 1, 0.0, pref)


def _gl_panels(g, a: float, b: float, panels: int, order: int = 20):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    X = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    W = (half[:, None] * w[None, :]).ravel()
    return np.sum(W * g(X))


def _pv_symmetric(g, B: float, tol: float = 1e-12) -> complex:
    """``PV int_{-B}^{B} g(x)/x dx`` via the odd part on matched panels."""

    def odd(x):
        return (g(x) - g(-x)) / x

    prev = _gl_panels(odd, 0.0, B, 16)
    panels = 32
    while panels <= 4096:
        cur = _gl_panels(odd, 0.0, B, panels)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return complex(cur)
        prev = cur
        panels *= 2
    return complex(cur)


def _weighted_halfline(g, beta: float, B: float, tol: float) -> complex:
    """``int_0^B x^(-beta) g(x) dx`` for ``0 < beta < 1`` (algebraic-weight quadrature)."""
    out = 0.0 + 0.0j
    for part in (np.real, np.imag):
        val, _ = integrate.quad(lambda x: float(part(g(np.array([x]))[0])), 0.0, B, weight="alg", wvar=(-beta, 0.0), limit=400, epsabs=tol * 1e-2, epsrel=tol)
        out += val if part is np.real else 1j * val
    return out


def pair_distribution(dist: Distribution, f: SmoothAmplitude | Profile, tol: float = 1e-10) -> complex:
    """Pair a boundary-value distribution with a compactly supported function.

    Integer powers use ``<(x -+ i0)^(-m), f> = <(x -+ i0)^(-1), f^(m-1)>/(m-1)!``
    and ``<(x -+ i0)^(-1), g> = PV int g/x +- i pi g(0)``.  Non-integer powers
    use ``(x + i0*s)^(-b) = x_+^(-b) + exp(-i pi b s) x_-^(-b)`` after lowering
    ``b`` below 1 with ``<(x + i0 s)^(-b), f> = <(x + i0 s)^(-(b-1)), f'>/(b-1)``.

    Raises
    ------
    DerivativeOrderError
        If ``f`` cannot supply the needed derivatives.
    """
    if isinstance(f, Profile):
        prof = f
        f = SmoothAmplitude(1, factors=[prof])
    if f.arity != 1:
        raise ValueError("pairing needs a one-variable function")
    if f.is_zero() or dist.prefactor == 0:
        return 0.0j
    lo, hi = f.support[0]
    c = dist.center
    B = max(hi - c, c - lo)
    if not np.isfinite(B) or B <= 0:
        raise ValueError("pairing needs a finite support bound around the center")
    beta = dist.power
    m_int = round(beta)
    if abs(beta - m_int) < 1e-12:
        m = int(m_int)
        if m - 1 > f.order:
            raise DerivativeOrderError(f"need {m - 1} derivatives, amplitude declares {f.order}")

        def g(x):
            return np.asarray(f.derivative((m - 1,), c + x), dtype=complex)

        pv = _pv_symmetric(g, B, tol)
        g0 = complex(g(np.zeros(1))[0])
        val = (pv - dist.side * 1j * np.pi * g0) / math.factorial(m - 1)
        return complex(dist.prefactor * val)
    q = int(math.floor(beta))
    if q > f.order:
        raise DerivativeOrderError(f"need {q} derivatives, amplitude declares {f.order}")
    b = beta - q
    fac = 1.0
    for i in range(1, q + 1):
        fac /= beta - i

    def g(x):
        return np.asarray(f.derivative((q,), c + x), dtype=complex)

    plus = _weighted_halfline(g, b, hi - c, tol) if hi > c else 0.0
    minus = _weighted_halfline(lambda x: g(-x), b, c - lo, tol) if lo < c else 0.0
    val = plus + np.exp(-1j * np.pi * b * dist.side) * minus
    return complex(dist.prefactor * fac * val)


# ---------------------------------------------------------------------------
# asymptotic expansions
# ---------------------------------------------------------------------------


def _fresnel_factor(j: int, k: int, sign: int = 1) -> complex:
    """``(1/k) Gamma((j+1)/k) exp(i sign pi (j+1)/(2k))``: weight of ``a^(j)(0)/j!``."""
    return special.gamma((j + 1) / k) * np.exp(1j * sign * np.pi * (j + 1) / (2 * k)) / k


def expand_rk(a: SmoothAmplitude | Profile, k: int, N: int, sign: int = 1) -> Expansion:
    """Expansion of ``int_0^inf exp(i sign lam r^k) a(r) dr`` as ``lam -> inf``.

    Terms ``lam^{-(j+1)/k}`` with coefficients
    ``(1/k) Gamma((j+1)/k) exp(i sign pi (j+1)/(2k)) a^(j)(0)/j!`` for
    ``j = 0..N`` (residues of the Mellin transform).
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if isinstance(a, Profile):
        a = SmoothAmplitude(1, factors=[a])
    if N > a.order:
        raise DerivativeOrderError(f"need {N} derivatives, amplitude declares {a.order}")
    terms = []
    if not a.is_zero():
        for j in range(N + 1):
            dj = a.values_at_origin((j,))
            if dj != 0:
                terms.append((Fraction(j + 1, k), _fresnel_factor(j, k, sign) * dj / math.factorial(j)))
    return Expansion(terms, Fraction(N + 2, k), "")


def _lemma_t_coefficient(g: SmoothAmplitude, l: int, k: int, tol: float) -> complex:
    """``(1/k) <F(x_-^{(l+1-k)/k}), g>``, with ``g`` already divided by ``l!``."""
    return pair_distribution(ft_minus_power((l + 1 - k) / k), g, tol) / k


def expand_t_rk(a: SmoothAmplitude, k: int, N: int, tol: float = 1e-10) -> Expansion:
    """Expansion of ``int_R int_0^inf exp(i lam t r^k) a(t, r) dr dt``.

    The coefficient of ``lam^{-(l+1)/k}`` is
    ``(1/k)(1/l!) <F(x_-^{(l+1-k)/k}), d_r^l a(., 0)>`` for ``l = 0..N``.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if a.arity != 2:
        raise ValueError("amplitude must depend on (t, r)")
    if N > a.order:
        raise DerivativeOrderError(f"need {N} r-derivatives, amplitude declares {a.order}")
    terms = []
    if not a.is_zero():
        for l in range(N + 1):
            g = a.slice(0, (0.0, 0.0), (0, l))
            g.scale = 1.0 / math.factorial(l)
            c = _lemma_t_coefficient(g, l, k, tol)
            if abs(c) > 0:
                terms.append((Fraction(l + 1, k), c))
    return Expansion(terms, Fraction(N + 2, k), "")


def _nf_check(k: int, n: int):
    if k <= 2:
        raise ValueError("second and third normal forms need k >= 3")
    if n < 2:
        raise ValueError("n must be at least 2")


def expand_second_nf(a: SmoothAmplitude, k: int, n: int, sign: int = 1) -> Expansion:
    """Expansion of the second normal-form integral

        I2(lam) = int_0^inf int_R^2 exp(i lam (t r^2 v + sign r^k)) a(t, r, v) dt dv r^(2n-1) dr.

    ``I2 = sum_{j <= n-2} J_j + O(lam^-n log lam)`` with
    ``J_j = lam^-(1+j) int_0^inf exp(i sign lam r^k) a_j(r) r^(2n-3-2j) dr`` and
    ``a_j(r) = 2 pi i^j / j! (d_t d_v)^j a(0, r, 0)``; each ``J_j`` is
    expanded with the residue formula.  Leading term:
    ``(2 pi / k) Gamma((2n-2)/k) exp(i sign pi (n-1)/k) a(0,0,0) lam^{-(2n+k-2)/k}``.
    """
    _nf_check(k, n)
    if a.arity != 3:
        raise ValueError("amplitude must depend on (t, r, v)")
    terms = []
    if not a.is_zero():
        for j in range(n - 1):
            p = 2 * n - 3 - 2 * j
            l = p
            while Fraction(1 + j) + Fraction(l + 1, k) < n:
                q = l - p
                if 2 * j + q > a.order:
                    raise DerivativeOrderError("amplitude derivative order too low for this expansion")
                aj = 2 * np.pi * 1j**j / math.factorial(j) * a.values_at_origin((j, q, j))
                coef = _fresnel_factor(l, k, sign) * aj / math.factorial(q)
                if coef != 0:
                    terms.append((Fraction(1 + j) + Fraction(l + 1, k), coef))
                l += 1
    return Expansion(terms, Fraction(n), "logarithmic factor: O(lam^-n log lam)")


def expand_third_nf(a: SmoothAmplitude, k: int, n: int, tol: float = 1e-10) -> Expansion:
    """Expansion of the third normal-form integral

        I3(lam) = int_0^inf int_R^3 exp(i lam (t r^2 v + r^k s)) a(t, r, v, s) dt dv ds r^(2n-1) dr.

    ``K_j = lam^-(1+j) int int exp(i lam r^k s) a_j(r, s) r^(2n-3-2j) dr ds`` with
    ``a_j(r, s) = 2 pi i^j / j! (d_t d_v)^j a(0, r, 0, s)``, each expanded in
    the ``(s, r)`` variables.  Leading term:
    ``(2 pi / k) <F(x_-^{(2n-2-k)/k}), a(0,0,0,.)> lam^{-(2n+k-2)/k}``.
    """
    _nf_check(k, n)
    if a.arity != 4:
        raise ValueError("amplitude must depend on (t, r, v, s)")
    terms = []
    if not a.is_zero():
        for j in range(n - 1):
            p = 2 * n - 3 - 2 * j
            l = p
            while Fraction(1 + j) + Fraction(l + 1, k) < n:
                q = l - p
                g = a.slice(3, (0.0, 0.0, 0.0, 0.0), (j, q, j, 0))
                g.scale = 2 * np.pi * 1j**j / math.factorial(j) / math.factorial(q)
                coef = _lemma_t_coefficient(g, l, k, tol)
                if coef != 0:
                    terms.append((Fraction(1 + j) + Fraction(l + 1, k), coef))
                l += 1
    return Expansion(terms, Fraction(n), "logarithmic factor: O(lam^-n log lam)")


# ---------------------------------------------------------------------------
# brute-force quadrature oracle
# ---------------------------------------------------------------------------

_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


@dataclass(frozen=True)
class QuadResult:
    value: complex
    error: float
    evaluations: int


def _adaptive_gk(F, lo: float, hi: float, n0: int, atol: float, max_panels: int, noise: float = 50 * np.finfo(float).eps):
    """Vectorized adaptive G7/K15 quadrature.

    A panel is accepted when its Kronrod-Gauss difference is within its share
    of ``atol`` or below ``noise`` times its absolute integral (the rounding
    level of the integrand).
    """
    edges = np.linspace(lo, hi, max(1, n0) + 1)
    a, b = edges[:-1], edges[1:]
    total = 0.0 + 0.0j
    err = 0.0
    nev = 0
    width = hi - lo
    while a.size:
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        X = mid[:, None] + half[:, None] * _NODES[None, :]
        V = np.asarray(F(X.ravel()), dtype=complex).reshape(X.shape)
        nev += X.size
        K = half * (V @ _WK)
        G = half * (V @ _WG15)
        e = np.abs(K - G)
        # round-off floor relative to the panel's absolute integral
        floor = noise * (half * (np.abs(V) @ _WK))
        ok = e <= np.maximum(atol * (2 * half) / width, floor)
        total += np.sum(K[ok])
        err += float(np.sum(e[ok]))
        if np.all(ok):
            break
        a_bad, b_bad = a[~ok], b[~ok]
        if 2 * a_bad.size + a.size > max_panels:
            total += np.sum(K[~ok])
            err += float(np.sum(e[~ok]))
            raise QuadratureError(f"adaptive quadrature exceeded {max_panels} panels (error {err:.3e} > {atol:.3e})")
        m = 0.5 * (a_bad + b_bad)
        a = np.concatenate([a_bad, m])
        b = np.concatenate([m, b_bad])
    return total, err, nev


def _phase_panels(phase, lam: float, axis: int, fixed: dict, supports, samples: int = 257) -> int:
    """Panel count so that each initial panel carries at most ~pi of phase."""
    if lam == 0:
        return 4
    d = len(supports)
    lo, hi = supports[axis]
    grids = []
    for i in range(d):
        if i == axis:
            grids.append(np.linspace(lo, hi, samples))
        elif i in fixed:
            grids.append(np.array([fixed[i]]))
        else:
            grids.append(np.linspace(*supports[i], 5))
    mesh = np.meshgrid(*grids, indexing="ij")
    X = np.stack([g.ravel() for g in mesh], axis=1)
    ph = np.asarray(phase(X), dtype=float).reshape(mesh[0].shape)
    ph = np.moveaxis(ph, axis, -1)
    tv = float(np.max(np.sum(np.abs(np.diff(ph, axis=-1)), axis=-1))) * abs(lam)
    return int(min(max(4, math.ceil(tv / np.pi)), 200000))


def quad_oscillatory(
    phase: Callable,
    a: SmoothAmplitude,
    lam: float,
    tol: float = 1e-8,
    domain=None,
    max_panels: int = 400000,
    full_output: bool = False,
    outer_panels: int = 32,
    order=None,
):
    """Brute-force ``int exp(i lam phase(x)) a(x) dx`` over the support box (dims <= 4).

    Iterated adaptive Gauss-Kronrod (7/15) quadrature.  Initial panels are
    sized so that each carries at most about ``pi`` of phase; panels are then
    bisected until the Kronrod-Gauss difference meets the budget.  ``tol`` is
    relative to the magnitude of the result.

    Parameters
    ----------
    phase : callable
        ``phase(X)`` for ``X`` of shape ``(N, d)``, real.
    a : SmoothAmplitude
    lam : float
    tol : float
    domain : sequence of (lo, hi), optional
        Integration box; defaults to ``a.support``.
    full_output : bool
        Return a :class:`QuadResult` instead of the value.
    outer_panels : int
        Cap on the initial panel count of the outer (non-innermost) axes.
    order : sequence of int, optional
        Nesting order of the axes, outermost first.  Putting a variable in
        which the phase is linear innermost avoids cancellation in the outer
        integrals.

    Raises
    ------
    QuadratureError
        If the panel budget is exhausted.
    """
    d = a.arity
    if d > 4:
        raise ValueError("dimension must be at most 4")
    box = [tuple(map(float, s)) for s in (domain if domain is not None else a.support)]
    if any(not np.isfinite(s[1] - s[0]) for s in box):
        raise ValueError("integration box must be finite")
    perm = list(range(d)) if order is None else [int(i) for i in order]
    if sorted(perm) != list(range(d)):
        raise ValueError("order must be a permutation of the axes")
    supports = [box[i] for i in perm]

    def unpermute(Xp):
        X = np.empty_like(Xp)
        X[:, perm] = Xp
        return X

    def phase_p(Xp):
        return phase(unpermute(Xp))

    def integrand(Xp):
        X = unpermute(Xp)
        ph = np.asarray(phase(X), dtype=float)
        return np.exp(1j * lam * ph) * a(*[X[:, i] for i in range(d)])

    counter = [0]
    # evaluating exp(i lam phase) loses about lam*|phase|*eps relative accuracy
    grids = [np.linspace(lo, hi, 9) for lo, hi in supports]
    mesh = np.meshgrid(*grids, indexing="ij")
    phmax = float(np.max(np.abs(phase_p(np.stack([g.ravel() for g in mesh], axis=1)))))
    noise = 50 * np.finfo(float).eps * (1.0 + abs(lam) * phmax)

    def nested(fixed_vals: list, atol: float):
        axis = len(fixed_vals)
        lo, hi = supports[axis]
        fixed = {i: v for i, v in enumerate(fixed_vals)}
        n0 = _phase_panels(phase_p, lam, axis, fixed, supports)
        if axis < d - 1:
            # after inner integration the outer integrand rarely oscillates at
            # the raw phase rate; start coarse and let bisection refine
            n0 = min(n0, outer_panels)
        if axis == d - 1:

            def F(x):
                X = np.empty((x.size, d))
                for i, v in enumerate(fixed_vals):
                    X[:, i] = v
                X[:, axis] = x
                return integrand(X)

        else:
            inner_tol = 0.1 * atol / (hi - lo)

            def F(x):
                return np.array([nested(fixed_vals + [xi], inner_tol)[0] for xi in x])

        val, err, nev = _adaptive_gk(F, lo, hi, n0, atol, max_panels, noise)
        counter[0] += nev
        return val, err

    # coarse pass fixes the absolute target, then refine
    coarse, _ = nested([], 1e-3 * _abs_scale(a, supports))
    target = tol * max(abs(coarse), 1e-300)
    val, err = nested([], target)
    if abs(val) < 0.5 * abs(coarse):
        val, err = nested([], tol * max(abs(val), 1e-300))
    if full_output:
        return QuadResult(complex(val), float(err), counter[0])
    return complex(val)


def _abs_scale(a: SmoothAmplitude, supports) -> float:
    """Rough ``int |a|`` from a coarse grid, used to set the coarse-pass budget."""
    grids = [np.linspace(lo, hi, 9) for lo, hi in supports]
    mesh = np.meshgrid(*grids, indexing="ij")
    vals = np.abs(a(*[g.ravel() for g in mesh]))
    vol = float(np.prod([hi - lo for lo, hi in supports]))
    return max(float(np.mean(vals)) * vol, 1e-300)


# ---------------------------------------------------------------------------
# scaling fits
# ---------------------------------------------------------------------------


def fit_scaling(pairs, require_monotone: bool = True, monotone_slack: float = 1e-9):
    """Fit ``|value| ~ |c| lam^e`` by least squares on ``log|value|`` vs ``log lam``.

    Returns ``(exponent, coefficient, r2)`` where the complex coefficient is
    recovered at the largest ``lam`` as ``value / lam^exponent``.

    Raises
    ------
    FitRejected
        Fewer than 4 points, less than two decades, or non-monotone ``|value|``.
    """
    pairs = sorted((float(l), complex(v)) for l, v in pairs)
    if len(pairs) < 4:
        raise FitRejected("need at least 4 lambda values")
    lam = np.array([p[0] for p in pairs])
    val = np.array([p[1] for p in pairs])
    if lam[0] <= 0 or lam[-1] / lam[0] < 100 * (1 - 1e-12):
        raise FitRejected("lambda values must span at least two decades")
    mag = np.abs(val)
    if np.any(mag == 0):
        raise FitRejected("zero values cannot be fitted on a log scale")
    if require_monotone:
        dm = np.diff(mag)
        slack = monotone_slack * np.max(mag)
        if not (np.all(dm <= slack) or np.all(dm >= -slack)):
            raise FitRejected("|value| is not monotone in lambda")
    x = np.log(lam)
    y = np.log(mag)
    A = np.column_stack([x, np.ones_like(x)])
    sol = np.linalg.lstsq(A, y, rcond=None)[0]
    e = float(sol[0])
    resid = y - A @ sol
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    if abs(e) < 1e-12:
        e = 0.0
    coef = val[-1] / lam[-1] ** e
    return float(e), complex(coef), float(r2)


def fit_with_corrections(pairs, exponent: float, correction_orders=(0.5, 1.0)) -> tuple[complex, np.ndarray]:
    """Leading coefficient ``c0`` of ``value ~ lam^exponent (c0 + sum c_i lam^-o_i)``.

    Linear least squares on ``value * lam^-exponent`` against the basis
    ``1, lam^-o_1, ...``.  Returns ``(c0, all_coefficients)``.
    """
    lam = np.array([float(l) for l, _ in pairs])
    val = np.array([complex(v) for _, v in pairs])
    y = val * lam ** (-exponent)
    A = np.column_stack([np.ones_like(lam)] + [lam ** (-float(o)) for o in correction_orders])
    coef, *_ = np.linalg.lstsq(A.astype(complex), y, rcond=None)
    return complex(coef[0]), coef


# ---------------------------------------------------------------------------
# reduced oracles for separable Gaussian-in-(t, v) amplitudes
# ---------------------------------------------------------------------------


def _tv_gaussian_kernel(mu):
    """``int int exp(i mu t v) exp(-t^2 - v^2) dt dv = pi / sqrt(1 + mu^2/4)``."""
    return np.pi / np.sqrt(1.0 + 0.25 * np.asarray(mu, dtype=float) ** 2)


def second_form_gaussian_oracle(g: Profile, k: int, n: int, lam: float, sign: int = 1, tol: float = 1e-10) -> complex:
    """Second normal-form integral for ``a(t, r, v) = exp(-t^2) g(r) exp(-v^2)``.

    The ``(t, v)`` integral is done in closed form, leaving a one-dimensional
    oscillatory integral in ``r`` evaluated by :func:`quad_oscillatory`.
    """
    hi = g.support[1]

    def amp(r):
        return r ** (2 * n - 1) * g(r) * _tv_gaussian_kernel(lam * r**2)

    A = SmoothAmplitude.from_callable(amp, 1, [(0.0, hi)])
    return quad_oscillatory(lambda X: sign * X[:, 0] ** k, A, lam, tol)


def third_form_gaussian_oracle(g: Profile, k: int, n: int, lam: float, s0: float = 0.3, width: float = 1.0, tol: float = 1e-10) -> complex:
    """Third normal-form integral for ``a = exp(-t^2) g(r) exp(-v^2) exp(-((s - s0)/width)^2)``.

    The ``(t, v, s)`` integrals are done in closed form, leaving the ``r``
    integral with phase ``s0 r^k``.
    """
    hi = g.support[1]

    def amp(r):
        sig = lam * r**k
        return r ** (2 * n - 1) * g(r) * _tv_gaussian_kernel(lam * r**2) * np.sqrt(np.pi) * width * np.exp(-((sig * width) ** 2) / 4)

    A = SmoothAmplitude.from_callable(amp, 1, [(0.0, hi)])
    return quad_oscillatory(lambda X: s0 * X[:, 0] ** k, A, lam, tol)
