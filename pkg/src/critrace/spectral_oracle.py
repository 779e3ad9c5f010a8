"""Exact spectrum of the perturbed oscillator pair and empirical trace sums.

The operator is the Weyl quantization of

    p(x, xi) = (x1^2 + xi1^2)/2 - (x2^2 + xi2^2)/2 + (x2^2 + xi2^2)^2,

which is diagonal in the product oscillator basis with eigenvalues

    lambda(n1, n2; h) = h (n1 - n2) + h^2 ((2 n2 + 1)^2 + 1).

The rule is checked against the Weyl-ordered operator assembled from
truncated ladder matrices (:func:`verify_eigenvalue_rule`).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .trace import TestFunction

__all__ = [
    "WindowError",
    "SpectrumModel",
    "eigenvalue_rule",
    "model_spectrum",
    "weyl_quartic_matrix",
    "verify_eigenvalue_rule",
    "default_window",
    "gamma_sum",
    "SweepResult",
    "h_sweep",
    "stroboscopic_h_grid",
]


class WindowError(ValueError):
    """Quantum-number cutoffs are too small for the energy window."""


def eigenvalue_rule(n1, n2, h: float):
    """``h (n1 - n2) + h^2 ((2 n2 + 1)^2 + 1)``."""
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    return h * (n1 - n2) + h * h * ((2 * n2 + 1) ** 2 + 1)


@dataclass(frozen=True)
class SpectrumModel:
    """Eigenvalues of the model operator inside ``[E_c - eps, E_c + eps]``.

    ``n1``, ``n2`` are the quantum numbers of the retained states.
    """

    h: float
    E_c: float
    eps: float
    cutoffs: tuple[int, int]
    n1: np.ndarray
    n2: np.ndarray
    eigenvalues: np.ndarray

    def __len__(self) -> int:
        return self.eigenvalues.size


def model_spectrum(h: float, cutoffs: tuple[int, int] | None = None, E_c: float = 0.0, eps: float = 0.06) -> SpectrumModel:
    """All eigenvalues with ``|lambda - E_c| <= eps``.

    Parameters
    ----------
    h : float
    cutoffs : (int, int), optional
        Largest ``n1`` and ``n2`` considered.  When omitted they are derived
        from the window so that no state can be missed.
    E_c, eps : float
        Window centre and half-width.

    Raises
    ------
    WindowError
        If a state on the cutoff boundary lies inside the window.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    lo, hi = E_c - eps, E_c + eps
    if cutoffs is None:
        # lambda >= -h n2 + 4 h^2 n2^2, which exceeds hi beyond the larger root
        n2_max = int(math.ceil((h + math.sqrt(h * h + 16 * h * h * max(hi, 0.0))) / (8 * h * h))) + 1
        n1_max = int(math.ceil((hi + h * n2_max) / h)) + 1
        cutoffs = (n1_max, n2_max)
    n1_max, n2_max = int(cutoffs[0]), int(cutoffs[1])
    n2 = np.arange(n2_max + 1)
    base = eigenvalue_rule(0, n2, h)
    # for each n2 the admissible n1 form a contiguous range
    a = np.clip(np.ceil((lo - base) / h - 1e-9), 0, None).astype(np.int64)
    b = np.minimum(np.floor((hi - base) / h + 1e-9), n1_max).astype(np.int64)
    counts = np.maximum(b - a + 1, 0)
    N2 = np.repeat(n2, counts)
    start = np.repeat(a, counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    N1 = start + offs
    lam = eigenvalue_rule(N1, N2, h)
    keep = (lam >= lo) & (lam <= hi)
    N1, N2, lam = N1[keep], N2[keep], lam[keep]
    edge1 = eigenvalue_rule(n1_max, n2, h)
    if np.any((edge1 >= lo) & (edge1 <= hi)) or np.any(np.abs(eigenvalue_rule(np.arange(n1_max + 1), n2_max, h) - E_c) <= eps):
        raise WindowError("cutoffs too small: boundary states fall inside the window")
    return SpectrumModel(h, E_c, eps, (n1_max, n2_max), N1, N2, lam)


# ---------------------------------------------------------------------------
# truncated-basis check
# ---------------------------------------------------------------------------


def _ladder(size: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, size)), 1)


def weyl_quartic_matrix(h: float, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated matrices of the Weyl quantizations of ``x^2 + xi^2`` and ``(x^2 + xi^2)^2``.

    ``x = sqrt(h/2)(a + a^+)``, ``xi = -i sqrt(h/2)(a - a^+)``; the mixed
    term ``x^2 xi^2`` is quantized as the average over the six orderings of
    ``x, x, xi, xi``.  Entries with indices close to ``size`` are affected by
    the truncation; use rows up to ``size - 5``.
    """
    a = _ladder(size)
    ad = a.T
    X = math.sqrt(h / 2) * (a + ad)
    P = -1j * math.sqrt(h / 2) * (a - ad)
    quad = X @ X + P @ P
    mixed = np.zeros((size, size), dtype=complex)
    orders = set(itertools.permutations("xxpp"))
    for word in orders:
        M = np.eye(size, dtype=complex)
        for ch in word:
            M = M @ (X if ch == "x" else P)
        mixed += M
    mixed /= len(orders)
    quart = np.linalg.matrix_power(X, 4) + 2 * mixed + np.linalg.matrix_power(P, 4)
    return quad, quart


def verify_eigenvalue_rule(h: float, n_max: int = 20) -> float:
    """Max deviation between the rule and the truncated Weyl operator for ``n1, n2 <= n_max``.

    The operator is a sum of one-dimensional pieces, so it suffices to check
    that both one-dimensional matrices are diagonal on the retained block and
    that the diagonal reproduces the rule for every pair ``(n1, n2)``.
    """
    size = n_max + 8
    quad, quart = weyl_quartic_matrix(h, size)
    block = slice(0, n_max + 1)
    q1 = 0.5 * quad[block, block]
    H2 = -0.5 * quad[block, block] + quart[block, block]
    off = max(np.max(np.abs(q1 - np.diag(np.diag(q1)))), np.max(np.abs(H2 - np.diag(np.diag(H2)))))
    n = np.arange(n_max + 1)
    N1, N2 = np.meshgrid(n, n, indexing="ij")
    op = np.diag(q1).real[N1] + np.diag(H2).real[N2]
    # the rule drops the constant h/2 - h/2 of the two oscillators
    dev = np.max(np.abs(op - eigenvalue_rule(N1, N2, h)))
    return float(max(off, dev, np.max(np.abs(np.diag(q1).imag)), np.max(np.abs(np.diag(H2).imag))))


# ---------------------------------------------------------------------------
# trace sums
# ---------------------------------------------------------------------------


def default_window(phi: TestFunction, h: float, rel: float = 1e-10, s_cap: float = 1000.0) -> float:
    """Half-width ``eps = s* h`` with ``|phi(s)| <= rel |phi|_max`` beyond ``s*``."""
    s = np.linspace(0.0, s_cap, int(s_cap * 2) + 1)
    v = np.abs(phi.phi(s)) + np.abs(phi.phi(-s))
    big = np.flatnonzero(v > rel * np.max(v))
    s_star = s[min(big[-1] + 1, s.size - 1)]
    return float(s_star * h)


def gamma_sum(spectrum: SpectrumModel, E_c: float, phi: TestFunction, h: float) -> complex:
    """``sum_j phi((lambda_j - E_c)/h)`` over the states of ``spectrum``.

    Raises
    ------
    WindowError
        If the spectrum was built for another ``h`` or window centre.
    """
    if not math.isclose(spectrum.h, h, rel_tol=1e-12) or not math.isclose(spectrum.E_c, E_c, rel_tol=0, abs_tol=1e-14):
        raise WindowError("spectrum was built for a different h or window centre")
    if spectrum.eigenvalues.size == 0:
        return 0j
    return complex(np.sum(phi.phi((spectrum.eigenvalues - E_c) / h)))


@dataclass
class SweepResult:
    """``gamma(E_c, h)`` over an ``h`` grid and log-log fits of ``|gamma|``."""

    h: np.ndarray
    gamma: np.ndarray
    exponent: float
    coefficient: float
    exponent_background: float | None
    window: np.ndarray

    def rows(self):
        for h, g in zip(self.h, self.gamma):
            yield (float(h), float(g.real), float(g.imag), float(abs(g)))

    def as_dict(self) -> dict:
        return {
            "h": self.h.tolist(),
            "gamma_re": self.gamma.real.tolist(),
            "gamma_im": self.gamma.imag.tolist(),
            "gamma_abs": np.abs(self.gamma).tolist(),
            "exponent": self.exponent,
            "coefficient": self.coefficient,
            "exponent_background": self.exponent_background,
            "window": self.window.tolist(),
            "method": "fit",
        }


def _loglog(h: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    e, c = np.polyfit(np.log(h), np.log(np.abs(v)), 1)
    return float(e), float(np.exp(c))


def stroboscopic_h_grid(h_min: float = 1 / 400, h_max: float = 1 / 50, count: int = 8, modulus: int = 16) -> np.ndarray:
    """Decreasing grid ``h = 1/N`` with all ``N`` congruent modulo ``modulus``.

    In the Poisson-summed trace the periodic-orbit family on
    ``x2^2 + xi2^2 = 1/4`` contributes a term of the same order as the
    critical point, with phase ``exp(-i pi / (8 h))``.  Holding ``1/h`` fixed
    modulo 16 freezes that phase, so ``|gamma|`` is a clean power of ``h``
    along the grid instead of beating.
    """
    n_lo = int(round(1 / h_max))
    n_hi = int(math.floor(1 / h_min + 1e-9))
    step = modulus * max(1, (n_hi - n_lo) // (modulus * max(count - 1, 1)))
    Ns = np.arange(n_lo, n_hi + 1, step)
    return 1.0 / Ns


def h_sweep(phi: TestFunction, h_grid, E_c: float = 0.0, eps: float | None = 0.5, background=None) -> SweepResult:
    """``gamma(E_c, h)`` for each ``h`` and the fitted exponent of ``|gamma|``.

    Parameters
    ----------
    eps : float or None
        Window half-width; ``None`` uses :func:`default_window` at each ``h``.
    background : callable, optional
        Smooth model ``b(h)`` subtracted from ``gamma`` before a second fit.
    """
    hs = np.asarray(h_grid, dtype=float)
    gam = np.empty(hs.size, dtype=complex)
    win = np.empty(hs.size)
    for i, h in enumerate(hs):
        e = default_window(phi, h) if eps is None else eps
        spec = model_spectrum(h, E_c=E_c, eps=e)
        gam[i] = gamma_sum(spec, E_c, phi, h)
        win[i] = e
    exp_, coef = _loglog(hs, gam)
    exp_bg = None
    if background is not None:
        exp_bg, _ = _loglog(hs, gam - np.asarray([background(h) for h in hs]))
    return SweepResult(hs, gam, exp_, coef, exp_bg, win)
