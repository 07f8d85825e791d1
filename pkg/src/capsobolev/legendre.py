"""Legendre polynomials of the sphere S^{d-1} and their Taylor data at s = 1.

``P_{l,d}`` is the ultraspherical polynomial with parameter ``(d-2)/2``
normalized so that ``P_{l,d}(1) = 1``.  For ``d = 3`` it is the classical
Legendre polynomial, for ``d = 2`` the Chebyshev polynomial ``cos(l arccos s)``.

All evaluators accept scalars or numpy arrays for ``s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError

__all__ = [
    "UltrasphericalBasis",
    "TaylorCoeffs",
    "eval_P",
    "eval_P_table",
    "eval_one_minus_P_table",
    "eval_P_explicit",
    "eval_P_deriv",
    "P_deriv_at_one",
    "taylor_coeff",
    "taylor_table",
    "taylor_remainder",
    "remainder_from_gap",
    "sharp_bound_ratio",
]

# Tail length of the Taylor remainder sum near s = 1.
TAIL_TERMS = 40


def _check_dl(d, l):
    if int(d) != d or d < 2:
        raise DomainError(f"dimension d must be an integer >= 2, got {d}")
    if int(l) != l or l < 0:
        raise DomainError(f"degree l must be a non-negative integer, got {l}")


def _as_s(s):
    arr = np.asarray(s, dtype=float)
    if np.any(np.abs(arr) > 1.0) or np.any(np.isnan(arr)):
        raise DomainError("argument s must lie in [-1, 1]")
    return arr


def _ret(arr, scalar):
    return float(arr) if scalar else arr


@dataclass(frozen=True)
class UltrasphericalBasis:
    """Degrees ``0..lmax`` of ``P_{l,d}``."""

    d: int
    lmax: int

    def __post_init__(self):
        _check_dl(self.d, self.lmax)

    def __call__(self, s):
        """Table of shape ``(lmax + 1, *s.shape)``."""
        return eval_P_table(self.d, self.lmax, _as_s(s))


def eval_P_table(d: int, lmax: int, s) -> np.ndarray:
    """All ``P_{l,d}(s)`` for ``l = 0..lmax`` by the normalized three-term recurrence.

    No range check on ``s``; callers that build quadrature nodes pass
    values already in ``[-1, 1]``.
    """
    s = np.asarray(s, dtype=float)
    lam = 0.5 * (d - 2)
    out = np.empty((lmax + 1,) + s.shape)
    out[0] = 1.0
    if lmax >= 1:
        out[1] = s
    for l in range(1, lmax):
        out[l + 1] = (2.0 * (l + lam) * s * out[l] - l * out[l - 1]) / (l + 2.0 * lam)
    return out


def eval_one_minus_P_table(d: int, lmax: int, gap) -> np.ndarray:
    """All ``1 - P_{l,d}(1 - gap)`` for ``l = 0..lmax``.

    Runs the recurrence on the deficit ``e_l = 1 - P_l`` directly, so the
    result keeps full relative precision when ``gap`` is small and
    ``P_l`` is close to 1.
    """
    g = np.asarray(gap, dtype=float)
    lam = 0.5 * (d - 2)
    out = np.empty((lmax + 1,) + g.shape)
    out[0] = 0.0
    if lmax == 0:
        return out
    out[1] = g
    p_prev = np.ones_like(g)
    p = 1.0 - g
    for l in range(1, lmax):
        a = 2.0 * (l + lam)
        b = l + 2.0 * lam
        out[l + 1] = (a * out[l] - l * out[l - 1] + a * g * p) / b
        p_prev, p = p, (a * (1.0 - g) * p - l * p_prev) / b
    return out


def eval_P(d: int, l: int, s):
    """``P_{l,d}(s)``."""
    _check_dl(d, l)
    scalar = np.ndim(s) == 0
    arr = _as_s(s)
    if d == 2:
        val = np.cos(l * np.arccos(arr))
        # exact at the endpoints where arccos rounding would leak
        val = np.where(arr == 1.0, 1.0, val)
    else:
        val = eval_P_table(d, l, arr)[l]
    return _ret(val, scalar)


def eval_P_explicit(d: int, l: int, s) -> float:
    """Finite-sum formula for ``P_{l,d}(s)``, evaluated in exact rational arithmetic.

    ``s`` is converted with :class:`fractions.Fraction`; used as an
    independent oracle for the recurrence.
    """
    _check_dl(d, l)
    s = Fraction(s)
    if abs(s) > 1:
        raise DomainError("argument s must lie in [-1, 1]")
    half = Fraction(d - 1, 2)
    total = Fraction(0)
    rising = Fraction(1)  # ((d-1)/2)_k = Gamma(k + (d-1)/2) / Gamma((d-1)/2)
    for k in range(l // 2 + 1):
        if k > 0:
            rising *= half + k - 1
        term = (1 - s * s) ** k * s ** (l - 2 * k)
        term /= 4**k * math.factorial(k) * math.factorial(l - 2 * k) * rising
        total += -term if k % 2 else term
    return float(math.factorial(l) * total)


def P_deriv_at_one(d: int, l: int, k: int) -> float:
    """Closed form of ``P^{(k)}_{l,d}(1)``.

    Written as the product of consecutive ratios
    ``P^{(j+1)}(1) / P^{(j)}(1) = (l-j)(l+j+d-2) / (2j+d-1)``.
    """
    _check_dl(d, l)
    if k < 0:
        raise DomainError(f"derivative order must be >= 0, got {k}")
    if k > l:
        return 0.0
    val = 1.0
    for j in range(k):
        val *= (l - j) * (l + j + d - 2) / (2 * j + d - 1)
    return val


def eval_P_deriv(d: int, l: int, k: int, s):
    """``P^{(k)}_{l,d}(s)``.

    Differentiating shifts the family: ``P^{(k)}_{l,d} = P^{(k)}_{l,d}(1) * P_{l-k,d+2k}``.
    """
    _check_dl(d, l)
    if k < 0:
        raise DomainError(f"derivative order must be >= 0, got {k}")
    scalar = np.ndim(s) == 0
    arr = _as_s(s)
    if k > l:
        return _ret(np.zeros_like(arr), scalar)
    if k == 0:
        return eval_P(d, l, s)
    val = P_deriv_at_one(d, l, k) * eval_P_table(d + 2 * k, l - k, arr)[l - k]
    return _ret(val, scalar)


def taylor_coeff(d: int, k: int, l: int) -> float:
    """``c_{k,l} = (-1)^k P^{(k)}_{l,d}(1) / k!``, coefficient of ``(1-s)^k``."""
    _check_dl(d, l)
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    if k > l:
        return 0.0
    val = 1.0
    for j in range(k):
        val *= -(l - j) * (l + j + d - 2) / ((j + 1) * (2 * j + d - 1))
    return val


@dataclass(frozen=True)
class TaylorCoeffs:
    """Table ``c[k, l]`` of Taylor coefficients for ``k <= kmax``, ``l <= lmax``."""

    d: int
    kmax: int
    lmax: int
    c: np.ndarray

    def __getitem__(self, kl):
        return self.c[kl]


def taylor_table(d: int, kmax: int, lmax: int) -> TaylorCoeffs:
    _check_dl(d, lmax)
    ls = np.arange(lmax + 1, dtype=float)
    c = np.zeros((kmax + 1, lmax + 1))
    c[0] = 1.0
    for j in range(kmax):
        c[j + 1] = c[j] * -(ls - j) * (ls + j + d - 2) / ((j + 1) * (2 * j + d - 1))
    c.setflags(write=False)
    return TaylorCoeffs(d, kmax, lmax, c)


def remainder_from_gap(d: int, l: int, n: int, gap, method: str = "auto"):
    """``R_{n+1}`` at ``s = 1 - gap``; see :func:`taylor_remainder`.

    Taking the gap directly avoids the rounding of ``1 - s`` for ``s`` near 1.
    ``method`` forces the ``"tail"`` sum or the ``"direct"`` difference.
    """
    g = np.asarray(gap, dtype=float)
    if n >= l:
        return np.zeros_like(g)
    coeffs = [taylor_coeff(d, k, l) for k in range(l + 1)]
    if method == "auto":
        near = g * l * l <= 1.0
    elif method in ("tail", "direct"):
        near = np.full(g.shape, method == "tail")
    else:
        raise DomainError(f"unknown method {method!r}")
    out = np.empty_like(g)
    if np.any(near):
        gn = g[near]
        kmax = min(l, n + TAIL_TERMS)
        terms = np.array([coeffs[k] * gn**k for k in range(n + 1, kmax + 1)])
        out[near] = [math.fsum(col) for col in terms.T]
    far = ~near
    if np.any(far):
        gf = g[far]
        # R = -(1 - P) - sum_{1<=k<=n} c_k gap^k; the deficit recurrence keeps 1 - P exact-ish
        head = np.array([coeffs[k] * gf**k for k in range(1, n + 1)]).reshape(n, gf.size)
        e = eval_one_minus_P_table(d, l, gf)[l]
        out[far] = [math.fsum((-ev, *(-head[:, i]))) for i, ev in enumerate(e)]
    return out


def taylor_remainder(d: int, l: int, n: int, s, method: str = "auto"):
    """``R_{n+1}(s) = P_{l,d}(s) - sum_{k<=n} c_{k,l} (1-s)^k``.

    Where ``(1-s) l^2 <= 1`` the remainder is summed from its exact tail
    ``sum_{k>n} c_{k,l} (1-s)^k`` with compensated summation; elsewhere the
    direct difference is used.
    """
    _check_dl(d, l)
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    scalar = np.ndim(s) == 0
    arr = np.atleast_1d(_as_s(s))
    val = remainder_from_gap(d, l, n, 1.0 - arr, method)
    return float(val[0]) if scalar else val.reshape(np.shape(s))


def sharp_bound_ratio(d: int, l: int, num: int = 2000) -> float:
    """Max over ``theta in [2/l, pi/4)`` of ``|P_{l,d}(cos t)| sin^{d-2} t / (t^{(d-2)/2} l^{(2-d)/2})``.

    Diagnostic only: the implied constant of the bound is not known.
    """
    _check_dl(d, l)
    lo = 2.0 / l
    if lo >= math.pi / 4:
        raise DomainError(f"empty angle window for l={l}")
    theta = np.linspace(lo, math.pi / 4, num, endpoint=False)
    p = eval_P_table(d, l, np.cos(theta))[l]
    ratio = np.abs(p) * np.sin(theta) ** (d - 2) / (theta ** ((d - 2) / 2) * float(l) ** ((2 - d) / 2))
    return float(ratio.max())
