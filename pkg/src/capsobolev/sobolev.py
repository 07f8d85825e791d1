"""Coefficient-space Sobolev machinery.

All norm-valued functions return squared norms.  Degree-wise operators act
on :class:`~capsobolev.sphere2.HarmonicCoeffs` by scaling whole blocks.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .caps import CapAverageContext
from .errors import DomainError, InconsistencyError, ParameterError
from .legendre import taylor_table
from .remainders import _radial_values, branch_for_alpha
from .sphere2 import HarmonicCoeffs
from .weights import fine_condition_ratio


def laplace_eigen(d: int, L: int) -> np.ndarray:
    """``l (l + d - 2)`` for ``l = 0..L``."""
    ls = np.arange(L + 1, dtype=float)
    return ls * (ls + d - 2)


def laplace_power(coeffs: HarmonicCoeffs, beta: float) -> HarmonicCoeffs:
    """``(-Delta)^beta``: block ``l`` scaled by ``{l (l + d - 2)}^beta``."""
    if beta < 0:
        raise DomainError("beta must be >= 0")
    if beta == 0:
        return coeffs
    return coeffs.scale_blocks(laplace_eigen(coeffs.d, coeffs.L) ** beta)


def sobolev_norm(coeffs: HarmonicCoeffs, alpha: float) -> float:
    """Homogeneous ``||(-Delta)^{alpha/2} f||^2``; the constant block does not count."""
    if alpha < 0:
        raise DomainError("alpha must be >= 0")
    lam = laplace_eigen(coeffs.d, coeffs.L)
    w = lam**alpha if alpha > 0 else np.ones_like(lam)
    return math.fsum(w * coeffs.block_norms_sq())


def halpha_norm(coeffs: HarmonicCoeffs, alpha: float) -> float:
    """``sum_l (1 + sqrt(l (l + d - 2)))^{2 alpha} ||f_l||^2``."""
    if alpha < 0:
        raise DomainError("alpha must be >= 0")
    w = (1.0 + np.sqrt(laplace_eigen(coeffs.d, coeffs.L))) ** (2.0 * alpha)
    return math.fsum(w * coeffs.block_norms_sq())


def T_k_scale(d: int, k: int, L: int) -> np.ndarray:
    """Per-degree factors ``c_{k,l} / (2^k {l (l + d - 2)}^k)``; 0 at ``l = 0``."""
    if k < 1:
        raise DomainError("k must be >= 1")
    c = taylor_table(d, k, L).c[k]
    lam = laplace_eigen(d, L)
    out = np.zeros(L + 1)
    out[1:] = c[1:] / (2.0**k * lam[1:] ** k)
    return out


def T_k_apply(coeffs: HarmonicCoeffs, k: int) -> HarmonicCoeffs:
    return coeffs.scale_blocks(T_k_scale(coeffs.d, k, coeffs.L))


def T_k_inverse(coeffs: HarmonicCoeffs, k: int) -> HarmonicCoeffs:
    scale = T_k_scale(coeffs.d, k, coeffs.L)
    tiny = np.abs(scale[1:]) < np.finfo(float).tiny
    if np.any(tiny & (coeffs.block_norms_sq()[1:] > 0)):
        raise ArithmeticError("T_k scale factor underflows; cannot invert")
    inv = np.zeros_like(scale)
    with np.errstate(divide="ignore"):
        inv[1:] = np.where(tiny, 0.0, 1.0 / scale[1:])
    return coeffs.scale_blocks(inv)


def canonical_g(coeffs: HarmonicCoeffs, k: int) -> HarmonicCoeffs:
    """``g_k = T_k((-Delta)^k f)``: block ``l`` scaled by ``c_{k,l} / 2^k``."""
    return T_k_apply(laplace_power(coeffs, k), k)


def canonical_gs(coeffs: HarmonicCoeffs, alpha: float) -> list[HarmonicCoeffs]:
    """The correction functions ``g_1..g_n`` matching ``alpha``."""
    _, n = branch_for_alpha(alpha)
    return [canonical_g(coeffs, k) for k in range(1, n + 1)]


def poisson(coeffs: HarmonicCoeffs, r: float) -> HarmonicCoeffs:
    """Poisson transform: block ``l`` scaled by ``r^l``."""
    if not 0.0 < r < 1.0:
        raise DomainError("r must lie in (0, 1)")
    return coeffs.scale_blocks(r ** np.arange(coeffs.L + 1, dtype=float))


# -- square-function norms ----------------------------------------------------

@lru_cache(maxsize=64)
def _functional(ctx: CapAverageContext, alpha: float, L: int) -> np.ndarray:
    kind, n = branch_for_alpha(alpha)
    vals = _radial_values(ctx, kind, n, alpha, max(L, 1))
    vals.setflags(write=False)
    return vals


def functional_weights(ctx: CapAverageContext, alpha: float, L: int) -> np.ndarray:
    """``I_{alpha,n}(l)`` or ``J_n(l)`` for ``l = 0..L`` (0 at ``l = 0``)."""
    vals = np.array(_functional(ctx, float(alpha), int(L))[: L + 1])
    vals[0] = 0.0
    return vals


def sqnorm_coeff(coeffs: HarmonicCoeffs, alpha: float, ctx: CapAverageContext):
    """Squared square-function norm with canonical corrections, and any warnings.

    Returns ``(value, warnings)``.  In the even case ``alpha = 2n`` a weight
    that misses the moment condition still gets a value, with a warning.
    """
    if not alpha > 0:
        raise ParameterError("alpha must be > 0")
    if coeffs.d != ctx.d:
        raise ParameterError(f"coefficient dimension {coeffs.d} != context dimension {ctx.d}")
    kind, n = branch_for_alpha(alpha)
    notes = []
    if kind == "J":
        ratio = fine_condition_ratio(ctx.weight, ctx.d, n)
        if ratio >= 1.0:
            notes.append(f"fine condition fails: ratio {ratio:.6g} >= 1; lower bound not guaranteed")
    w = functional_weights(ctx, alpha, coeffs.L)
    return math.fsum(w * coeffs.block_norms_sq()), notes


@dataclass
class NormReport:
    alpha: float
    lhs: float
    rhs: float
    ratio: float
    branch: str
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio,
                "branch": self.branch, "warnings": list(self.warnings)}

    def to_json(self) -> str:
        # NaN ratio (0/0) is written as null
        d = self.to_dict()
        if not math.isfinite(d["ratio"]):
            d["ratio"] = None
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> NormReport:
        d = json.loads(text)
        ratio = float("nan") if d["ratio"] is None else d["ratio"]
        return cls(d["alpha"], d["lhs"], d["rhs"], ratio, d["branch"], list(d.get("warnings", [])))


def equivalence_report(coeffs: HarmonicCoeffs, alpha: float, ctx: CapAverageContext) -> NormReport:
    """Compare ``||(-Delta)^{alpha/2} f||^2`` with the squared square-function norm."""
    if not alpha > 0:
        raise ParameterError("alpha must be > 0")
    kind, n = branch_for_alpha(alpha)
    lhs = sobolev_norm(coeffs, alpha)
    rhs, notes = sqnorm_coeff(coeffs, alpha, ctx)
    ratio = lhs / rhs if rhs > 0 else float("nan")
    if rhs == 0.0 and lhs > 0.0:
        # degrees l <= n are exact Taylor polynomials: the square function cannot see them
        if np.any(coeffs.block_norms_sq()[n + 1:] > 0):
            raise InconsistencyError(f"square-function norm vanishes but Sobolev norm is {lhs}")
        ratio = math.inf
        notes = [*notes, f"degrees l <= {n} are invisible to the square function; ratio is infinite"]
    return NormReport(float(alpha), lhs, rhs, ratio, "fractional" if kind == "I" else "integer-even", notes)
