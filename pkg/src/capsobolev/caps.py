"""Weighted cap averages on S^{d-1} in multiplier space.

With ``x = t theta / T`` the cap average of a zonal quantity ``F(cos x)`` is

    int_0^T F(cos x) sin^{d-2}(x) rho(theta) d theta  /  int_0^T sin^{d-2}(x) rho(theta) d theta,

so the multiplier ``m_{l,t}`` takes ``F = P_{l,d}`` and the distance-power
average of order ``k`` takes ``F = (2 (1 - cos x))^k``.  Everything here is
a one-dimensional integral against ``rho``.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError, QuadratureError
from .weights import Weight, moment, require_valid, rho_rule

# Refinement steps the pointwise evaluators try before giving up.
MAX_REFINE = 4
# Elements per batch in the table engine.
_BATCH = 1 << 18


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere S^dim (``dim = 0`` gives 2 points)."""
    return 2.0 * math.pi ** ((dim + 1) / 2) / math.gamma((dim + 1) / 2)


@dataclass(frozen=True)
class CapAverageContext:
    """Dimension, weight and angular quadrature settings for cap averages."""

    d: int
    weight: Weight
    nodes: int = 32

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"d must be an integer >= 2, got {self.d}")
        if self.nodes < 16:
            raise ParameterError("quadrature needs at least 16 nodes per panel")
        require_valid(self.weight)

    @property
    def T(self) -> float:
        return self.weight.T

    def check_t(self, t):
        arr = np.asarray(t, dtype=float)
        if np.any(arr <= 0) or np.any(arr > self.T * (1 + 1e-15)):
            raise DomainError(f"t must lie in (0, T={self.T}]")
        return arr


def _cap_nodes(ctx: CapAverageContext, t: float, band: float, refine: int = 0):
    """Gap ``1 - cos x`` and measure weights ``sin^{d-2}(x) rho`` at the cap nodes."""
    theta, v = rho_rule(ctx.weight, band * t / ctx.T * 2**refine, ctx.nodes)
    x = t * theta / ctx.T
    gap = 2.0 * np.sin(0.5 * x) ** 2
    W = v * np.sin(x) ** (ctx.d - 2) if ctx.d > 2 else np.array(v)
    return gap, W


def _refined(ctx, t, band, evaluate, tol=1e-12):
    """Evaluate on successively refined rules until two agree to ``tol``."""
    prev = evaluate(*_cap_nodes(ctx, t, band))
    for r in range(1, MAX_REFINE + 1):
        cur = evaluate(*_cap_nodes(ctx, t, band, r))
        err = float(np.max(np.abs(cur - prev)))
        if err <= tol * max(1.0, float(np.max(np.abs(cur)))):
            return cur
        prev = cur
    raise QuadratureError(f"cap quadrature did not converge at t={t}", estimate=err)


def normalizer(ctx: CapAverageContext, t: float) -> float:
    """``z_t``, the rho-weighted measure of the cap of radius ``t``."""
    t = float(ctx.check_t(t))
    _, W = _cap_nodes(ctx, t, ctx.d + 2)
    return sphere_area(ctx.d - 2) * t / ctx.T * math.fsum(W)


def z_bracket(ctx: CapAverageContext) -> tuple[float, float]:
    """Constants ``(c_z, C_z)`` bracketing ``z_t / t^{d-1}`` for small ``t``."""
    w, d = ctx.weight, ctx.d
    area = sphere_area(d - 2) * w.T ** (1 - d)
    return area * moment(w, d - 2, w.T0), area * moment(w, d - 2, w.T)


def multiplier_deficits(ctx: CapAverageContext, lmax: int, t: float) -> np.ndarray:
    """``1 - m_{l,t}`` for ``l = 0..lmax``, accurate even when ``m`` is close to 1."""
    t = float(ctx.check_t(t))

    def evaluate(gap, W):
        W = W[None, :]
        _, dm = _combine(*_deficit_averages(ctx.d, lmax, gap[None, :], W, W.sum(axis=1)))
        return dm[:, 0]

    return _refined(ctx, t, lmax + ctx.d + 2, evaluate)


def multiplier(ctx: CapAverageContext, l: int, t: float) -> float:
    """Eigenvalue ``m_{l,t}`` of the cap average on degree-``l`` harmonics."""
    if l < 0:
        raise DomainError("degree must be >= 0")
    return float(multipliers(ctx, l, t)[l])


def multipliers(ctx: CapAverageContext, lmax: int, t: float) -> np.ndarray:
    """``m_{l,t}`` for ``l = 0..lmax``."""
    t = float(ctx.check_t(t))

    def evaluate(gap, W):
        W = W[None, :]
        m, _ = _combine(*_deficit_averages(ctx.d, lmax, gap[None, :], W, W.sum(axis=1)))
        return m[:, 0]

    return _refined(ctx, t, lmax + ctx.d + 2, evaluate)


def distance_power_average(ctx: CapAverageContext, k: int, t: float) -> float:
    """Cap average of ``|xi - eta|^{2k}`` around ``xi``; independent of ``xi``."""
    if k < 0:
        raise DomainError("k must be >= 0")
    t = float(ctx.check_t(t))

    def evaluate(gap, W):
        return np.array([np.sum(W * (2.0 * gap) ** k) / W.sum()])

    return float(_refined(ctx, t, k + ctx.d + 2, evaluate)[0])


def apply_multiplier(ctx: CapAverageContext, coeffs, t: float):
    """Cap average of a band-limited function given by its coefficients."""
    if coeffs.d != ctx.d:
        raise ParameterError(f"coefficient dimension {coeffs.d} != context dimension {ctx.d}")
    return coeffs.scale_blocks(multipliers(ctx, coeffs.L, t))


def default_t_grid(T: float, num: int = 200) -> np.ndarray:
    """Log-spaced radii from ``1e-4 T`` to ``T``."""
    return np.geomspace(T * 1e-4, T, num)


@dataclass(frozen=True)
class MultiplierTable:
    ctx: CapAverageContext
    ls: np.ndarray
    ts: np.ndarray
    values: np.ndarray  # shape (len(ls), len(ts))


def multiplier_table(ctx: CapAverageContext, lmax: int, ts=None) -> MultiplierTable:
    ts = default_t_grid(ctx.T) if ts is None else np.asarray(ctx.check_t(ts), dtype=float)
    values, _, _ = cap_table(ctx, lmax, 0, ts)
    values.setflags(write=False)
    return MultiplierTable(ctx, np.arange(lmax + 1), ts, values)


def cap_table(ctx: CapAverageContext, lmax: int, kmax: int, ts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched cap averages at many radii.

    Returns ``mult[l, i] = m_{l, ts[i]}`` and ``deficit[l, i] = 1 - m_{l, ts[i]}``
    (each computed in the form that keeps its precision) for ``l <= lmax`` and
    ``gapavg[k, i]`` = cap average of ``(1 - cos)^k`` (that is, the
    distance-power average divided by ``2^k``) for ``k <= kmax``.
    Panels are sized a priori for frequency ``max(lmax, kmax) + d + 2``.
    """
    ts = np.asarray(ts, dtype=float)
    band = max(lmax, kmax) + ctx.d + 2
    mult = np.empty((lmax + 1, ts.size))
    deficit = np.empty_like(mult)
    gapavg = np.empty((kmax + 1, ts.size))
    # radii sharing a panel layout are processed together
    rules, members = {}, defaultdict(list)
    for i, t in enumerate(ts):
        theta, v = rho_rule(ctx.weight, band * t / ctx.T, ctx.nodes)
        rules[id(theta)] = (theta, v)
        members[id(theta)].append(i)
    for key, idx in members.items():
        theta, v = rules[key]
        step = max(1, _BATCH // theta.size)
        for start in range(0, len(idx), step):
            sel = np.asarray(idx[start:start + step])
            x = ts[sel, None] * theta[None, :] / ctx.T
            gap = 2.0 * np.sin(0.5 * x) ** 2
            W = v * np.sin(x) ** (ctx.d - 2)
            den = W.sum(axis=1)
            gk = np.ones_like(gap)
            gapavg[0, sel] = 1.0
            for k in range(1, kmax + 1):
                gk = gk * gap
                gapavg[k, sel] = (gk * W).sum(axis=1) / den
            mult[:, sel], deficit[:, sel] = _combine(*_deficit_averages(ctx.d, lmax, gap, W, den))
    return mult, deficit, gapavg


def _deficit_averages(d, lmax, gap, W, den):
    """Weighted means over the last axis of ``1 - P_{l,d}`` and of ``P_{l,d}``.

    Returns ``(deficit, value)`` each of shape ``(lmax + 1, gap.shape[0])``.
    """
    lam = 0.5 * (d - 2)
    deficit = np.empty((lmax + 1, gap.shape[0]))
    value = np.empty_like(deficit)
    deficit[0], value[0] = 0.0, 1.0
    if lmax == 0:
        return deficit, value
    e_prev = np.zeros_like(gap)
    e = gap.copy()
    p_prev = np.ones_like(gap)
    p = 1.0 - gap
    deficit[1] = (e * W).sum(axis=1) / den
    value[1] = (p * W).sum(axis=1) / den
    for l in range(1, lmax):
        a = 2.0 * (l + lam)
        b = l + 2.0 * lam
        e_prev, e = e, (a * e - l * e_prev + a * gap * p) / b
        p_prev, p = p, (a * (1.0 - gap) * p - l * p_prev) / b
        deficit[l + 1] = (e * W).sum(axis=1) / den
        value[l + 1] = (p * W).sum(axis=1) / den
    return deficit, value


def _combine(deficit, value):
    """Multiplier and deficit, each taken from whichever average is the accurate one.

    Near ``m = 1`` the deficit average keeps relative precision; away from
    it the direct average does not suffer the ``1 - deficit`` rounding.
    """
    near_one = deficit < 0.5
    m = np.where(near_one, 1.0 - deficit, value)
    dm = np.where(near_one, deficit, 1.0 - value)
    return m, dm
