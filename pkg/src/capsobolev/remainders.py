"""Taylor-remainder deviations of the cap multipliers and their radial integrals.

For a degree ``l`` and radius ``t`` write ``D_k(t)`` for the cap average of
``(1 - cos)^k``, so that ``A_t(|xi - .|^{2k})(xi) = 2^k D_k(t)``.  Then

    M_{n,l,t} = m_{l,t} - sum_{k<=n} c_{k,l} D_k(t)
    N_{n,l,t} = M_{n-1,l,t} - c_{n,l} D_n(t) m_{l,t}

and the functionals are

    I_{alpha,n}(l) = int_0^T M_{n,l,t}^2 dt / t^{2 alpha + 1}     (2n < alpha < 2n + 2)
    J_n(l)         = int_0^T N_{n,l,t}^2 dt / t^{4n + 1}.

Near ``t = 0`` the defining difference cancels to ``O(t^{2n+2})``; there
``M`` is taken from the exact tail ``sum_{k>n} c_{k,l} D_k(t)`` instead.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .caps import CapAverageContext, _combine, _deficit_averages, _refined, cap_table
from .errors import DomainError, ParameterError, QuadratureError
from .legendre import TAIL_TERMS, remainder_from_gap, taylor_coeff, taylor_table
from .quadrature import log_t_rule
from .weights import fine_condition_ratio

# Relative disagreement between the two resolutions a sweep tolerates per row.
SWEEP_TOL = 1e-6


def _check_nl(n, l):
    if int(n) != n or n < 0:
        raise DomainError(f"n must be a non-negative integer, got {n}")
    if int(l) != l or l < 1:
        raise DomainError(f"l must be an integer >= 1, got {l}")


def _difference(ctx, n, l, gap, W):
    den = W.sum()
    _, dm = _combine(*_deficit_averages(ctx.d, l, gap[None, :], W[None, :], np.array([den])))
    terms = [-float(dm[l, 0])]
    gk = np.ones_like(gap)
    for k in range(1, n + 1):
        gk = gk * gap
        terms.append(-taylor_coeff(ctx.d, k, l) * float(np.dot(gk, W)) / den)
    return math.fsum(terms)


def _remainder(ctx, n, l, gap, W):
    return float(np.dot(remainder_from_gap(ctx.d, l, n, gap), W) / W.sum())


def M(ctx: CapAverageContext, n: int, l: int, t: float, method: str = "auto") -> float:
    """``M_{n,l,t}``.

    ``method`` is ``"difference"`` (multiplier minus Taylor partial sum),
    ``"remainder"`` (cap average of the Taylor remainder) or ``"auto"``,
    which takes the remainder form when ``t * l <= 1``.
    """
    _check_nl(n, l)
    t = float(ctx.check_t(t))
    if l <= n:
        return 0.0
    if method == "auto":
        method = "remainder" if t * l <= 1.0 else "difference"
    if method == "difference":
        fn = _difference
    elif method == "remainder":
        fn = _remainder
    else:
        raise ParameterError(f"unknown method {method!r}")
    return float(_refined(ctx, t, l + n + ctx.d + 2, lambda g, W: np.array([fn(ctx, n, l, g, W)]))[0])


def N(ctx: CapAverageContext, n: int, l: int, t: float, form: str = "decomp") -> float:
    """``N_{n,l,t}``, as ``M_{n-1} - c_n D_n m`` (``"definition"``) or ``M_n - c_n D_n M_0`` (``"decomp"``)."""
    if n < 1:
        raise DomainError("N needs n >= 1")
    _check_nl(n, l)
    t = float(ctx.check_t(t))
    if l <= n - 1:
        return 0.0
    cn_dn = taylor_coeff(ctx.d, n, l) * gap_power_average(ctx, n, t)
    if form == "definition":
        m = 1.0 + M(ctx, 0, l, t, "difference")
        return M(ctx, n - 1, l, t) - cn_dn * m
    if form == "decomp":
        return M(ctx, n, l, t) - cn_dn * M(ctx, 0, l, t)
    raise ParameterError(f"unknown form {form!r}")


def gap_power_average(ctx: CapAverageContext, k: int, t: float) -> float:
    """``D_k(t)``, the cap average of ``(1 - cos)^k``."""
    t = float(ctx.check_t(t))

    def evaluate(gap, W):
        return np.array([np.dot(gap**k, W) / W.sum()])

    return float(_refined(ctx, t, k + ctx.d + 2, evaluate)[0])


# -- radial integrals ---------------------------------------------------

def branch_for_alpha(alpha: float) -> tuple[str, int]:
    """``("I", n)`` for ``2n < alpha < 2n + 2`` and ``("J", n)`` for ``alpha = 2n``."""
    if not alpha > 0 or not math.isfinite(alpha):
        raise ParameterError(f"alpha must be a positive number, got {alpha}")
    half = alpha / 2
    if half == int(half):
        return "J", int(half)
    return "I", int(math.floor(half))


def _t_min(T, lmax):
    return T * min(1e-6, float(max(lmax, 1)) ** -4)


def _deviation_table(ctx, kind, n, lmax, ts, anodes=None):
    """``M_n`` (kind ``"I"``) or ``N_n`` (kind ``"J"``) for ``l = 0..lmax`` at radii ``ts``."""
    if anodes is not None and anodes != ctx.nodes:
        ctx = CapAverageContext(ctx.d, ctx.weight, anodes)
    kmax = n + TAIL_TERMS
    mult, deficit, D = cap_table(ctx, lmax, kmax, ts)
    c = taylor_table(ctx.d, kmax, lmax).c
    ls = np.arange(lmax + 1)

    def remainder_rows(order):
        # exact tail where t*l <= 1, partial-sum difference elsewhere
        tail = c[order + 1:].T @ D[order + 1:]
        head = -deficit - c[1:order + 1].T @ D[1:order + 1]
        near = np.outer(ls, ts) <= 1.0
        out = np.where(near, tail, head)
        out[: order + 1] = 0.0
        return out

    Mn = remainder_rows(n)
    if kind == "I":
        return Mn
    M0 = remainder_rows(0)
    return Mn - c[n][:, None] * D[n][None, :] * M0


def _radial_values(ctx, kind, n, alpha, lmax, rnodes=16, anodes=None):
    """``I`` or ``J`` for every ``l = 0..lmax`` on one shared radial rule."""
    T = ctx.T
    t_min = _t_min(T, lmax)
    ts, ws = log_t_rule(T, lmax, t_min, rnodes)
    expo = 2.0 * alpha if kind == "I" else 4.0 * n
    dev = _deviation_table(ctx, kind, n, lmax, np.append(ts, t_min), anodes)
    body = (dev[:, :-1] ** 2 * ts ** (-expo)) @ ws
    # below t_min the deviation follows its leading power t^{2n+2}
    tail = dev[:, -1] ** 2 * t_min ** (-expo) / (4.0 * n + 4.0 - expo)
    return body + tail


def I_integral(ctx: CapAverageContext, alpha: float, n: int, l: int) -> float:
    """``I_{alpha,n}(l) = int_0^T |M_{n,l,t}|^2 t^{-2 alpha - 1} dt``."""
    _check_nl(n, l)
    if not 2 * n < alpha < 2 * n + 2:
        hint = " (alpha = 2n belongs to J_integral)" if alpha == 2 * n or alpha == 2 * n + 2 else ""
        raise ParameterError(f"I_integral needs 2n < alpha < 2n+2, got alpha={alpha}, n={n}{hint}")
    if l <= n:
        return 0.0
    return float(_radial_values(ctx, "I", n, alpha, l)[l])


def J_integral(ctx: CapAverageContext, n: int, l: int) -> float:
    """``J_n(l) = int_0^T |N_{n,l,t}|^2 t^{-4n - 1} dt``."""
    if n < 1:
        raise ParameterError("J_integral needs n >= 1")
    _check_nl(n, l)
    if l <= n - 1:
        return 0.0
    return float(_radial_values(ctx, "J", n, 2.0 * n, l)[l])


def functional_values(ctx: CapAverageContext, alpha: float, lmax: int) -> np.ndarray:
    """``I_{alpha,n}(l)`` or ``J_n(l)`` (branch from ``alpha``) for ``l = 0..lmax``."""
    kind, n = branch_for_alpha(alpha)
    return _radial_values(ctx, kind, n, alpha, lmax)


# -- sweeps -------------------------------------------------------------

def fit_slope(ls, values) -> float:
    """Least-squares slope of ``log(value)`` against ``log(l)``; zero rows are skipped."""
    ls = np.asarray(ls, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(ls[keep]), np.log(values[keep]), 1)[0])


def top_half(ls) -> np.ndarray:
    """Degrees in the upper half of the range on a log scale, ``l >= sqrt(lmin * lmax)``."""
    ls = np.asarray(ls)
    cut = math.sqrt(float(ls[0]) * float(ls[-1]))
    return ls[ls >= cut * (1 - 1e-12)]


@dataclass
class SweepResult:
    d: int
    mode: str
    param: float
    n: int
    weight: str
    power: float
    rows: list[tuple[int, float, float]]
    slope: float
    window: tuple[int, int]
    flags: list[str] = field(default_factory=list)

    @property
    def ls(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    @property
    def values(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    @property
    def normalized(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])

    def spread(self) -> float:
        """max/min of the normalized column over rows with a positive value."""
        v = self.normalized[self.values > 0]
        return float(v.max() / v.min()) if v.size else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["l", "value", "normalized"])
        for l, v, z in self.rows:
            writer.writerow([l, repr(float(v)), repr(float(z))])
        buf.write(f"# slope={self.slope!r} window=[{self.window[0]},{self.window[1]}]\n")
        for flag in self.flags:
            buf.write(f"# flag: {flag}\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "mode": self.mode,
            "param": self.param,
            "n": self.n,
            "weight": self.weight,
            "power": self.power,
            "rows": [list(r) for r in self.rows],
            "slope": self.slope,
            "window": list(self.window),
            "flags": list(self.flags),
        }


def sweep(ctx: CapAverageContext, mode: str, param: float, ls) -> SweepResult:
    """Evaluate ``I`` (``param`` = alpha) or ``J`` (``param`` = n) over degrees ``ls``.

    All degrees share one radial rule sized for ``max(ls)``.  Every row is
    recomputed on a coarser pair of rules; rows whose two values differ by
    more than ``SWEEP_TOL`` are flagged rather than dropped.
    """
    ls = np.asarray(list(ls), dtype=int)
    if ls.size == 0:
        raise ParameterError("empty degree range")
    if np.any(np.diff(ls) <= 0) or ls[0] < 1:
        raise ParameterError("degrees must be ascending and >= 1")
    mode = mode.upper()
    flags = []
    if mode == "I":
        alpha = float(param)
        kind, n = branch_for_alpha(alpha)
        if kind != "I":
            raise ParameterError(f"alpha={alpha} is an even integer; use a J sweep with n={n}")
        power = 2.0 * alpha
    elif mode == "J":
        if int(param) != param or param < 1:
            raise ParameterError(f"J sweep needs an integer n >= 1, got {param}")
        n = int(param)
        alpha = 2.0 * n
        power = 4.0 * n
        ratio = fine_condition_ratio(ctx.weight, ctx.d, n)
        if ratio >= 1.0:
            flags.append(f"hypothesis unmet: fine condition ratio {ratio:.6g} >= 1")
    else:
        raise ParameterError(f"mode must be I or J, got {mode!r}")
    lmax = int(ls[-1])
    fine = _radial_values(ctx, mode, n, alpha, lmax)[ls]
    coarse = _radial_values(ctx, mode, n, alpha, lmax, rnodes=12, anodes=max(16, ctx.nodes - 8))[ls]
    err = np.abs(fine - coarse) / np.maximum(np.abs(fine), 1e-300)
    bad = ls[(err > SWEEP_TOL) & (fine > 0)]
    if bad.size:
        flags.append("quadrature: unconverged rows l=" + ",".join(str(int(l)) for l in bad))
    rows = [(int(l), float(v), float(v / float(l) ** power)) for l, v in zip(ls, fine)]
    win = top_half(ls)
    slope = fit_slope(win, fine[np.searchsorted(ls, win)])
    return SweepResult(ctx.d, mode, float(param), n, ctx.weight.label, power, rows, slope,
                       (int(win[0]), int(win[-1])), flags)


def unconverged(result: SweepResult) -> bool:
    return any(f.startswith("quadrature:") for f in result.flags)


def require_converged(result: SweepResult) -> SweepResult:
    if unconverged(result):
        raise QuadratureError("; ".join(result.flags))
    return result


# -- angle diagnostics ----------------------------------------------------

def k_dn(d: int, n: int, l: int) -> float:
    """Relative window ``P^{(n)}(1) / P^{(n+1)}(1)``; ``1/2`` when ``l = n``."""
    if l < n:
        raise DomainError("need l >= n")
    if l == n:
        return 0.5
    return (2 * n + d - 1) / ((l + n + d - 2) * (l - n))


def cap_angle(d: int, n: int, l: int, eps: float) -> float:
    """Angle ``a`` with ``cos a = 1 - eps * k_dn(d, n, l)``; behaves like ``sqrt(eps) / l``."""
    if not 0.0 < eps < 0.5:
        raise DomainError("eps must lie in (0, 1/2)")
    return math.acos(1.0 - eps * k_dn(d, n, l))
