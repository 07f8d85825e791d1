"""Angular weights rho on [0, T] used by the cap averages.

A weight carries two markers ``0 < t0 < T0 <= T`` (``T0 < pi``) between
which it must have positive mass.  Four kinds are supported:

``constant``   rho = 1 on [0, T]
``indicator``  rho = 1 on [t0, T0], 0 elsewhere
``power``      rho = theta**p on [0, T]
``table``      piecewise-linear interpolation of (theta, rho) pairs, 0 outside
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, WeightError
from .quadrature import composite_rule, gauss_jacobi_left, gauss_legendre, panel_count

KINDS = ("constant", "indicator", "power", "table")

# Gauss-Legendre nodes per table interval for moments.
TABLE_MOMENT_NODES = 8


@dataclass(frozen=True)
class Weight:
    kind: str
    T: float
    t0: float
    T0: float
    p: float | None = None
    table: tuple[tuple[float, float], ...] | None = field(default=None)

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, T: float = math.pi, t0: float | None = None, T0: float | None = None) -> Weight:
        t0, T0 = _default_markers(T, t0, T0)
        return cls("constant", float(T), t0, T0)

    @classmethod
    def indicator(cls, T: float, t0: float, T0: float) -> Weight:
        return cls("indicator", float(T), float(t0), float(T0))

    @classmethod
    def power(cls, T: float, p: float, t0: float | None = None, T0: float | None = None) -> Weight:
        t0, T0 = _default_markers(T, t0, T0)
        return cls("power", float(T), t0, T0, p=float(p))

    @classmethod
    def from_table(cls, T: float, pairs, t0: float | None = None, T0: float | None = None) -> Weight:
        """Table weight; missing markers are found by scanning for positive mass."""
        table = tuple((float(a), float(b)) for a, b in pairs)
        if t0 is None or T0 is None:
            t0, T0 = _scan_markers(float(T), table)
        return cls("table", float(T), float(t0), float(T0), table=table)

    # -- serialization ------------------------------------------------
    def to_dict(self) -> dict:
        out = {"kind": self.kind, "T": self.T, "t0": self.t0, "T0": self.T0}
        if self.p is not None:
            out["p"] = self.p
        if self.table is not None:
            out["table"] = [list(row) for row in self.table]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> Weight:
        kind = data.get("kind")
        T = float(data["T"])
        t0 = data.get("t0")
        T0 = data.get("T0")
        if kind == "table":
            return cls.from_table(T, data.get("table") or (), t0, T0)
        if kind in ("constant", "power") and (t0 is None or T0 is None):
            t0, T0 = _default_markers(T, t0, T0)
        if t0 is None or T0 is None:
            raise WeightError(f"weight kind {kind!r} needs explicit t0 and T0")
        p = data.get("p")
        return cls(str(kind), T, float(t0), float(T0), p=None if p is None else float(p))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> Weight:
        return cls.from_dict(json.loads(text))

    @property
    def label(self) -> str:
        extra = f",p={self.p:g}" if self.p is not None else ""
        return f"{self.kind}(T={self.T:g},t0={self.t0:g},T0={self.T0:g}{extra})"

    def __repr__(self):
        return f"Weight<{self.label}>"


def _default_markers(T, t0, T0):
    # rho > 0 on all of [0, T], so any admissible pair works
    if t0 is None:
        t0 = T / 4
    if T0 is None:
        T0 = min(3 * T / 4, 0.99 * math.pi)
    return float(t0), float(T0)


def _scan_markers(T, table):
    for (a, ra), (b, rb) in zip(table, table[1:]):
        if b > a and ra + rb > 0 and ra >= 0 and rb >= 0:
            width = b - a
            return a + 0.25 * width, a + 0.75 * width
    if len(table) >= 2 and table[-1][0] > table[0][0]:
        # no usable interval: keep the table's span so validation names the failing clauses
        lo, hi = table[0][0], table[-1][0]
        return lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo)
    raise WeightError("table weight has no interval of positive mass")


# -- validation -------------------------------------------------------

@dataclass
class ValidationReport:
    failures: list[tuple[str, str]]

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def clauses(self) -> list[str]:
        return [c for c, _ in self.failures]

    def __str__(self):
        if self.ok:
            return "valid"
        return "invalid: " + "; ".join(f"{c}: {m}" for c, m in self.failures)


def validate(w: Weight) -> ValidationReport:
    """Check every clause of the weight class; never raises."""
    fails: list[tuple[str, str]] = []
    if w.kind not in KINDS:
        return ValidationReport([("kind", f"unknown kind {w.kind!r}")])
    nums = [w.T, w.t0, w.T0]
    if w.p is not None:
        nums.append(w.p)
    if w.table is not None:
        nums.extend(v for row in w.table for v in row)
    if not all(math.isfinite(v) for v in nums):
        fails.append(("square-integrable", "non-finite parameter or table value"))
        return ValidationReport(fails)
    if not 0.0 < w.T <= math.pi:
        fails.append(("T-range", f"T={w.T} not in (0, pi]"))
    if not 0.0 < w.t0 < w.T0 <= w.T:
        fails.append(("ordering", f"need 0 < t0 < T0 <= T, got t0={w.t0}, T0={w.T0}, T={w.T}"))
    if w.T0 >= math.pi:
        fails.append(("T0-below-pi", f"T0={w.T0} must be < pi"))
    if w.kind == "power":
        if w.p is None or w.p < 0:
            fails.append(("params", "power weight needs exponent p >= 0"))
    if w.kind == "table":
        tab = w.table or ()
        thetas = [a for a, _ in tab]
        if len(tab) < 2:
            fails.append(("params", "table needs at least two (theta, rho) pairs"))
        elif any(b <= a for a, b in zip(thetas, thetas[1:])):
            fails.append(("params", "table thetas must be strictly increasing"))
        elif thetas[0] < 0 or thetas[-1] > w.T:
            fails.append(("params", "table thetas must lie in [0, T]"))
        if any(r < 0 for _, r in tab):
            fails.append(("nonnegativity", "table contains negative rho values"))
    if not fails:
        if _integral(w, 0, w.t0, w.T0) <= 0.0:
            fails.append(("positive-mass", "integral of rho over [t0, T0] is not positive"))
    return ValidationReport(fails)


def require_valid(w: Weight) -> Weight:
    report = validate(w)
    if not report.ok:
        raise WeightError(str(report))
    return w


# -- pointwise values and moments -------------------------------------

def eval_rho(w: Weight, theta):
    scalar = np.ndim(theta) == 0
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0) or np.any(th > w.T) or np.any(np.isnan(th)):
        raise DomainError(f"theta must lie in [0, T={w.T}]")
    val = _rho(w, th)
    return float(val) if scalar else val


def _rho(w, th):
    if w.kind == "constant":
        return np.ones_like(th)
    if w.kind == "indicator":
        return ((th >= w.t0) & (th <= w.T0)).astype(float)
    if w.kind == "power":
        return th**w.p
    xs, ys = np.array(w.table).T
    return np.interp(th, xs, ys, left=0.0, right=0.0)


def _integral(w: Weight, k: int, a: float, b: float) -> float:
    """``int_a^b theta^k rho(theta) d theta`` for 0 <= a <= b <= T."""
    if b <= a:
        return 0.0
    if w.kind == "constant":
        return (b ** (k + 1) - a ** (k + 1)) / (k + 1)
    if w.kind == "indicator":
        lo, hi = max(a, w.t0), min(b, w.T0)
        if hi <= lo:
            return 0.0
        return (hi ** (k + 1) - lo ** (k + 1)) / (k + 1)
    if w.kind == "power":
        e = k + w.p + 1
        return (b**e - a**e) / e
    x, wq = gauss_legendre(TABLE_MOMENT_NODES)
    total = []
    for (xa, _), (xb, _) in zip(w.table, w.table[1:]):
        lo, hi = max(a, xa), min(b, xb)
        if hi <= lo:
            continue
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        th = mid + half * x
        total.append(half * np.sum(wq * th**k * _rho(w, th)))
    return math.fsum(total)


def moment(w: Weight, k: int, upper: float) -> float:
    """``int_0^upper theta^k rho(theta) d theta``."""
    if k < 0:
        raise DomainError("moment order must be >= 0")
    if not 0.0 < upper <= w.T:
        raise DomainError(f"upper={upper} not in (0, T={w.T}]")
    return _integral(w, k, 0.0, upper)


def fine_condition_ratio(w: Weight, d: int, n: int) -> float:
    """Left side of the moment condition that secures the ``alpha = 2n`` lower bound.

    The weight qualifies when the returned value is ``< 1``.
    """
    if d < 2 or n < 1:
        raise DomainError("need d >= 2 and n >= 1")
    num_a = moment(w, d - 2, w.T)
    num_b = moment(w, 2 * n + d, w.T)
    den = [moment(w, d - 2, w.T0), moment(w, d, w.T0), moment(w, 2 * n + d - 2, w.T0)]
    if min(den) <= 0.0:
        raise WeightError("degenerate weight: a moment up to T0 vanishes")
    return (d - 1) / (d + 2 * n - 1) * num_a * num_a * num_b / (den[0] * den[1] * den[2])


# -- quadrature against rho -------------------------------------------

def _segments(w: Weight):
    if w.kind == "indicator":
        return [(w.t0, w.T0)]
    if w.kind == "table":
        lo = max(0.0, w.table[0][0])
        hi = min(w.T, w.table[-1][0])
        cuts = [lo] + [a for a, _ in w.table if lo < a < hi] + [hi]
        return list(zip(cuts, cuts[1:]))
    return [(0.0, w.T)]


def rho_rule(w: Weight, bandwidth: float, nodes: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``theta_i`` and weights ``v_i`` with ``sum v_i g(theta_i) ~ int_0^T g rho``.

    ``bandwidth`` bounds the angular frequency of ``g`` (radians per
    radian of theta); panels never straddle a kink or jump of rho.
    """
    counts = tuple(panel_count(b - a, bandwidth, nodes) for a, b in _segments(w))
    return _rho_rule_cached(w, counts, nodes)


@lru_cache(maxsize=2048)
def _rho_rule_cached(w, counts, nodes):
    pts, wts = [], []
    for (a, b), npan in zip(_segments(w), counts):
        x, v = composite_rule(a, b, npan, nodes)
        if w.kind == "power" and a == 0.0 and w.p != int(w.p):
            # Jacobi panel absorbs the theta**p singularity at the origin
            h = (b - a) / npan
            xj, vj = gauss_jacobi_left(nodes, w.p)
            x, v = np.array(x), np.array(v)
            pts.append(h * xj)
            wts.append(h ** (w.p + 1) * vj)
            x, v = x[nodes:], v[nodes:]
        pts.append(x)
        wts.append(v * _rho(w, np.asarray(x)))
    theta = np.concatenate(pts)
    weights = np.concatenate(wts)
    theta.setflags(write=False)
    weights.setflags(write=False)
    return theta, weights
