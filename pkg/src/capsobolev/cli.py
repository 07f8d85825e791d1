"""Command-line interface.

Subcommands: ``weights-check``, ``sweep``, ``equivalence``, ``oracle-compare``.
Exit codes: 0 ok, 2 invalid weight, 3 quadrature failure (partial output
kept), 4 even-integer alpha given to an I sweep, 5 dimension mismatch,
6 oracle disagreement above tolerance.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from .caps import CapAverageContext, multipliers
from .errors import ParameterError, QuadratureError, WeightError
from .remainders import sweep, unconverged
from .sobolev import equivalence_report
from .sphere2 import (HarmonicCoeffs, ResolutionWarning, check_cap, cap_average_basis, real_sph_harm,
                      unit_to_spherical)
from .weights import Weight, fine_condition_ratio, validate

EXIT_OK = 0
EXIT_WEIGHT = 2
EXIT_QUADRATURE = 3
EXIT_BRANCH = 4
EXIT_DIMENSION = 5
EXIT_ORACLE = 6

ORACLE_TOL = 1e-6


@dataclass
class RunConfig:
    command: str
    weight: Weight | None = None
    d: list[int] = field(default_factory=lambda: [3])
    alpha: list[float] | None = None
    n: list[int] | None = None
    lmin: int = 16
    lmax: int = 256
    band: int = 16
    t: list[float] | None = None
    points: int = 5
    coeffs: str | None = None
    out: str | None = None
    format: str = "csv"
    seed: int = 0


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _load_weight(path) -> Weight:
    if path is None:
        return Weight.constant()
    try:
        with open(path) as fh:
            w = Weight.from_json(fh.read())
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(EXIT_WEIGHT, f"cannot read weight {path}: {exc}") from exc
    report = validate(w)
    if not report.ok:
        raise CliError(EXIT_WEIGHT, "invalid weight: " + "; ".join(f"{c}: {m}" for c, m in report.failures))
    return w


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_weights_check(cfg: RunConfig) -> int:
    w = cfg.weight
    rows = []
    for d in cfg.d:
        for n in cfg.n or [1]:
            try:
                ratio = fine_condition_ratio(w, d, n)
                verdict = "satisfies" if ratio < 1 else "fails"
            except WeightError as exc:
                ratio, verdict = float("nan"), f"degenerate ({exc})"
            rows.append({"d": d, "n": n, "ratio": ratio, "verdict": verdict})
    if cfg.format == "json":
        text = json.dumps({"weight": w.to_dict(), "valid": True, "checks": rows}) + "\n"
    else:
        lines = [f"weight {w.label}: valid"]
        lines += [f"d={r['d']} n={r['n']} ratio={r['ratio']:.12g} {r['verdict']}" for r in rows]
        text = "\n".join(lines) + "\n"
    _emit(text, cfg.out)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    if (cfg.alpha is None) == (cfg.n is None):
        raise CliError(EXIT_BRANCH, "give exactly one of --alpha (I sweep) or --n (J sweep)")
    d = cfg.d[0]
    ctx = CapAverageContext(d, cfg.weight)
    ls = range(cfg.lmin, cfg.lmax + 1)
    if cfg.alpha is not None:
        alpha = cfg.alpha[0]
        if alpha > 0 and alpha / 2 == int(alpha / 2):
            raise CliError(EXIT_BRANCH, f"alpha={alpha} is an even integer: run a J sweep with --n {int(alpha / 2)}")
        mode, param = "I", alpha
    else:
        mode, param = "J", cfg.n[0]
    try:
        result = sweep(ctx, mode, param, ls)
    except QuadratureError as exc:
        raise CliError(EXIT_QUADRATURE, f"quadrature failure: {exc}") from exc
    except ParameterError as exc:
        raise CliError(EXIT_BRANCH, str(exc)) from exc
    text = result.to_csv() if cfg.format == "csv" else json.dumps(result.to_dict()) + "\n"
    _emit(text, cfg.out)
    for flag in result.flags:
        print(f"warning: {flag}", file=sys.stderr)
    if unconverged(result):
        return EXIT_QUADRATURE
    return EXIT_OK


def cmd_equivalence(cfg: RunConfig) -> int:
    if not cfg.coeffs:
        raise CliError(EXIT_DIMENSION, "--coeffs FILE is required")
    with open(cfg.coeffs) as fh:
        coeffs = HarmonicCoeffs.from_json(fh.read())
    d = cfg.d[0]
    if coeffs.d != d:
        raise CliError(EXIT_DIMENSION, f"coefficient file has d={coeffs.d} but --d {d}")
    ctx = CapAverageContext(d, cfg.weight)
    reports = [equivalence_report(coeffs, a, ctx) for a in (cfg.alpha or [1.0])]
    payload = [json.loads(r.to_json()) for r in reports]
    text = json.dumps(payload[0] if len(payload) == 1 else payload) + "\n"
    _emit(text, cfg.out)
    return EXIT_OK


def oracle_compare(weight: Weight, band: int, ts, points: int, seed: int):
    """Worst ``|A_t Y_{l,m}(xi) - m_{l,t} Y_{l,m}(xi)|`` over degrees, radii and random centers."""
    ctx = CapAverageContext(3, weight)
    rng = np.random.default_rng(seed)
    xis = rng.standard_normal((points, 3))
    xis /= np.linalg.norm(xis, axis=1, keepdims=True)
    worst = (0.0, None)
    for t in ts:
        check_cap(weight, float(t), band)
        m = multipliers(ctx, band, t)
        for xi in xis:
            B, _ = cap_average_basis(band, xi, t, weight)
            theta, phi = unit_to_spherical(xi)
            y = real_sph_harm(band, theta, phi)[0]
            for l in range(band + 1):
                blk = B[l, band - l:band + l + 1]
                err = float(np.max(np.abs(blk - m[l] * y[l * l:l * l + 2 * l + 1])))
                if err > worst[0] or worst[1] is None:
                    worst = (err, {"l": l, "t": float(t), "xi": xi.tolist()})
    return worst


def default_oracle_ts(T: float, band: int, num: int = 10) -> np.ndarray:
    lo = min(T, max(2.0 * math.pi / max(band, 1), T / 20))
    return np.geomspace(lo, T, num)


def cmd_oracle_compare(cfg: RunConfig) -> int:
    if cfg.d[0] != 3:
        raise CliError(EXIT_DIMENSION, f"oracle-compare works on S^2 (d=3), got d={cfg.d[0]}")
    w = cfg.weight
    ts = np.asarray(cfg.t) if cfg.t else default_oracle_ts(w.T, cfg.band)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ResolutionWarning)
        err, where = oracle_compare(w, cfg.band, ts, cfg.points, cfg.seed)
    seen = set()
    for c in caught:
        msg = str(c.message)
        if msg not in seen:
            seen.add(msg)
            print(f"warning: {msg}", file=sys.stderr)
    ok = err <= ORACLE_TOL
    if cfg.format == "json":
        text = json.dumps({"max_error": err, "worst": where, "tolerance": ORACLE_TOL, "pass": ok}) + "\n"
    else:
        text = f"max |direct - multiplier| = {err:.3e} ({'PASS' if ok else 'FAIL'} at {ORACLE_TOL:g})\n"
        if not ok:
            text += f"worst case: {where}\n"
    _emit(text, cfg.out)
    return EXIT_OK if ok else EXIT_ORACLE


COMMANDS = {
    "weights-check": cmd_weights_check,
    "sweep": cmd_sweep,
    "equivalence": cmd_equivalence,
    "oracle-compare": cmd_oracle_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capsobolev", description="Weighted cap averages and Sobolev square functions.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt="csv"):
        p.add_argument("--weight", metavar="FILE", help="weight JSON (default: constant weight on [0, pi])")
        p.add_argument("--d", type=int, nargs="+", default=[3], help="ambient dimension(s)")
        p.add_argument("--out", metavar="FILE", help="output file (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"], default=fmt)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("weights-check", help="validate a weight and report the fine-condition ratio")
    common(p)
    p.add_argument("--n", type=int, nargs="+", default=[1])

    p = sub.add_parser("sweep", help="I or J values over a degree range, with fitted slope")
    common(p)
    p.add_argument("--alpha", type=float, nargs=1)
    p.add_argument("--n", type=int, nargs=1)
    p.add_argument("--lmin", type=int, default=16)
    p.add_argument("--lmax", type=int, default=256)

    p = sub.add_parser("equivalence", help="Sobolev norm versus square-function norm")
    common(p, "json")
    p.add_argument("--coeffs", metavar="FILE", required=True, help="coefficient JSON")
    p.add_argument("--alpha", type=float, nargs="+", default=[1.0])

    p = sub.add_parser("oracle-compare", help="direct cap quadrature versus multipliers on S^2")
    common(p)
    p.add_argument("--band", type=int, default=16)
    p.add_argument("--t", type=float, nargs="+", help="cap radii (default: 10 log-spaced values)")
    p.add_argument("--points", type=int, default=5, help="random centers per radius")
    return parser


def parse_config(argv=None) -> tuple[RunConfig, str | None]:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(command=args.command, d=args.d, out=args.out, format=args.format, seed=args.seed)
    for name in ("alpha", "n", "lmin", "lmax", "band", "t", "points", "coeffs"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    return cfg, args.weight


def main(argv=None) -> int:
    cfg, weight_path = parse_config(argv)
    try:
        cfg.weight = _load_weight(weight_path)
        return COMMANDS[cfg.command](cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except WeightError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_WEIGHT


if __name__ == "__main__":
    sys.exit(main())
