"""Composite Gauss rules shared by the angular and radial integrations."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

# Largest phase (radians) a panel may carry, per node.  GL with n nodes
# integrates exp(i w x) on a panel of phase w*h <= 0.6 n to ~1e-14.
PHASE_PER_NODE = 0.6


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1] (read-only arrays)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=64)
def gauss_jacobi_left(n: int, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0, 1] for integrals of ``g(x) x^p``."""
    x, w = roots_jacobi(n, 0.0, p)
    nodes = 0.5 * (x + 1.0)
    weights = w * 0.5 ** (p + 1.0)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def panel_count(length: float, bandwidth: float, nodes: int) -> int:
    """Panels needed to resolve oscillation ``bandwidth`` (rad per unit) over ``length``."""
    return max(1, math.ceil(length * bandwidth / (PHASE_PER_NODE * nodes)))


@lru_cache(maxsize=4096)
def composite_rule(a: float, b: float, panels: int, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """``panels`` equal Gauss-Legendre panels of ``nodes`` points on [a, b]."""
    x, w = gauss_legendre(nodes)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def log_t_rule(T: float, lmax: int, t_min: float, nodes: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Rule for ``int_{t_min}^T g(t) dt / t`` under ``t = T exp(-u)``.

    Returns ``(t, w)`` with ``sum(w * g(t))`` approximating the integral.
    Panels in ``u`` are short where the integrand oscillates with
    frequency ``~ 2 lmax t`` and at most 0.5 long elsewhere.
    """
    if not 0.0 < t_min < T:
        raise ValueError("need 0 < t_min < T")
    u_max = math.log(T / t_min)
    x, w = gauss_legendre(nodes)
    max_phase = PHASE_PER_NODE * nodes
    edges = [0.0]
    u = 0.0
    while u < u_max:
        rate = 2.0 * (lmax + 2) * T * math.exp(-u) + 1.0
        step = min(0.5, max_phase / rate)
        u = min(u_max, u + step)
        edges.append(u)
    edges = np.asarray(edges)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    us = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    return T * np.exp(-us), ws
