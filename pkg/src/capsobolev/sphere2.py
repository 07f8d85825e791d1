"""Grid oracle on S^2: harmonic transforms, direct cap averages, square functions.

Real orthonormal harmonics (unit L^2 norm for surface measure, total area
4 pi) are indexed by degree ``l`` and order ``-l <= m <= l``:

    Y_{l,0} = p_l^0(theta),  Y_{l,m} = sqrt2 p_l^m(theta) cos(m phi),  Y_{l,-m} = sqrt2 p_l^m(theta) sin(m phi)

with ``p_l^m`` the normalized associated Legendre functions (the
convention of :func:`scipy.special.sph_legendre_p_all`).  A block of :class:`HarmonicCoeffs`
lists the orders ``m = -l..l`` in increasing order.

Cap averages here never touch the multipliers: the cap around ``xi`` is
rotated to the north pole, sampled with the weight's angular rule times
``2L + 1`` equispaced azimuths, and the function is synthesized at the
rotated nodes.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .caps import CapAverageContext, cap_table
from .errors import DomainError, ParameterError
from .quadrature import log_t_rule
from .remainders import branch_for_alpha
from .weights import Weight, require_valid, rho_rule

# Square-function radial integrals stop at this fraction of T; the rest is a power-law tail.
SQ_T_MIN = 1e-4
# Entries of the (l, m, node) Legendre array built at once.
_CHUNK_ENTRIES = 1 << 21


class ResolutionWarning(UserWarning):
    """The cap is narrower than the grid spacing ``2 pi / L``."""


def harmonic_dim(d: int, l: int) -> int:
    """Dimension of the space of degree-``l`` spherical harmonics on S^{d-1}."""
    if l < 0:
        raise DomainError("degree must be >= 0")
    if d == 2:
        return 1 if l == 0 else 2
    upper = math.comb(l + d - 1, d - 1)
    lower = math.comb(l + d - 3, d - 1) if l >= 2 else 0
    return upper - lower


@dataclass(frozen=True, eq=False)
class HarmonicCoeffs:
    """Band-limited coefficients ``f_hat[l][j]``, one block per degree."""

    d: int
    blocks: tuple

    def __post_init__(self):
        if self.d < 2:
            raise DomainError("d must be >= 2")
        blocks = []
        for l, b in enumerate(self.blocks):
            arr = np.array(b, dtype=float)
            if arr.shape != (harmonic_dim(self.d, l),):
                raise ParameterError(f"block {l} has shape {arr.shape}, expected ({harmonic_dim(self.d, l)},)")
            arr.setflags(write=False)
            blocks.append(arr)
        if not blocks:
            raise ParameterError("need at least the degree-0 block")
        object.__setattr__(self, "blocks", tuple(blocks))

    @property
    def L(self) -> int:
        return len(self.blocks) - 1

    @classmethod
    def zeros(cls, d: int, L: int) -> HarmonicCoeffs:
        return cls(d, tuple(np.zeros(harmonic_dim(d, l)) for l in range(L + 1)))

    @classmethod
    def random(cls, d: int, L: int, rng=None, decay: float = 0.0) -> HarmonicCoeffs:
        """Gaussian coefficients, block ``l`` scaled by ``(1 + l)^-decay``."""
        rng = np.random.default_rng(rng)
        return cls(d, tuple(rng.standard_normal(harmonic_dim(d, l)) * (1.0 + l) ** -decay
                            for l in range(L + 1)))

    @classmethod
    def single(cls, d: int, L: int, l: int, block=None, rng=None) -> HarmonicCoeffs:
        """Only degree ``l`` populated (random block unless given)."""
        if not 0 <= l <= L:
            raise DomainError(f"degree {l} outside 0..{L}")
        out = [np.zeros(harmonic_dim(d, k)) for k in range(L + 1)]
        out[l] = np.random.default_rng(rng).standard_normal(harmonic_dim(d, l)) if block is None else block
        return cls(d, tuple(out))

    def scale_blocks(self, factors) -> HarmonicCoeffs:
        factors = np.asarray(factors, dtype=float)
        if factors.shape[0] < self.L + 1:
            raise ParameterError("need one factor per degree")
        return HarmonicCoeffs(self.d, tuple(b * factors[l] for l, b in enumerate(self.blocks)))

    def block_norms_sq(self) -> np.ndarray:
        return np.array([float(np.dot(b, b)) for b in self.blocks])

    def norm_sq(self) -> float:
        return math.fsum(self.block_norms_sq())

    def _combine(self, other, op):
        if not isinstance(other, HarmonicCoeffs):
            return NotImplemented
        if other.d != self.d or other.L != self.L:
            raise ParameterError("coefficient sets differ in d or band limit")
        return HarmonicCoeffs(self.d, tuple(op(a, b) for a, b in zip(self.blocks, other.blocks)))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        return HarmonicCoeffs(self.d, tuple(b * float(scalar) for b in self.blocks))

    __rmul__ = __mul__

    def to_dense(self) -> np.ndarray:
        """``(L + 1, 2L + 1)`` array with order ``m`` in column ``m + L`` (d = 3 only)."""
        _require_d3(self.d)
        L = self.L
        out = np.zeros((L + 1, 2 * L + 1))
        for l, b in enumerate(self.blocks):
            out[l, L - l:L + l + 1] = b
        return out

    @classmethod
    def from_dense(cls, dense) -> HarmonicCoeffs:
        dense = np.asarray(dense, dtype=float)
        L = dense.shape[0] - 1
        return cls(3, tuple(dense[l, L - l:L + l + 1] for l in range(L + 1)))

    def to_dict(self) -> dict:
        return {"d": self.d, "L": self.L, "blocks": [b.tolist() for b in self.blocks]}

    @classmethod
    def from_dict(cls, data: dict) -> HarmonicCoeffs:
        out = cls(int(data["d"]), tuple(data["blocks"]))
        if "L" in data and int(data["L"]) != out.L:
            raise ParameterError(f"declared L={data['L']} but {out.L + 1} blocks given")
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> HarmonicCoeffs:
        return cls.from_dict(json.loads(text))


def _require_d3(d):
    if d != 3:
        raise ParameterError(f"grid operations are implemented for d = 3 only, got d = {d}")


# -- grid -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SphericalGrid:
    """Gauss-Legendre colatitudes (L + 1) times equispaced longitudes (2L + 1).

    Exact for products of two functions of band limit ``L``.
    """

    L: int

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 0:
            raise DomainError("band limit must be a non-negative integer")

    @cached_property
    def _gl(self):
        x, w = np.polynomial.legendre.leggauss(self.L + 1)
        return x[::-1].copy(), w[::-1].copy()  # colatitude ascending

    @property
    def cos_theta(self) -> np.ndarray:
        return self._gl[0]

    @property
    def gl_weights(self) -> np.ndarray:
        """Weights in ``cos theta``; they sum to 2."""
        return self._gl[1]

    @cached_property
    def theta(self) -> np.ndarray:
        return np.arccos(self.cos_theta)

    @cached_property
    def phi(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(2 * self.L + 1) / (2 * self.L + 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.L + 1, 2 * self.L + 1)

    @cached_property
    def area_weights(self) -> np.ndarray:
        return self.gl_weights[:, None] * (2.0 * np.pi / (2 * self.L + 1)) * np.ones(self.shape)

    def points(self) -> np.ndarray:
        """Unit vectors, shape ``(L + 1, 2L + 1, 3)``."""
        th, ph = np.meshgrid(self.theta, self.phi, indexing="ij")
        return spherical_to_unit(th, ph)

    def integrate(self, samples) -> float:
        samples = np.asarray(samples, dtype=float)
        if samples.shape != self.shape:
            raise ParameterError(f"samples shape {samples.shape} != grid shape {self.shape}")
        return float(np.sum(self.area_weights * samples))


def spherical_to_unit(theta, phi) -> np.ndarray:
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def unit_to_spherical(v):
    v = np.asarray(v, dtype=float)
    theta = np.arctan2(np.hypot(v[..., 0], v[..., 1]), v[..., 2])
    phi = np.arctan2(v[..., 1], v[..., 0])
    return theta, phi


def _legendre(L, theta):
    """``p[l, m, i]`` for ``0 <= m <= L`` at colatitudes ``theta``.

    Same normalization and phase as :func:`scipy.special.sph_legendre_p_all`,
    which also builds the negative orders and is several times slower here.
    """
    theta = np.asarray(theta, dtype=float)
    x, s = np.cos(theta), np.sin(theta)
    p = np.zeros((L + 1, L + 1) + theta.shape)
    pmm = np.full(theta.shape, 0.5 / math.sqrt(math.pi))
    for m in range(L + 1):
        if m > 0:
            pmm = -math.sqrt((2 * m + 1) / (2 * m)) * s * pmm
        p[m, m] = pmm
        if m < L:
            p[m + 1, m] = math.sqrt(2 * m + 3) * x * pmm
        for l in range(m + 2, L + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            p[l, m] = a * (x * p[l - 1, m] - b * p[l - 2, m])
    return p


def real_sph_harm(L: int, theta, phi) -> np.ndarray:
    """Basis values, shape ``(n, (L+1)^2)`` with column ``l^2 + l + m``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    p = _legendre(L, theta)
    out = np.empty((theta.size, (L + 1) ** 2))
    for l in range(L + 1):
        base = l * l + l
        out[:, base] = p[l, 0]
        for m in range(1, l + 1):
            out[:, base + m] = math.sqrt(2) * p[l, m] * np.cos(m * phi)
            out[:, base - m] = math.sqrt(2) * p[l, m] * np.sin(m * phi)
    return out


def _split(dense):
    """Cosine and sine parts ``(l, m)`` for ``m = 0..L`` from a dense ``(..., L+1, 2L+1)`` array."""
    L = dense.shape[-2] - 1
    cos_part = dense[..., L:].copy()
    sin_part = np.zeros_like(cos_part)
    sin_part[..., 1:] = dense[..., L - 1::-1]
    scale = np.full(L + 1, math.sqrt(2))
    scale[0] = 1.0
    return cos_part * scale, sin_part * scale


def _merge(cos_part, sin_part):
    L = cos_part.shape[-2] - 1
    scale = np.full(L + 1, math.sqrt(2))
    scale[0] = 1.0
    dense = np.zeros(cos_part.shape[:-1] + (2 * L + 1,))
    dense[..., L:] = cos_part * scale
    dense[..., :L] = (sin_part * scale)[..., :0:-1]
    return dense


def synthesis(coeffs: HarmonicCoeffs, grid: SphericalGrid) -> np.ndarray:
    """Samples of ``f`` on the grid."""
    _require_d3(coeffs.d)
    if coeffs.L > grid.L:
        raise ParameterError(f"band limit {coeffs.L} exceeds grid L={grid.L}")
    dense = _pad(coeffs.to_dense(), grid.L)
    c, s = _split(dense)
    p = _legendre(grid.L, grid.theta)
    qc = np.einsum("lm,lmi->im", c, p)
    qs = np.einsum("lm,lmi->im", s, p)
    mphi = np.outer(np.arange(grid.L + 1), grid.phi)
    return qc @ np.cos(mphi) + qs @ np.sin(mphi)


def analysis(grid: SphericalGrid, samples) -> HarmonicCoeffs:
    """Coefficients of band limit ``grid.L`` by exact grid quadrature."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape != grid.shape:
        raise ParameterError(f"samples shape {samples.shape} != grid shape {grid.shape}")
    L = grid.L
    dphi = 2.0 * np.pi / (2 * L + 1)
    mphi = np.outer(grid.phi, np.arange(L + 1))
    gc = samples @ np.cos(mphi) * dphi
    gs = samples @ np.sin(mphi) * dphi
    p = _legendre(L, grid.theta) * grid.gl_weights
    c = np.einsum("im,lmi->lm", gc, p)
    s = np.einsum("im,lmi->lm", gs, p)
    return HarmonicCoeffs.from_dense(_merge(c, s))


def _pad(dense, L):
    Lc = dense.shape[-2] - 1
    if Lc == L:
        return dense
    out = np.zeros(dense.shape[:-2] + (L + 1, 2 * L + 1))
    out[..., : Lc + 1, L - Lc:L + Lc + 1] = dense
    return out


def evaluate(coeffs: HarmonicCoeffs, points) -> np.ndarray:
    """``f`` at unit vectors ``points`` (shape ``(..., 3)``)."""
    _require_d3(coeffs.d)
    pts = np.asarray(points, dtype=float)
    theta, phi = unit_to_spherical(pts.reshape(-1, 3))
    c, s = _split(coeffs.to_dense())
    L = coeffs.L
    out = np.empty(theta.size)
    step = max(1, _CHUNK_ENTRIES // ((L + 1) ** 2))
    m = np.arange(L + 1)
    for a in range(0, theta.size, step):
        p = _legendre(L, theta[a:a + step])
        ang = np.outer(m, phi[a:a + step])
        out[a:a + step] = (np.einsum("lm,lmi->mi", c, p) * np.cos(ang)
                           + np.einsum("lm,lmi->mi", s, p) * np.sin(ang)).sum(axis=0)
    return out.reshape(pts.shape[:-1])


def as_coeffs(f, grid: SphericalGrid) -> HarmonicCoeffs:
    """Accept coefficients or grid samples."""
    if isinstance(f, HarmonicCoeffs):
        _require_d3(f.d)
        return f
    return analysis(grid, f)


# -- direct cap averages --------------------------------------------------

def rotation_to(xi) -> np.ndarray:
    """Rotation matrix ``R`` with ``R @ e_z = xi`` (Rodrigues, about ``e_z x xi``)."""
    xi = np.asarray(xi, dtype=float)
    nrm = np.linalg.norm(xi)
    if not nrm > 0:
        raise DomainError("xi must be a nonzero vector")
    xi = xi / nrm
    c = xi[2]
    axis = np.array([-xi[1], xi[0], 0.0])  # e_z x xi
    s = np.linalg.norm(axis)
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    k = axis / s
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * K + (1 - c) * (K @ K)


def check_cap(weight, t, L):
    require_valid(weight)
    if not 0.0 < t <= weight.T * (1 + 1e-15):
        raise DomainError(f"t must lie in (0, T={weight.T}]")
    if L > 0 and t < 2.0 * np.pi / L:
        warnings.warn(f"cap radius t={t:.3g} below grid spacing 2*pi/L={2 * np.pi / L:.3g}",
                      ResolutionWarning, stacklevel=3)


def _cap_nodes(L, xi, t, weight):
    """Rotated cap nodes and normalized weights; also the local gaps ``1 - cos``."""
    th, v = rho_rule(weight, (L + 3) * t / weight.T, 32)
    x = t * th / weight.T
    W = v * np.sin(x)
    npsi = 2 * L + 1
    psi = 2.0 * np.pi * np.arange(npsi) / npsi
    local = spherical_to_unit(x[:, None], psi[None, :]).reshape(-1, 3)
    pts = local @ rotation_to(xi).T
    Wn = np.repeat(W / (W.sum() * npsi), npsi)
    return pts, Wn, 2.0 * np.sin(0.5 * x) ** 2, W / W.sum()


def cap_average_basis(L: int, xi, t: float, weight: Weight, kmax: int = 0):
    """Direct cap averages around ``xi`` of every basis function up to degree ``L``.

    Returns ``(B, A)`` with ``B`` dense ``(L + 1, 2L + 1)`` (``B[l, m + L]`` is
    the average of ``Y_{l,m}``) and ``A[k]`` the average of ``|xi - .|^{2k}``.
    """
    pts, Wn, gap, Wr = _cap_nodes(L, xi, t, weight)
    theta, phi = unit_to_spherical(pts)
    m = np.arange(L + 1)
    bc = np.zeros((L + 1, L + 1))
    bs = np.zeros((L + 1, L + 1))
    step = max(1, _CHUNK_ENTRIES // ((L + 1) ** 2))
    for a in range(0, theta.size, step):
        p = _legendre(L, theta[a:a + step])
        ang = np.outer(m, phi[a:a + step])
        w = Wn[a:a + step]
        bc += np.einsum("lmi,mi->lm", p, np.cos(ang) * w)
        bs += np.einsum("lmi,mi->lm", p, np.sin(ang) * w)
    A = np.array([np.dot((2.0 * gap) ** k, Wr) for k in range(kmax + 1)])
    return _merge(bc, bs), A


def cap_average_direct(grid: SphericalGrid, f, xi, t: float, weight: Weight) -> float:
    """``A_t f(xi)`` by quadrature over the rotated cap."""
    coeffs = as_coeffs(f, grid)
    check_cap(weight, t, grid.L)
    B, _ = cap_average_basis(coeffs.L, xi, t, weight)
    return float(np.sum(B * coeffs.to_dense()))


# -- square functions -------------------------------------------------------

def _branch(alpha, gs):
    kind, n = branch_for_alpha(alpha)
    if len(gs) != n:
        raise ParameterError(f"alpha={alpha} needs {n} correction functions, got {len(gs)}")
    return kind, n


def _t_rule(weight, L):
    T = weight.T
    t_min = T * SQ_T_MIN
    ts, ws = log_t_rule(T, L, t_min)
    return np.concatenate([ts, [t_min, 2 * t_min]]), ws, t_min


def _radial(dev, ts, ws, t_min, alpha, floor=0.0):
    """``int |dev|^2 dt / t^{2 alpha + 1}`` from samples ``dev[..., t]``; last two columns are ``t_min, 2 t_min``.

    Samples at or below ``floor`` are rounding noise: no power law is fitted
    to them and the tail below ``t_min`` is dropped.
    """
    body = (dev[..., :-2] ** 2 * ts[:-2] ** (-2.0 * alpha)) @ ws
    lo, hi = np.abs(dev[..., -2]), np.abs(dev[..., -1])
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.log2(hi / lo)  # local power of dev near t_min
        tail = lo**2 * t_min ** (-2.0 * alpha) / (2.0 * q - 2.0 * alpha)
    tail = np.where(2.0 * q > 2.0 * alpha, tail, np.inf)
    tail = np.where((lo == 0) | (np.maximum(lo, hi) <= floor), 0.0, tail)
    return body + tail


def _noise_floor(fd, gd):
    """Rounding level of a cap average of band-limited data: a multiple of eps times a sup bound."""
    L = fd.shape[0] - 1
    sup = (L + 1) / math.sqrt(4 * math.pi) * sum(math.sqrt(float(np.sum(a * a))) for a in (fd, *gd))
    return 256 * np.finfo(float).eps * sup


def _corrections(grid, gs, n, kind):
    """Coefficients of the correction functions, padded to the grid band limit."""
    dense = [_pad(as_coeffs(g, grid).to_dense(), grid.L) for g in gs]
    return dense, kind == "J"


def square_function_pointwise(grid: SphericalGrid, f, xi, alpha: float, weight: Weight, gs=()) -> float:
    """``S_alpha(f, g_1..g_n)(xi)^2`` by direct cap quadrature at every radius.

    ``f`` and the ``gs`` are coefficients or grid samples.  The result is
    the squared square function (the radial integral itself).
    """
    kind, n = _branch(alpha, gs)
    require_valid(weight)
    L = grid.L
    fd = _pad(as_coeffs(f, grid).to_dense(), L)
    gd, last_averaged = _corrections(grid, gs, n, kind)
    xi = np.asarray(xi, dtype=float) / np.linalg.norm(xi)
    f_xi = float(evaluate(HarmonicCoeffs.from_dense(fd), xi))
    g_xi = [float(evaluate(HarmonicCoeffs.from_dense(g), xi)) for g in gd]
    ts, ws, t_min = _t_rule(weight, L)
    dev = np.empty(ts.size)
    for i, t in enumerate(ts):
        B, A = cap_average_basis(L, xi, t, weight, n)
        val = np.sum(B * fd) - f_xi
        for k in range(1, n + 1):
            if last_averaged and k == n:
                val -= np.sum(B * gd[k - 1]) * A[k]
            else:
                val -= g_xi[k - 1] * A[k]
        dev[i] = val
    return float(_radial(dev, ts, ws, t_min, alpha, _noise_floor(fd, gd)))


def grid_square_function(grid: SphericalGrid, f, alpha: float, weight: Weight, gs=()):
    """``S_alpha^2`` at every grid point by direct cap quadrature, and its grid integral.

    One cap quadrature per colatitude ring and radius; the other points of
    the ring follow by rotating the coefficients about the polar axis.
    Returns ``(integral, samples)``.
    """
    kind, n = _branch(alpha, gs)
    require_valid(weight)
    L = grid.L
    fd = _pad(as_coeffs(f, grid).to_dense(), L)
    gd, last_averaged = _corrections(grid, gs, n, kind)
    f_grid = synthesis(HarmonicCoeffs.from_dense(fd), grid)
    g_grid = [synthesis(HarmonicCoeffs.from_dense(g), grid) for g in gd]
    ts, ws, t_min = _t_rule(weight, L)
    Bc, Bs, Ak = _ring_averages(L, weight, max(n, _RING_KMAX))
    m = np.arange(L + 1)
    cosm = np.cos(np.outer(m, grid.phi))
    sinm = np.sin(np.outer(m, grid.phi))
    fc, fs = _split(fd)
    if last_averaged:
        gnc, gns = _split(gd[-1])
    floor = _noise_floor(fd, gd)
    out = np.empty(grid.shape)
    for i in range(grid.shape[0]):
        dev = np.empty((grid.shape[1], ts.size))
        for j in range(ts.size):
            bc, bs, A = Bc[i, j], Bs[i, j], Ak[i, j]
            val = _ring(fc, fs, bc, bs, cosm, sinm) - f_grid[i]
            for k in range(1, n + 1):
                if last_averaged and k == n:
                    val -= _ring(gnc, gns, bc, bs, cosm, sinm) * A[k]
                else:
                    val -= g_grid[k - 1][i] * A[k]
            dev[:, j] = val
        out[i] = _radial(dev, ts, ws, t_min, alpha, floor)
    return grid.integrate(out), out


# Distance-power orders kept in the ring cache (enough for alpha < 8).
_RING_KMAX = 3


@lru_cache(maxsize=8)
def _ring_averages(L, weight, kmax):
    """Split basis averages at each ring's ``phi = 0`` point for every radius of the square-function rule."""
    grid = SphericalGrid(L)
    ts, _, _ = _t_rule(weight, L)
    shape = (L + 1, ts.size, L + 1, L + 1)
    Bc, Bs = np.empty(shape), np.empty(shape)
    Ak = np.empty((L + 1, ts.size, kmax + 1))
    for i, th in enumerate(grid.theta):
        xi = np.array([math.sin(th), 0.0, math.cos(th)])
        for j, t in enumerate(ts):
            B, Ak[i, j] = cap_average_basis(L, xi, t, weight, kmax)
            Bc[i, j], Bs[i, j] = _split(B)
    for arr in (Bc, Bs, Ak):
        arr.setflags(write=False)
    return Bc, Bs, Ak


def _ring(ac, as_, bc, bs, cosm, sinm):
    """``A_t a`` along a ring from the averages ``b`` of the basis at the ring's ``phi = 0`` point.

    Rotating by ``phi`` about the pole mixes each (cos, sin) pair of order ``m``.
    The split parts carry a factor sqrt2 each, hence the 1/2 for ``m > 0``.
    """
    half = np.full(ac.shape[1], 0.5)
    half[0] = 1.0
    cm = ((ac * bc + as_ * bs).sum(axis=0)) * half
    sm = ((as_ * bc - ac * bs).sum(axis=0)) * half
    return cm @ cosm + sm @ sinm


def square_function_spectral(coeffs: HarmonicCoeffs, alpha: float, weight: Weight, points, gs=()) -> np.ndarray:
    """``S_alpha^2`` at ``points`` with cap averages taken in multiplier space.

    ``A_t f`` is the multiplier-scaled synthesis and ``A_t(|xi - .|^{2k})`` the
    distance-power average; the radial rule matches the direct routines.
    """
    _require_d3(coeffs.d)
    kind, n = _branch(alpha, gs)
    L = max([coeffs.L] + [g.L for g in gs])
    ctx = CapAverageContext(3, weight)
    ts, ws, t_min = _t_rule(weight, L)
    mult, deficit, D = cap_table(ctx, L, n, ts)
    A = D * (2.0 ** np.arange(n + 1))[:, None]
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 3)
    # degree-l parts of f (and g_n) at the points
    f_parts = _degree_parts(coeffs, L, flat)
    g_vals = [evaluate(g, flat) for g in gs]
    dev = -(f_parts.T @ deficit)
    for k in range(1, n + 1):
        if kind == "J" and k == n:
            dev -= (_degree_parts(gs[k - 1], L, flat).T @ mult) * A[k]
        else:
            dev -= g_vals[k - 1][:, None] * A[k]
    return _radial(dev, ts, ws, t_min, alpha).reshape(pts.shape[:-1])


def _degree_parts(coeffs, L, flat):
    out = np.zeros((L + 1, flat.shape[0]))
    for l, b in enumerate(coeffs.blocks):
        if np.any(b):
            out[l] = evaluate(HarmonicCoeffs.single(3, coeffs.L, l, b), flat)
    return out


def poisson_direct(grid: SphericalGrid, samples, xi, r: float) -> float:
    """``P_r u(xi)`` by grid quadrature against ``(1 - r^2) / (4 pi |r xi - eta|^3)``."""
    if not 0.0 < r < 1.0:
        raise DomainError("r must lie in (0, 1)")
    samples = np.asarray(samples, dtype=float)
    xi = np.asarray(xi, dtype=float) / np.linalg.norm(xi)
    dist = np.linalg.norm(r * xi - grid.points(), axis=-1)
    kernel = (1.0 - r * r) / (4.0 * np.pi * dist**3)
    return grid.integrate(kernel * samples)


# -- sample files -----------------------------------------------------------

def write_samples_csv(grid: SphericalGrid, samples, path) -> None:
    samples = np.asarray(samples, dtype=float)
    if samples.shape != grid.shape:
        raise ParameterError("samples do not match the grid")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["theta", "phi", "value"])
        for i, th in enumerate(grid.theta):
            for j, ph in enumerate(grid.phi):
                writer.writerow([repr(float(th)), repr(float(ph)), repr(float(samples[i, j]))])


def read_samples_csv(path) -> tuple[SphericalGrid, np.ndarray]:
    """Samples written by :func:`write_samples_csv`; the grid is inferred from the row count."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    count = len(rows)
    L = int(round((-3 + math.sqrt(1 + 8 * count)) / 4))
    grid = SphericalGrid(L)
    if (L + 1) * (2 * L + 1) != count:
        raise ParameterError(f"{count} rows do not form a Gauss-Legendre grid")
    values = np.array([float(r["value"]) for r in rows]).reshape(grid.shape)
    th = np.array([float(r["theta"]) for r in rows]).reshape(grid.shape)
    if not np.allclose(th[:, 0], grid.theta, atol=1e-12):
        raise ParameterError("theta column does not match the Gauss-Legendre colatitudes")
    return grid, values
