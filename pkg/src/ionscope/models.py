"""Single-particle transmission models p(y | theta, xi).

Two parametrized structures are supported:

* a straight profiling edge scanned across a Gaussian beam
  (parameters ``x0, sigma, a``; design is the scalar edge position), and
* a circular hole probed by a Gaussian beam of known width and detector
  efficiency (parameters ``cx, cy, radius``; design is a 2D beam position).

Both model classes expose ``prob_one(theta, xi)`` which broadcasts over
parameter arrays, and ``information_gain(nodes, masses, xis)`` which the
design search uses to score many candidate probes at once.

Ideal (beam-free) transmission masks for raster imaging live here as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import erfc, i0e, ndtr, ndtri, xlogy

SQRT2 = math.sqrt(2.0)

# half-width (in beam sigmas) of the radial window integrated for the disc model
_RADIAL_HALF_WIDTH = 12.0
_GL_X, _GL_W = np.polynomial.legendre.leggauss(128)


@dataclass(frozen=True)
class EdgeParams:
    x0: float
    sigma: float
    a: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0 <= self.a <= 1:
            raise ValueError(f"efficiency a must lie in [0, 1], got {self.a}")

    def as_tuple(self):
        return (self.x0, self.sigma, self.a)


@dataclass(frozen=True)
class HoleParams:
    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    def as_tuple(self):
        return (self.cx, self.cy, self.radius)


@dataclass(frozen=True)
class BeamSpec:
    sigma: float
    a: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"beam sigma must be positive, got {self.sigma}")
        if not 0 <= self.a <= 1:
            raise ValueError(f"efficiency a must lie in [0, 1], got {self.a}")


def _outcome(p1, y):
    if y == 1:
        return p1
    if y == 0:
        return 1.0 - p1
    raise ValueError(f"outcome must be 0 or 1, got {y!r}")


def edge_transmission(x0, sigma, xi):
    """Fraction of a Gaussian beam at ``x0`` passing an edge that blocks x < xi."""
    return 0.5 * erfc((np.asarray(xi) - x0) / (sigma * SQRT2))


def edge_likelihood(theta: EdgeParams, xi: float, y: int) -> float:
    return float(_outcome(theta.a * edge_transmission(theta.x0, theta.sigma, xi), y))


# -- disc containment -------------------------------------------------------


def _radial_integral(lo, hi, d, sigma):
    """Integral of the Rician density (offset d, scale sigma) over r in [lo, hi]."""
    lo, hi, d, sigma = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (lo, hi, d, sigma)))
    valid = hi > lo
    half = np.where(valid, 0.5 * (hi - lo), 0.0)[..., None]
    mid = (0.5 * (hi + lo))[..., None]
    r = mid + half * _GL_X
    s2 = (sigma * sigma)[..., None]
    dd = d[..., None]
    f = (r / s2) * np.exp(-0.5 * (r - dd) ** 2 / s2) * i0e(r * dd / s2)
    return np.where(valid, (f * _GL_W).sum(axis=-1) * half[..., 0], 0.0)


def _containment_parts(d, R, sigma):
    d, R, sigma = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (d, R, sigma)))
    w = _RADIAL_HALF_WIDTH * sigma
    lo = np.maximum(d - w, 0.0)
    hi = d + w
    inside = _radial_integral(lo, np.minimum(R, hi), d, sigma)
    outside = _radial_integral(np.maximum(R, lo), hi, d, sigma)
    return inside, outside


def disc_containment(d, R, sigma):
    """Probability mass of a round Gaussian beam (std `sigma`) inside a disc.

    The beam centre sits at distance `d` from the centre of a disc of radius
    `R`.  This is the CDF of the Rician distribution evaluated at `R`,
    integrated by 128-point Gauss-Legendre over the radial window
    ``d ± 12 sigma`` (the neglected tail is below 1e-31).  Broadcasts over
    array arguments.
    """
    d, R, sigma = (np.asarray(v, dtype=float) for v in (d, R, sigma))
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(R)) and np.all(np.isfinite(sigma))):
        raise ValueError("disc_containment needs finite arguments")
    if np.any(R <= 0) or np.any(sigma <= 0):
        raise ValueError("disc_containment needs R > 0 and sigma > 0")
    d = np.abs(d)
    inside, _ = _containment_parts(d, R, sigma)
    # saturation far from the rim (also guards the quadrature window)
    inside = np.where((d - R) / sigma > 40, 0.0, inside)
    inside = np.where((R - d) / sigma > 40, 1.0, inside)
    out = np.clip(inside, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class _ProbitTable:
    """Cubic spline of probit(containment) against d on [R - 12 sigma, R + 12 sigma].

    Working on the probit scale keeps relative accuracy in both tails;
    outside the table the probit is continued linearly with slope -1/sigma,
    which reaches exact 0/1 at roughly 38 sigma from the rim.
    """

    start: float
    step: float
    coef: np.ndarray = field(repr=False)  # (4, n_intervals)
    edge_offset: tuple[float, float]  # probit + (d - R)/sigma at both ends


@lru_cache(maxsize=512)
def _probit_table(R: float, sigma: float, per_sigma: int = 32) -> _ProbitTable:
    half = _RADIAL_HALF_WIDTH * sigma
    n = int(2 * _RADIAL_HALF_WIDTH * per_sigma) + 1
    d = np.linspace(R - half, R + half, n)
    inside, outside = _containment_parts(np.abs(d), R, sigma)
    g = np.where(inside < 0.5, ndtri(np.maximum(inside, 1e-300)), -ndtri(np.maximum(outside, 1e-300)))
    spline = CubicSpline(d, g)
    lin = (R - d) / sigma
    return _ProbitTable(
        start=float(d[0]),
        step=float(d[1] - d[0]),
        coef=np.ascontiguousarray(spline.c),
        edge_offset=(float(g[0] - lin[0]), float(g[-1] - lin[-1])),
    )


def containment_fast(d, R, sigma: float):
    """Tabulated :func:`disc_containment` for many nodes sharing few radii.

    Agrees with the quadrature to better than 1e-9; intended for grid
    likelihoods where the same radius values recur on every call.
    """
    d = np.abs(np.asarray(d, dtype=float))
    R = np.asarray(R, dtype=float)
    radii, inverse = np.unique(R, return_inverse=True)
    inverse = inverse.reshape(R.shape)
    d, R, inverse = np.broadcast_arrays(d, R, inverse)
    tables = [_probit_table(float(r), float(sigma)) for r in radii]
    n_int = tables[0].coef.shape[1]
    step = tables[0].step
    coef = np.stack([t.coef.T for t in tables])  # (n_radii, n_int, 4)
    starts = np.array([t.start for t in tables])[inverse]
    lo_off = np.array([t.edge_offset[0] for t in tables])[inverse]
    hi_off = np.array([t.edge_offset[1] for t in tables])[inverse]

    u = (d - starts) / step
    idx = np.clip(np.floor(u).astype(np.intp), 0, n_int - 1)
    t = d - (starts + idx * step)
    c = coef[inverse, idx]
    g = ((c[..., 0] * t + c[..., 1]) * t + c[..., 2]) * t + c[..., 3]
    lin = (R - d) / sigma
    g = np.where(u < 0, lin + lo_off, g)
    g = np.where(u > n_int, lin + hi_off, g)
    return ndtr(g)


def hole_likelihood(theta: HoleParams, beam: BeamSpec, xi, y: int) -> float:
    d = math.hypot(xi[0] - theta.cx, xi[1] - theta.cy)
    return float(_outcome(beam.a * disc_containment(d, theta.radius, beam.sigma), y))


# -- model objects used by the inference machinery ---------------------------


def _xlog1mx(p):
    """(1 - p) * ln(1 - p), accurate for small p and 0 at p == 1."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (1.0 - p) * np.log1p(-p)
    return np.where(p >= 1.0, 0.0, out)


def binary_entropy(p):
    return -(xlogy(p, p) + _xlog1mx(p))


def _axis_vectors(nodes, shape):
    """1D axis coordinates from sparse meshgrid `nodes` matching a grid of `shape`."""
    out = []
    for k, v in enumerate(nodes):
        v = np.asarray(v, dtype=float)
        if v.size != shape[k]:
            raise ValueError("gain scorers take sparse node arrays (meshgrid(..., sparse=True))")
        out.append(v.reshape(-1))
    return out


class EdgeModel:
    """Profiling edge with unknown beam position, beam width and efficiency."""

    kind = "edge"
    param_names = ("x0", "sigma", "a")
    design_dim = 1

    def prob_one(self, theta, xi):
        x0, sigma, a = theta
        return a * edge_transmission(x0, sigma, np.asarray(xi, dtype=float).reshape(()))

    def prob_one_data(self, theta, xis):
        x0, sigma, a = theta
        return a * edge_transmission(x0, sigma, np.asarray(xis, dtype=float).reshape(-1))

    def transmission(self, theta: EdgeParams, xi) -> float:
        return float(edge_transmission(theta.x0, theta.sigma, np.ravel(xi)[0]))

    def gain_scorer(self, nodes, masses, wmin: float = 0.0, exact: bool = False):
        """Return ``score(xis)``: outcome/parameter mutual information per candidate.

        `nodes` are sparse (x0, sigma, a) coordinate arrays and `masses` the
        normalized node masses; nodes lighter than `wmin` are dropped.  The
        outcome probability factorizes as ``a * g(x0, sigma)`` so erfc runs
        only over the (x0, sigma) plane.  The fast path tabulates
        ``(1 - p) ln(1 - p)`` (error below 1e-9 nats); ``exact=True``
        evaluates every term directly.
        """
        from ._kernels import edge_gain

        masses = np.asarray(masses, dtype=float)
        x0, sigma, a = _axis_vectors(nodes, masses.shape)
        q = np.ascontiguousarray(np.where(masses >= wmin, masses, 0.0))
        m1 = q @ a
        m2 = q @ (a * np.log(np.where(a > 0, a, 1.0)))
        phi, pmax = (_NO_TABLE, 0.0) if exact else _phi_table()

        def score(xis):
            xis = np.ascontiguousarray(np.asarray(xis, dtype=float).reshape(-1))
            return edge_gain(x0, sigma, a, q, m1, m2, xis, phi, pmax, np.empty(xis.size))
        return score

    def information_gain(self, nodes, masses, xis, wmin: float = 0.0, exact: bool = False):
        return self.gain_scorer(nodes, masses, wmin, exact)(xis)


_NO_TABLE = np.zeros(2)


@lru_cache(maxsize=1)
def _phi_table(intervals: int = 1 << 16, pmax: float = 1.0 - 1.0 / 64):
    # (1 - p) ln(1 - p) has curvature 1 / (1 - p); stopping at pmax keeps the
    # linear interpolation error near 2e-9
    p = np.linspace(0.0, pmax, intervals + 1)
    return _xlog1mx(p), pmax


class HoleModel:
    """Circular hole with unknown centre and radius, probed by a known beam."""

    kind = "hole"
    param_names = ("cx", "cy", "radius")
    design_dim = 2

    def __init__(self, beam: BeamSpec):
        self.beam = beam

    def _p(self, cx, cy, R, x, y):
        d = np.hypot(x - cx, y - cy)
        return self.beam.a * containment_fast(d, R, self.beam.sigma)

    def prob_one(self, theta, xi):
        cx, cy, R = theta
        x, y = (float(v) for v in np.ravel(xi))
        return self._p(cx, cy, R, x, y)

    def prob_one_data(self, theta, xis):
        """p(1) for one parameter point at many designs (exact quadrature)."""
        cx, cy, R = (float(v) for v in theta)
        xis = np.asarray(xis, dtype=float).reshape(-1, 2)
        d = np.hypot(xis[:, 0] - cx, xis[:, 1] - cy)
        return self.beam.a * np.asarray(disc_containment(d, R, self.beam.sigma))

    def transmission(self, theta: HoleParams, xi) -> float:
        d = math.hypot(xi[0] - theta.cx, xi[1] - theta.cy)
        return float(disc_containment(d, theta.radius, self.beam.sigma))

    def gain_scorer(self, nodes, masses, wmin: float = 0.0, exact: bool = False,
                    per_sigma: int = 256):
        """Return ``score(xis)``: outcome/parameter mutual information per beam position.

        `xis` has shape (n, 2).  The fast path reads p(1) and its entropy
        from per-radius tables with spacing ``sigma / per_sigma`` (linear
        interpolation), so values carry an error below 1e-6 nats: good
        for ranking candidates.  ``exact=True`` evaluates the likelihood at
        every node instead.  Nodes lighter than `wmin` are dropped.
        """
        q = np.asarray(masses, dtype=float)
        radii = _axis_vectors(nodes, q.shape)[2]
        cx, cy, R = (np.broadcast_to(np.asarray(v, dtype=float), q.shape) for v in nodes)
        if exact:
            keep = q >= wmin
            cx, cy, R, qk = cx[keep], cy[keep], R[keep], q[keep]

            def score(xis):
                xis = np.asarray(xis, dtype=float).reshape(-1, 2)
                out = np.empty(len(xis))
                for c, (x, y) in enumerate(xis):
                    p = self._p(cx, cy, R, x, y)
                    out[c] = binary_entropy(float(qk @ p)) - float(qk @ binary_entropy(p))
                return out
            return score

        from ._kernels import hole_gain

        # rows: (cx, cy) pairs holding any kept node; columns: radii
        q2 = np.where(q >= wmin, q, 0.0).reshape(-1, radii.size)
        rows = np.flatnonzero(q2.any(axis=1))
        q2 = np.ascontiguousarray(q2[rows])
        px = np.ascontiguousarray(cx[..., 0].reshape(-1)[rows])
        py = np.ascontiguousarray(cy[..., 0].reshape(-1)[rows])
        start, ptab, etab = _stacked_gain_tables(tuple(radii.tolist()), self.beam.sigma, self.beam.a, per_sigma)
        inv_step = per_sigma / self.beam.sigma

        def score(xis):
            xis = np.asarray(xis, dtype=float).reshape(-1, 2)
            return hole_gain(px, py, q2, np.ascontiguousarray(xis[:, 0]),
                             np.ascontiguousarray(xis[:, 1]), ptab, etab, start, inv_step,
                             np.empty(len(xis)))
        return score

    def information_gain(self, nodes, masses, xis, wmin: float = 0.0, exact: bool = False):
        return self.gain_scorer(nodes, masses, wmin, exact)(xis)


@lru_cache(maxsize=64)
def _stacked_gain_tables(radii: tuple, sigma: float, a: float, per_sigma: int):
    """Start offsets and zero-padded (p, entropy) tables, one row per radius."""
    tables = [_gain_table(float(r), sigma, a, per_sigma) for r in radii]
    length = max(t[2].size for t in tables)
    ptab = np.zeros((len(tables), length))
    etab = np.zeros((len(tables), length))
    for k, (_, _, p, e) in enumerate(tables):
        ptab[k, :p.size] = p
        etab[k, :e.size] = e
    for arr in (ptab, etab):
        arr.flags.writeable = False
    return np.array([t[0] for t in tables]), ptab, etab


@lru_cache(maxsize=256)
def _gain_table(R: float, sigma: float, a: float, per_sigma: int):
    start = max(0.0, R - _RADIAL_HALF_WIDTH * sigma)
    step = sigma / per_sigma
    n = int(math.ceil((R + _RADIAL_HALF_WIDTH * sigma - start) / step)) + 1
    d = start + step * np.arange(n)
    p = a * containment_fast(d, R, sigma)
    return start, step, p, binary_entropy(p)


# -- ideal transmission masks -------------------------------------------------


@dataclass(frozen=True)
class EdgeMask:
    """Straight blade along y covering x <= x0; the sample is open for x > x0."""

    x0: float
    kind = "edge"


@dataclass(frozen=True)
class DiscMask:
    cx: float
    cy: float
    radius: float
    kind = "disc"


@dataclass(frozen=True)
class RectMask:
    x0: float
    y0: float
    x1: float
    y1: float
    kind = "rect"


@dataclass(frozen=True, eq=False)
class BitmapMask:
    """Gray-level transmission image; pixel (0, 0) has its corner at `origin`."""

    levels: np.ndarray
    pitch: float
    origin: tuple[float, float] = (0.0, 0.0)
    maxval: int | None = None
    kind = "bitmap"

    def __post_init__(self):
        lv = np.asarray(self.levels)
        if lv.ndim != 2 or min(lv.shape) < 1:
            raise ValueError("bitmap levels must be a non-empty 2D array")
        if not self.pitch > 0:
            raise ValueError("bitmap pitch must be positive")

    @property
    def scale(self) -> float:
        return float(self.maxval if self.maxval is not None else max(int(np.max(self.levels)), 1))


def mask_transmission(mask, x, y):
    """Ideal transmission of `mask` at points (x, y); broadcasts."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if isinstance(mask, EdgeMask):
        t = (x > mask.x0) & np.ones_like(y, dtype=bool)
    elif isinstance(mask, DiscMask):
        t = np.hypot(x - mask.cx, y - mask.cy) <= mask.radius
    elif isinstance(mask, RectMask):
        t = (x >= mask.x0) & (x <= mask.x1) & (y >= mask.y0) & (y <= mask.y1)
    elif isinstance(mask, BitmapMask):
        lv = np.asarray(mask.levels, dtype=float)
        col = np.floor((x - mask.origin[0]) / mask.pitch)
        row = np.floor((y - mask.origin[1]) / mask.pitch)
        ok = (col >= 0) & (col < lv.shape[1]) & (row >= 0) & (row < lv.shape[0])
        ci = np.where(ok, col, 0).astype(np.intp)
        ri = np.where(ok, row, 0).astype(np.intp)
        t = np.where(ok, lv[ri, ci] / mask.scale, 0.0)
    else:
        raise TypeError(f"unknown mask {mask!r}")
    t = np.asarray(t, dtype=float)
    return float(t) if t.ndim == 0 else t
