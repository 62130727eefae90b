"""Radially symmetric densities on balls of R^d and their quadratic transport.

Densities are piecewise constant on spherical shells. Everything that can be
integrated exactly against that representation is: cumulative masses, radial
quantiles (a d-th root per shell) and second moments. Between two concentric
radial measures the optimal map is the monotone rearrangement of radii, so
W2 reduces to an integral over the mass coordinate of the squared difference
of the two quantile functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import InvalidMap, InvalidParameter, MassMismatch

MASS_RTOL = 1e-8

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(n: int):
    """Nodes and weights on [0, 1]."""
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[n]


def unit_ball_volume(d: int) -> float:
    return pi ** (d / 2.0) / gamma(d / 2.0 + 1.0)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Spherical shells 0 = r_0 < r_1 < ... < r_N = R in dimension d."""

    d: int
    edges: np.ndarray

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise InvalidParameter(f"dimension must be a positive integer, got {self.d}")
        edges = _frozen(self.edges)
        if edges.ndim != 1 or edges.size < 2:
            raise InvalidParameter("need at least one cell")
        if edges[0] != 0.0:
            raise InvalidParameter("the first edge must be the origin")
        if np.any(np.diff(edges) <= 0):
            raise InvalidParameter("edges must be strictly increasing")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "edges", edges)
        c_d = unit_ball_volume(self.d)
        pw = edges**self.d
        object.__setattr__(self, "c_d", c_d)
        object.__setattr__(self, "_edge_pow", _frozen(pw))
        object.__setattr__(self, "volumes", _frozen(c_d * np.diff(pw)))
        object.__setattr__(self, "centers", _frozen(0.5 * (edges[1:] + edges[:-1])))

    @classmethod
    def uniform(cls, d: int, R: float, N: int) -> "RadialGrid":
        if R <= 0 or N < 1:
            raise InvalidParameter("need R > 0 and N >= 1")
        edges = np.linspace(0.0, R, N + 1)
        edges[-1] = R
        return cls(d, edges)

    @classmethod
    def graded(cls, d: int, R: float, h_max: float, focus=(), h_min: float | None = None, growth: float = 1.1) -> "RadialGrid":
        """Shells of width min(h_max, h_min + (growth - 1) * distance to the focus set).

        ``focus`` holds points or (lo, hi) intervals; cells inside an interval
        have width about h_min. Used to resolve thin transition annuli.
        """
        if R <= 0 or h_max <= 0 or growth <= 1:
            raise InvalidParameter("need R > 0, h_max > 0 and growth > 1")
        iv = np.array([(p, p) if np.ndim(p) == 0 else tuple(p) for p in focus], dtype=float).reshape(-1, 2)
        iv = iv[np.argsort(iv[:, 0])]
        if np.any(iv[:, 1] < iv[:, 0]):
            raise InvalidParameter("focus intervals must have lo <= hi")
        h_min = h_max if h_min is None or iv.size == 0 else min(float(h_min), h_max)
        if h_min <= 0:
            raise InvalidParameter("h_min must be positive")
        knots = np.unique(iv.ravel())

        def dist(x):
            if iv.size == 0:
                return np.inf
            return float(np.min(np.maximum(iv[:, 0] - x, 0.0) + np.maximum(x - iv[:, 1], 0.0)))

        edges = [0.0]
        x = 0.0
        while x < R:
            # the width is limited by the distance seen at both ends of the cell
            h = min(h_max, h_min + (growth - 1.0) * dist(x))
            h = min(h, h_min + (growth - 1.0) * dist(x + h))
            nxt = knots[knots > x + 0.5 * h_min]
            if nxt.size and nxt[0] < x + h:
                h = max(nxt[0] - x, h_min)
            x = min(x + h, R)
            edges.append(x)
        if len(edges) > 2 and edges[-1] - edges[-2] < 0.25 * h_min:
            edges.pop(-2)
        return cls(d, np.asarray(edges))

    @property
    def R(self) -> float:
        return float(self.edges[-1])

    @property
    def N(self) -> int:
        return self.edges.size - 1

    @property
    def sigma(self) -> float:
        """Area of the unit sphere, d * c_d."""
        return self.d * self.c_d

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def ball_volume(self) -> float:
        return self.c_d * self.R**self.d

    def same_as(self, other: "RadialGrid") -> bool:
        return self.d == other.d and self.edges.shape == other.edges.shape and bool(
            np.array_equal(self.edges, other.edges)
        )

    def scaled(self, lam: float) -> "RadialGrid":
        return RadialGrid(self.d, self.edges * lam)


@dataclass(frozen=True, eq=False)
class RadialDensity:
    """Cell averages u_i >= 0 on a RadialGrid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != (self.grid.N,):
            raise InvalidParameter(f"expected {self.grid.N} cell values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidParameter("density values must be finite")
        if np.any(values < 0):
            raise InvalidParameter("density values must be nonnegative")
        object.__setattr__(self, "values", values)
        cum = np.concatenate([[0.0], np.cumsum(values * self.grid.volumes)])
        object.__setattr__(self, "_cum", _frozen(cum))

    # construction helpers -------------------------------------------------

    @classmethod
    def from_function(cls, grid: RadialGrid, func: Callable, n_gauss: int = 8, subdivide: int = 1):
        """Exact-for-polynomials cell averages of a radial profile func(rho)."""
        x, w = gauss_legendre(n_gauss)
        e = grid.edges
        if subdivide > 1:
            e = np.concatenate([np.linspace(a, b, subdivide + 1)[:-1] for a, b in zip(e[:-1], e[1:])] + [[e[-1]]])
        lo, hi = e[:-1], e[1:]
        rho = lo[:, None] + (hi - lo)[:, None] * x[None, :]
        wts = (hi - lo)[:, None] * w[None, :] * grid.sigma * rho ** (grid.d - 1)
        mass = np.sum(np.asarray(func(rho), dtype=float) * wts, axis=1)
        if subdivide > 1:
            mass = mass.reshape(grid.N, subdivide).sum(axis=1)
        return cls(grid, mass / grid.volumes)

    @classmethod
    def from_cumulative(cls, grid: RadialGrid, mass_within: Callable):
        """Cell averages from a cumulative mass function rho -> mass inside B_rho."""
        m = np.asarray(mass_within(grid.edges), dtype=float)
        cell = np.diff(m)
        cell = np.where(cell < 0, 0.0, cell)
        return cls(grid, cell / grid.volumes)

    @classmethod
    def uniform_ball(cls, grid: RadialGrid, level: float, radius: float):
        """Density `level` on B_radius, exact fractional filling of the straddling shell."""
        if radius <= 0 or radius > grid.R * (1 + 1e-14):
            raise InvalidParameter("ball radius must lie in (0, R]")
        radius = min(radius, grid.R)
        c = grid.c_d
        return cls.from_cumulative(grid, lambda rho: level * c * np.minimum(rho, radius) ** grid.d)

    def with_values(self, values) -> "RadialDensity":
        return RadialDensity(self.grid, values)

    # mass bookkeeping -----------------------------------------------------

    @property
    def mass(self) -> float:
        return float(self._cum[-1])

    def cumulative_mass(self) -> np.ndarray:
        """m(r_j) for every edge r_j, j = 0..N."""
        return self._cum

    def mass_within(self, rho):
        """Mass inside B_rho for arbitrary radii (exact for piecewise constant u)."""
        rho = np.clip(np.asarray(rho, dtype=float), 0.0, self.grid.R)
        e = self.grid.edges
        j = np.clip(np.searchsorted(e, rho, side="right") - 1, 0, self.grid.N - 1)
        d = self.grid.d
        return self._cum[j] + self.values[j] * self.grid.c_d * (rho**d - self.grid._edge_pow[j])

    def quantile(self, m):
        """Smallest radius with cumulative mass >= m."""
        m = np.asarray(m, dtype=float)
        M = self.mass
        if np.any(m < 0) or np.any(m > M * (1 + 1e-13) + 1e-300):
            raise InvalidParameter("mass level outside [0, M]")
        return self._quantile_unchecked(np.clip(m, 0.0, M))

    def _quantile_unchecked(self, m):
        cum = self._cum
        j = np.searchsorted(cum, m, side="left") - 1
        j = np.clip(j, 0, self.grid.N - 1)
        u = self.values[j]
        d = self.grid.d
        base = self.grid._edge_pow[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            inc = np.where(u > 0, (m - cum[j]) / (u * self.grid.c_d), 0.0)
        q = np.power(np.maximum(base + inc, 0.0), 1.0 / d)
        q = np.clip(q, self.grid.edges[j], self.grid.edges[j + 1])
        return np.where(m <= 0, 0.0, q)

    def second_moment(self) -> float:
        e = self.grid.edges
        d = self.grid.d
        per = self.values * self.grid.sigma * (e[1:] ** (d + 2) - e[:-1] ** (d + 2)) / (d + 2)
        return float(per.sum())

    def scaled(self, lam: float) -> "RadialDensity":
        """Dilation x -> lam x, mass preserved."""
        return RadialDensity(self.grid.scaled(lam), self.values / lam**self.grid.d)

    def normalized_to(self, mass: float) -> "RadialDensity":
        return RadialDensity(self.grid, self.values * (mass / self.mass))

    def l1_distance(self, other: "RadialDensity") -> float:
        _require_same_grid(self, other)
        return float(np.sum(np.abs(self.values - other.values) * self.grid.volumes))


def _require_same_grid(u: RadialDensity, v: RadialDensity):
    if u.grid.d != v.grid.d:
        raise InvalidParameter("densities live in different dimensions")
    if not u.grid.same_as(v.grid):
        raise InvalidParameter("densities live on different grids")


def check_equal_mass(u: RadialDensity, v: RadialDensity, rtol: float = MASS_RTOL):
    if u.grid.d != v.grid.d:
        raise InvalidParameter("densities live in different dimensions")
    mu, mv = u.mass, v.mass
    if not (mu > 0 and mv > 0):
        raise MassMismatch("both measures need positive mass")
    if abs(mu - mv) > rtol * max(mu, mv):
        raise MassMismatch(f"unequal masses {mu!r} and {mv!r}")


@dataclass(frozen=True, eq=False)
class QuantilePlan:
    """Monotone radial coupling sampled on a mass quadrature.

    ``breaks`` are the mass breakpoints (union of both shell boundaries in the
    mass coordinate), ``nodes``/``weights`` a Gauss rule on each piece, and
    ``q_u``/``q_v`` the two quantile functions at the nodes. The map
    |x| -> Q_v(m_u(|x|)) is the Brenier map from u to v.
    """

    mass: float
    breaks: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    q_u: np.ndarray
    q_v: np.ndarray

    def cost(self) -> float:
        return float(np.sum(self.weights * (self.q_u - self.q_v) ** 2))

    def transposed(self) -> "QuantilePlan":
        return QuantilePlan(self.mass, self.breaks, self.nodes, self.weights, self.q_v, self.q_u)


def quantile_plan(u: RadialDensity, v: RadialDensity, K: int | None = None, n_gauss: int = 4) -> QuantilePlan:
    """Build the monotone coupling of two equal-mass radial densities.

    With ``K`` given, K uniform mass bins are merged into the breakpoints.
    """
    check_equal_mass(u, v)
    M = u.mass
    scale_v = v.mass / M
    pieces = [u.cumulative_mass(), v.cumulative_mass() / scale_v]
    if K is not None:
        if K < 1:
            raise InvalidParameter("K must be positive")
        pieces.append(np.linspace(0.0, M, K + 1))
    breaks = np.unique(np.clip(np.concatenate(pieces), 0.0, M))
    breaks = breaks[np.concatenate([[True], np.diff(breaks) > 1e-15 * M])]
    breaks[-1] = M
    lo, hi = breaks[:-1], breaks[1:]
    x, w = gauss_legendre(n_gauss)
    nodes = (lo[:, None] + (hi - lo)[:, None] * x[None, :]).ravel()
    weights = ((hi - lo)[:, None] * w[None, :]).ravel()
    q_u = u._quantile_unchecked(nodes)
    q_v = v._quantile_unchecked(nodes * scale_v)
    return QuantilePlan(M, breaks, nodes, weights, q_u, q_v)


def w2_radial(u: RadialDensity, v: RadialDensity, K: int | None = None):
    """W2 between concentric radial measures of equal mass, with the optimal plan.

    W2^2 = int_0^M (Q_u(m) - Q_v(m))^2 dm.
    """
    plan = quantile_plan(u, v, K=K)
    return float(np.sqrt(max(plan.cost(), 0.0))), plan


def w2_squared(u: RadialDensity, v: RadialDensity) -> float:
    return quantile_plan(u, v).cost()


# radial maps and push-forwards --------------------------------------------


@dataclass(frozen=True)
class RadialMap:
    """An increasing map q of [0, R] acting on radii; x -> q(|x|) x/|x| = grad phi."""

    forward: Callable
    derivative: Callable | None = None
    inverse: Callable | None = None

    def __call__(self, z):
        return self.forward(z)

    def invert(self, y, lo: float, hi: float, tol: float = 1e-13):
        """Pointwise inverse on [lo, hi]; bisection safeguarded Newton when no closed form."""
        y = np.asarray(y, dtype=float)
        if self.inverse is not None:
            return self.inverse(y)
        return invert_monotone(self.forward, self.derivative, y, lo, hi, tol=tol)


def invert_monotone(fwd, dfwd, y, lo, hi, tol=1e-13, max_iter=200):
    """Solve fwd(z) = y for increasing fwd on [lo, hi], vectorised.

    Newton steps are taken when they stay inside the current bracket,
    otherwise the bracket is bisected.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    a = np.full_like(y, lo)
    b = np.full_like(y, hi)
    fa = fwd(a) - y
    fb = fwd(b) - y
    z = np.where(fb <= 0, b, np.where(fa >= 0, a, 0.5 * (a + b)))
    active = (fa < 0) & (fb > 0)
    scale = max(abs(hi), abs(lo), 1.0)
    for _ in range(max_iter):
        if not np.any(active):
            break
        za = z[active]
        g = fwd(za) - y[active]
        left = g < 0
        a[active] = np.where(left, za, a[active])
        b[active] = np.where(left, b[active], za)
        if dfwd is not None:
            dg = dfwd(za)
            with np.errstate(divide="ignore", invalid="ignore"):
                zn = za - g / dg
            ok = np.isfinite(zn) & (zn > a[active]) & (zn < b[active])
            zn = np.where(ok, zn, 0.5 * (a[active] + b[active]))
        else:
            zn = 0.5 * (a[active] + b[active])
        zn = np.where(g == 0, za, zn)
        step = np.abs(zn - za)
        z[active] = zn
        width = b[active] - a[active]
        done = (step <= tol * scale) | (width <= tol * scale) | (g == 0)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return z


def _check_monotone_map(q: RadialMap, R: float, samples: int = 4097):
    z = np.linspace(0.0, R, samples)
    qz = np.asarray(q(z), dtype=float)
    if not np.all(np.isfinite(qz)) or np.any(np.diff(qz) <= 0):
        raise InvalidMap("radial map must be strictly increasing on [0, R]")
    if qz[0] < -1e-14 or qz[-1] > R * (1 + 1e-12):
        raise InvalidMap("radial map must send [0, R] into [0, R]")


def pushforward_radial(u: RadialDensity, q: RadialMap) -> RadialDensity:
    """Image of u under x -> q(|x|) x/|x|, as exact shell averages.

    The mass that lands in a target shell [rho_i, rho_{i+1}] is the mass of u
    between q^{-1}(rho_i) and q^{-1}(rho_{i+1}); for a smooth u this is the
    shell average of (u / det D^2 phi) o (grad phi)^{-1}.
    """
    grid = u.grid
    _check_monotone_map(q, grid.R)
    q_end = float(q(np.array([grid.R]))[0])
    rho = np.minimum(grid.edges, q_end)
    z = np.asarray(q.invert(rho, 0.0, grid.R), dtype=float)
    z[grid.edges >= q_end] = grid.R
    m = u.mass_within(z)
    return RadialDensity(grid, np.maximum(np.diff(m), 0.0) / grid.volumes)


def radial_hessian_eigenvalues(q: RadialMap, z):
    """Eigenvalues of D^2 phi at |x| = z: q'(z) once (radial), q(z)/z with multiplicity d-1."""
    z = np.asarray(z, dtype=float)
    if q.derivative is None:
        raise InvalidMap("map derivative required")
    return q.derivative(z), q(z) / z


def monge_ampere_density(u_of_z: Callable, q: RadialMap, z, d: int):
    """Pointwise change of variables: returns (y, v(y)) with y = q(z).

    v(q(z)) = u(z) / det D^2 phi(z), det = q'(z) (q(z)/z)**(d-1).
    """
    lam_r, lam_t = radial_hessian_eigenvalues(q, z)
    return q(z), np.asarray(u_of_z(z)) / (lam_r * lam_t ** (d - 1))


# file format --------------------------------------------------------------


def format_float(x: float) -> str:
    return f"{x:.14e}"


def write_density(path, u: RadialDensity):
    """Header ``# d R N`` then N rows ``r_left r_right value``."""
    e = u.grid.edges
    lines = [f"# {u.grid.d} {format_float(u.grid.R)} {u.grid.N}"]
    for a, b, val in zip(e[:-1], e[1:], u.values):
        lines.append(f"{format_float(a)} {format_float(b)} {format_float(val)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_density(path) -> RadialDensity:
    path = Path(path)
    text = path.read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise InvalidParameter(f"{path}: missing '# d R N' header")
    try:
        d_s, R_s, N_s = text[0][1:].split()
        d, R, N = int(d_s), float(R_s), int(N_s)
    except ValueError as exc:
        raise InvalidParameter(f"{path}: malformed header {text[0]!r}") from exc
    rows = np.loadtxt(text[1:], ndmin=2) if len(text) > 1 else np.zeros((0, 3))
    if rows.shape != (N, 3):
        raise InvalidParameter(f"{path}: expected {N} rows of three columns")
    edges = np.concatenate([rows[:, 0], rows[-1:, 1]])
    if not np.allclose(rows[1:, 0], rows[:-1, 1], rtol=0, atol=1e-12 * max(R, 1.0)):
        raise InvalidParameter(f"{path}: shells are not contiguous")
    if abs(edges[-1] - R) > 1e-12 * max(R, 1.0):
        raise InvalidParameter(f"{path}: last edge does not match R")
    edges[-1] = R
    return RadialDensity(RadialGrid(d, edges), rows[:, 2])
