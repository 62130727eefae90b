"""Entropy, Wasserstein dissipation and displacement interpolation for radial densities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DivisionGuard, InvalidParameter
from .nonlinearity import Nonlinearity
from .radial_measure import RadialDensity, RadialGrid, check_equal_mass, quantile_plan


@dataclass(frozen=True, eq=False)
class RadialVelocityField:
    """Radial velocity samples at the cell centres, with xi(0) = 0."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.N,) or not np.all(np.isfinite(vals)):
            raise InvalidParameter("velocity samples must be finite, one per cell")
        object.__setattr__(self, "values", vals)
        nodes = np.concatenate([[0.0], self.grid.centers])
        object.__setattr__(self, "_interp", PchipInterpolator(nodes, np.concatenate([[0.0], vals])))

    def __call__(self, r):
        return self._interp(np.clip(np.asarray(r, dtype=float), 0.0, self.grid.R))


def entropy(u: RadialDensity, f: Nonlinearity) -> float:
    """Sum of U(u_i) V_i."""
    return float(np.sum(f.U(u.values) * u.grid.volumes))


@dataclass(frozen=True)
class DissipationSample:
    """W2^2 and the dissipation D = (1/2) d/dt W2^2 at one instant.

    ``fd_derivative`` is filled in by callers that also have the pair at
    neighbouring times (central difference of W2^2 / 2).
    """

    t: float
    w2_sq: float
    dissipation: float
    entropy_u: float
    entropy_v: float
    fd_derivative: float | None = None


def dissipation_value(u: RadialDensity, v: RadialDensity, f: Nonlinearity, K: int | None = None) -> tuple[float, float]:
    """Return (D, W2^2) for the monotone coupling of u and v.

    D = int_0^M (xi_v(Q_v(m)) - xi_u(Q_u(m))) (Q_v(m) - Q_u(m)) dm.
    """
    from .solver import velocity_field

    if np.any(u.values <= 0) or np.any(v.values <= 0):
        raise DivisionGuard("dissipation needs strictly positive densities")
    plan = quantile_plan(u, v, K=K)
    xu = velocity_field(u, f)(plan.q_u)
    xv = velocity_field(v, f)(plan.q_v)
    D = float(np.sum(plan.weights * (xv - xu) * (plan.q_v - plan.q_u)))
    return D, plan.cost()


def dissipation(u: RadialDensity, v: RadialDensity, f: Nonlinearity, K: int | None = None, t: float = 0.0) -> DissipationSample:
    D, w2sq = dissipation_value(u, v, f, K=K)
    return DissipationSample(t=t, w2_sq=w2sq, dissipation=D, entropy_u=entropy(u, f), entropy_v=entropy(v, f))


def _interpolated_quantile(u0: RadialDensity, u1: RadialDensity, t: float):
    s1 = u1.mass / u0.mass

    def q(m):
        return (1.0 - t) * u0._quantile_unchecked(m) + t * u1._quantile_unchecked(m * s1)

    return q


def displacement_interpolant(u0: RadialDensity, u1: RadialDensity, t: float, grid: RadialGrid | None = None) -> RadialDensity:
    """McCann interpolant at time t, binned conservatively onto ``grid``.

    Q_t = (1-t) Q_0 + t Q_1 in the mass coordinate. The mass of u_t inside
    radius rho is the smallest m with Q_t(m) >= rho, found by bisection.
    """
    if not (0.0 <= t <= 1.0):
        raise InvalidParameter("interpolation time must lie in [0, 1]")
    check_equal_mass(u0, u1)
    grid = u0.grid if grid is None else grid
    if grid.d != u0.grid.d:
        raise InvalidParameter("target grid has a different dimension")
    M = u0.mass
    qt = _interpolated_quantile(u0, u1, t)
    breaks = np.unique(np.concatenate([u0.cumulative_mass(), u1.cumulative_mass() * (M / u1.mass)]))
    breaks = np.clip(breaks, 0.0, M)
    qb = qt(breaks)
    qb = np.maximum.accumulate(qb)
    rho = grid.edges
    # bracket each rho between consecutive breakpoints, then bisect
    k = np.searchsorted(qb, rho, side="left")
    inside = (k > 0) & (k < breaks.size)
    lo = np.where(inside, breaks[np.clip(k - 1, 0, breaks.size - 1)], 0.0)
    hi = np.where(inside, breaks[np.clip(k, 0, breaks.size - 1)], 0.0)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = qt(mid) < rho
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    m_at = np.where(inside, hi, np.where(k >= breaks.size, M, 0.0))
    m_at[0] = 0.0
    m_at = np.maximum.accumulate(m_at)
    if qb[-1] <= grid.R:
        m_at[-1] = M
    cell = np.maximum(np.diff(m_at), 0.0)
    return RadialDensity(grid, cell / grid.volumes)


@dataclass(frozen=True)
class GeodesicScan:
    t: np.ndarray
    entropy: np.ndarray
    second_differences: np.ndarray

    @property
    def min_second_difference(self) -> float:
        if self.second_differences.size == 0:
            return 0.0
        return float(self.second_differences.min())

    @property
    def scale(self) -> float:
        return float(max(np.max(np.abs(self.entropy)), 1e-300))

    def is_convex(self, rtol: float = 1e-8) -> bool:
        return self.min_second_difference >= -rtol * self.scale


def geodesic_convexity_scan(u0: RadialDensity, u1: RadialDensity, f: Nonlinearity, t_grid=None) -> GeodesicScan:
    """Entropy along the displacement interpolant and its centred second differences."""
    if t_grid is None:
        t_grid = np.linspace(0.0, 1.0, 11)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size >= 2:
        h = np.diff(t_grid)
        if t_grid[0] < 0 or t_grid[-1] > 1 or np.any(h <= 0) or np.ptp(h) > 1e-9 * h.mean():
            raise InvalidParameter("t_grid must be uniform and inside [0, 1]")
    ent = np.array([entropy(displacement_interpolant(u0, u1, float(t)), f) for t in t_grid])
    second = ent[:-2] - 2 * ent[1:-1] + ent[2:] if ent.size >= 3 else np.zeros(0)
    return GeodesicScan(t_grid, ent, second)
