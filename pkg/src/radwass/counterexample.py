"""Necessity counterexample: two concentric, nearly uniform balls that separate.

u0 is (a smoothed version of) the uniform density r on B_a, and v0 its image
under x -> psi(|x|) x/|x| with

    psi(z) = (1+delta) z              0 <= z <= a
             (z + (1+2 delta) a) / 2  a <= z <= (1+2 delta) a
             z                        (1+2 delta) a <= z <= R

so v0 is again (close to) uniform on B_{(1+delta)a}. Both objects are
regularised at scale eps, the two integrals I1 + I2 giving (1/2) d/dt W2^2 at
t = 0 are evaluated by graded Gauss quadrature, and their eps -> 0 limit is
compared with the closed form

    delta a^d |S^{d-1}| [ (1+delta)^(d-1) f(r (1+delta)^-d) - f(r) ],

which is positive exactly when McCann's condition fails at r (for small delta).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial import Polynomial

from .errors import InvalidParameter, MollificationError
from .nonlinearity import Nonlinearity
from .radial_measure import (
    RadialDensity,
    RadialGrid,
    RadialMap,
    gauss_legendre,
    invert_monotone,
    unit_ball_volume,
    w2_radial,
)

# blend profile h(t) = t (1-t)^n (1 + n t + c t^2): h(0) = 0, h'(0) = 1,
# h''(0) = h'''(0) = 0 and h vanishes to order n at t = 1
_BLEND_ORDER = 8
_H = Polynomial([0.0, 1.0]) * Polynomial([1.0, -1.0]) ** _BLEND_ORDER * Polynomial(
    [1.0, _BLEND_ORDER, (_BLEND_ORDER**2 + _BLEND_ORDER) / 2.0]
)
_H1 = _H.deriv()
_H2 = _H1.deriv()

# quintic smoothstep S(t) = 6t^5 - 15t^4 + 10t^3 (C2 at both ends)
_S = Polynomial([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])
_S1 = _S.deriv()


@dataclass(frozen=True)
class CounterexampleSpec:
    """Geometry of the counterexample.

    ``eps0`` defaults to min(delta, 1) a / 10. ``N`` is the number of shells
    used when the data are put on a grid.
    """

    d: int
    r: float
    a: float
    delta: float
    eps: float
    R: float
    eps0: float | None = None
    N: int = 1500

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise InvalidParameter("dimension must be a positive integer")
        if not (self.r > 0 and 0 < self.a < self.R):
            raise InvalidParameter("need r > 0 and 0 < a < R")
        if not (0 < self.delta < (self.R - self.a) / (2 * self.a)):
            raise InvalidParameter("need 0 < delta < (R - a) / (2a)")
        eps0 = self.eps0 if self.eps0 is not None else min(self.delta, 1.0) * self.a / 10.0
        object.__setattr__(self, "eps0", float(eps0))
        # the boundary value eps = eps0 is admitted
        if not (0 < self.eps <= self.eps0 * (1 + 1e-12)):
            raise InvalidParameter(f"need 0 < eps <= eps0 = {self.eps0:g}")
        if self.eps >= self.r:
            raise InvalidParameter("the floor eps must lie below the plateau r")
        if self.N < 2:
            raise InvalidParameter("need at least two shells")

    @property
    def c_d(self) -> float:
        return unit_ball_volume(self.d)

    @property
    def sigma(self) -> float:
        return self.d * self.c_d

    @property
    def mass(self) -> float:
        """M = c_d a^d r."""
        return self.c_d * self.a**self.d * self.r

    def with_eps(self, eps: float) -> "CounterexampleSpec":
        return replace(self, eps=eps)

    def grid(self) -> RadialGrid:
        return RadialGrid.uniform(self.d, self.R, self.N)


# the exact piecewise-linear map -------------------------------------------


def build_psi(spec: CounterexampleSpec) -> RadialMap:
    a, dl = spec.a, spec.delta
    k1, k2 = a, (1 + 2 * dl) * a

    def fwd(z):
        z = np.asarray(z, dtype=float)
        return np.where(z <= k1, (1 + dl) * z, np.where(z <= k2, 0.5 * (z + k2), z))

    def der(z):
        z = np.asarray(z, dtype=float)
        return np.where(z < k1, 1 + dl, np.where(z < k2, 0.5, 1.0))

    def inv(y):
        y = np.asarray(y, dtype=float)
        y1 = (1 + dl) * a
        return np.where(y <= y1, y / (1 + dl), np.where(y <= k2, 2 * y - k2, y))

    return RadialMap(fwd, der, inv)


# the mollified map ----------------------------------------------------------


class MollifiedMap:
    """C3 increasing map equal to psi away from two blend intervals of relative width eps.

    Blend 1 on [a, (1+eps) a] joins slope 1+delta to slope 1/2, blend 2 on
    [(1+2 delta-eps) a, (1+2 delta) a] joins slope 1/2 to slope 1. Each is
    the exact line on one side plus a polynomial correction h that vanishes
    to high order at both ends.
    """

    def __init__(self, spec: CounterexampleSpec):
        self.spec = spec
        a, dl, eps = spec.a, spec.delta, spec.eps
        self.kappa = 0.5 * (1 + 2 * dl)
        self.b1 = (a, (1 + eps) * a)
        self.b2 = ((1 + 2 * dl - eps) * a, (1 + 2 * dl) * a)
        self.psi = build_psi(spec)
        self.width = eps * a
        self.Lambda = np.nan
        self.A = np.nan
        self.sup_error = np.nan
        self.forward = self._fwd
        self.derivative = self._d1
        self.inverse = self.inverse_map

    def __call__(self, z):
        return self._fwd(z)

    def _pieces(self, z):
        z = np.asarray(z, dtype=float)
        in1 = (z >= self.b1[0]) & (z <= self.b1[1])
        in2 = (z >= self.b2[0]) & (z <= self.b2[1])
        t = (z - self.b1[0]) / self.width
        s = (self.b2[1] - z) / self.width
        return z, in1, in2, t, s

    def _fwd(self, z):
        z, in1, in2, t, s = self._pieces(z)
        base = self.psi.forward(z)
        line2 = 0.5 * (z + self.b2[1])
        out = np.where(in1, line2 + self.kappa * self.width * _H(t), base)
        return np.where(in2, line2 - 0.5 * self.width * _H(s), out)

    def _d1(self, z):
        z, in1, in2, t, s = self._pieces(z)
        base = self.psi.derivative(z)
        out = np.where(in1, 0.5 + self.kappa * _H1(t), base)
        return np.where(in2, 0.5 + 0.5 * _H1(s), out)

    def second_derivative(self, z):
        z, in1, in2, t, s = self._pieces(z)
        out = np.where(in1, self.kappa * _H2(t) / self.width, 0.0)
        return np.where(in2, -0.5 * _H2(s) / self.width, out)

    def inverse_map(self, y):
        """Radial inverse, i.e. the radial profile of the gradient of the Legendre transform."""
        return invert_monotone(self._fwd, self._d1, np.asarray(y, dtype=float), 0.0, self.spec.R, tol=1e-13)

    def invert(self, y, lo=0.0, hi=None, tol=1e-13):
        return self.inverse_map(y)


def mollify(spec: CounterexampleSpec, psi: RadialMap | None = None, samples: int = 20001) -> MollifiedMap:
    """Build psi^eps and certify its properties by dense sampling.

    Records the measured derivative bound Lambda, the sup distance to psi and
    A = sup|psi^eps - psi| / eps.
    """
    mm = MollifiedMap(spec)
    psi = psi if psi is not None else mm.psi
    z = np.unique(np.concatenate([
        np.linspace(0.0, spec.R, samples),
        np.linspace(*mm.b1, samples),
        np.linspace(*mm.b2, samples),
    ]))
    z = z[np.concatenate([[True], np.diff(z) > 1e-12 * spec.R])]
    d1 = mm._d1(z)
    if np.any(~np.isfinite(d1)) or np.min(d1) <= 0:
        raise MollificationError(
            f"mollified map is not increasing (min slope {np.min(d1):.3g}); delta = {spec.delta} is too large"
        )
    lam = max(float(np.max(d1)), float(1.0 / np.min(d1)), 1.0 + spec.delta)
    vals = mm._fwd(z)
    dz = np.diff(z)
    dv = np.diff(vals)
    # values must increase and move no faster than the derivative bound allows (no jumps)
    if np.any(dv <= 0) or np.any(dv > lam * dz * (1 + 1e-9) + 1e-15):
        raise MollificationError("mollified map is not a continuous increasing function")
    err = float(np.max(np.abs(vals - psi.forward(z))))
    ratio = mm._fwd(z[z > 0]) / z[z > 0]
    if np.any(ratio < 1 - 1e-12) or np.any(ratio > 1 + spec.delta + 1e-12):
        raise MollificationError("psi^eps(z)/z left the interval [1, 1+delta]")
    if float(mm._fwd(np.array([spec.R]))[0]) > spec.R * (1 + 1e-14):
        raise MollificationError("psi^eps does not map the ball into itself")
    mm.Lambda = lam
    mm.sup_error = err
    mm.A = err / spec.eps
    return mm


# the mollified initial data ---------------------------------------------------


class MollifiedData:
    """Pointwise and integrated forms of u0^eps and v0^eps = (grad phi^eps) # u0^eps."""

    def __init__(self, spec: CounterexampleSpec, psi_eps: MollifiedMap | None = None):
        self.spec = spec
        self.psi = psi_eps if psi_eps is not None else mollify(spec)
        s = spec
        self.t_lo, self.t_hi = s.a, s.a + s.eps
        raw_total = (
            s.c_d * s.r * s.a**s.d
            + self._raw_transition_mass(np.array([self.t_hi]))[0]
            + s.eps * s.c_d * (s.R**s.d - self.t_hi**s.d)
        )
        self.raw_total = float(raw_total)
        self.scale = s.mass / self.raw_total

    # tilde u: r on [0, a], eps beyond a + eps, smoothstep in between
    def _raw(self, z):
        s = self.spec
        z = np.asarray(z, dtype=float)
        t = np.clip((z - s.a) / s.eps, 0.0, 1.0)
        return s.r - (s.r - s.eps) * _S(t)

    def _raw_d1(self, z):
        s = self.spec
        z = np.asarray(z, dtype=float)
        t = (z - s.a) / s.eps
        inside = (t > 0) & (t < 1)
        return np.where(inside, -(s.r - s.eps) * _S1(np.clip(t, 0, 1)) / s.eps, 0.0)

    def _raw_transition_mass(self, rho):
        """sigma * int_a^rho tilde u(z) z^(d-1) dz for rho in [a, a + eps] (exact: polynomial)."""
        s = self.spec
        rho = np.asarray(rho, dtype=float)
        x, w = gauss_legendre(max(16, (s.d + 8) // 2 + 1))
        lo = s.a
        z = lo + (rho - lo)[:, None] * x[None, :]
        vals = self._raw(z) * z ** (s.d - 1)
        return s.sigma * (rho - lo) * np.sum(vals * w[None, :], axis=1)

    def u(self, z):
        return self.scale * self._raw(z)

    def du(self, z):
        return self.scale * self._raw_d1(z)

    def mass_u(self, rho):
        """Mass of u0^eps inside B_rho."""
        s = self.spec
        rho = np.clip(np.asarray(rho, dtype=float), 0.0, s.R)
        out = s.c_d * s.r * np.minimum(rho, s.a) ** s.d
        mid = np.clip(rho, self.t_lo, self.t_hi)
        out = out + np.where(rho > self.t_lo, self._raw_transition_mass(np.atleast_1d(mid)).reshape(mid.shape), 0.0)
        outer = np.maximum(rho, self.t_hi)
        out = out + np.where(rho > self.t_hi, s.eps * s.c_d * (outer**s.d - self.t_hi**s.d), 0.0)
        return self.scale * out

    def mass_v(self, rho):
        rho = np.clip(np.asarray(rho, dtype=float), 0.0, self.spec.R)
        return self.mass_u(self.psi.inverse_map(rho).reshape(rho.shape))

    def jacobian(self, z):
        """det D^2 phi^eps at |x| = z."""
        s = self.spec
        z = np.asarray(z, dtype=float)
        ratio = np.where(z > 0, self.psi(np.maximum(z, 1e-300)) / np.maximum(z, 1e-300), 1 + s.delta)
        return self.psi._d1(z) * ratio ** (s.d - 1)

    def jacobian_d1(self, z):
        s = self.spec
        z = np.asarray(z, dtype=float)
        p = self.psi(z)
        p1 = self.psi._d1(z)
        p2 = self.psi.second_derivative(z)
        ratio = p / z
        dratio = (p1 * z - p) / z**2
        return p2 * ratio ** (s.d - 1) + p1 * (s.d - 1) * ratio ** (s.d - 2) * dratio

    def v_at_preimage(self, z):
        """v0^eps(psi^eps(z)) = u0^eps(z) / det D^2 phi^eps(z)."""
        return self.u(z) / self.jacobian(z)

    def v(self, y):
        z = self.psi.inverse_map(np.asarray(y, dtype=float))
        return self.v_at_preimage(z)

    def on_grid(self, grid: RadialGrid | None = None):
        grid = grid if grid is not None else self.spec.grid()
        u = RadialDensity.from_cumulative(grid, self.mass_u)
        v = RadialDensity.from_cumulative(grid, self.mass_v)
        return u, v


def build_mollified_data(spec: CounterexampleSpec, grid: RadialGrid | None = None):
    """(u0^eps, v0^eps) as shell averages on ``grid`` (default: spec.N uniform shells)."""
    return MollifiedData(spec).on_grid(grid)


# the two dissipation integrals --------------------------------------------


def _graded_nodes(lo, hi, n_gauss=24, levels=40):
    """Gauss nodes and weights on [lo, hi], refined geometrically towards both ends.

    f'(u) blows up as u -> 0 for fast diffusion; near the floor the integrands
    vary on a scale eps^(1/3) in the blend variable, which the grading resolves.
    """
    g = 0.5 ** np.arange(1, levels + 1)
    cuts = np.unique(np.concatenate([[0.0, 1.0], g, 1.0 - g]))
    x, w = gauss_legendre(n_gauss)
    a, b = cuts[:-1], cuts[1:]
    nodes = lo + (hi - lo) * (a[:, None] + (b - a)[:, None] * x[None, :]).ravel()
    weights = (hi - lo) * ((b - a)[:, None] * w[None, :]).ravel()
    return nodes, weights


def _quad(fun, lo, hi, points=()):
    """Integral of a vectorised integrand that is smooth between ``points``."""
    pts = sorted(p for p in points if lo < p < hi)
    edges = [lo, *pts, hi]
    total = 0.0
    for x0, x1 in zip(edges[:-1], edges[1:]):
        nodes, weights = _graded_nodes(x0, x1)
        total += float(np.sum(weights * fun(nodes)))
    return total


def dissipation_integrals(spec: CounterexampleSpec, f: Nonlinearity, data: MollifiedData | None = None):
    """(I1, I2) for the mollified pair, by graded Gauss quadrature in the radial variable.

    I2 = sigma int (f o u)'(z) (psi(z) - z) z^(d-1) dz, and I1, written in the
    preimage variable z = psi^{-1}(y),
    I1 = sigma int d/dz[f(v(psi(z)))] (z - psi(z)) psi(z)^(d-1) dz.
    """
    data = data if data is not None else MollifiedData(spec)
    s = spec
    psi = data.psi

    def i2(z):
        uz = data.u(z)
        return f.df(uz) * data.du(z) * (psi(z) - z) * z ** (s.d - 1)

    def i1(z):
        J = data.jacobian(z)
        uz = data.u(z)
        vz = uz / J
        dv = data.du(z) / J - uz * data.jacobian_d1(z) / J**2
        pz = psi(z)
        return f.df(vz) * dv * (z - pz) * pz ** (s.d - 1)

    breaks = (s.a + s.eps, psi.b1[1], psi.b2[0])
    I2 = s.sigma * _quad(i2, s.a, s.a + s.eps, points=(psi.b1[1],))
    I1 = s.sigma * _quad(i1, s.a, psi.b2[1], points=breaks)
    return I1, I2


def dissipation_integral_i1_target_form(spec: CounterexampleSpec, f: Nonlinearity, data: MollifiedData | None = None):
    """I1 evaluated in the target variable y with the numerically inverted map.

    sigma int (f o v)'(y) (psi^{-1}(y) - y) y^(d-1) dy. Independent of the
    change of variables used in ``dissipation_integrals``.
    """
    data = data if data is not None else MollifiedData(spec)
    s = spec
    psi = data.psi

    def integrand(y):
        z = psi.inverse_map(y)
        J = data.jacobian(z)
        uz = data.u(z)
        vz = uz / J
        dv_dz = data.du(z) / J - uz * data.jacobian_d1(z) / J**2
        dv_dy = dv_dz / psi._d1(z)
        return f.df(vz) * dv_dy * (z - y) * y ** (s.d - 1)

    y_pts = [float(psi(np.array([p]))[0]) for p in (s.a, s.a + s.eps, psi.b1[1], psi.b2[0])]
    lo = y_pts[0]
    return s.sigma * _quad(integrand, lo, psi.b2[1], points=y_pts[1:])


# closed forms ---------------------------------------------------------------


def limit_bracket(f: Nonlinearity, d: int, r: float, delta: float) -> float:
    """(1+delta)^(d-1) f(r (1+delta)^-d) - f(r)."""
    return float((1 + delta) ** (d - 1) * f.f(r * (1 + delta) ** (-d)) - f.f(r))


def dissipation_limit(f: Nonlinearity, d: int, r: float, a: float, delta: float) -> float:
    """eps -> 0 limit of I1 + I2: delta a^d |S^{d-1}| times the bracket.

    |S^{d-1}| = d c_d is the area of the unit sphere, which is what the
    surface integrals over |y| = (1+delta) a and |x| = a produce.
    """
    return delta * a**d * d * unit_ball_volume(d) * limit_bracket(f, d, r, delta)


def ball_normalized_limit(f: Nonlinearity, d: int, r: float, a: float, delta: float) -> float:
    """delta a^d c_d times the bracket (unit-ball volume in place of the sphere area)."""
    return delta * a**d * unit_ball_volume(d) * limit_bracket(f, d, r, delta)


def rescaled_limit(f: Nonlinearity, d: int, r: float, delta: float) -> float:
    """bracket / delta, which tends to (d-1) f(r) - d r f'(r) as delta -> 0."""
    return limit_bracket(f, d, r, delta) / delta


def w2_limit_squared(spec: CounterexampleSpec) -> float:
    """M delta^2 a^2 d / (d+2): W2^2 between the unsmoothed balls."""
    return spec.mass * spec.delta**2 * spec.a**2 * spec.d / (spec.d + 2)


# eps -> 0 extrapolation -----------------------------------------------------


@dataclass(frozen=True)
class Extrapolation:
    eps: np.ndarray
    values: np.ndarray
    limit: float
    basis: tuple[str, ...]
    observed_order: float


def observed_order(eps, values) -> float:
    """Convergence order from the last three samples of a geometric eps sequence."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.size < 3:
        return np.nan
    d1 = values[-2] - values[-3]
    d2 = values[-1] - values[-2]
    if d1 == 0 or d2 == 0 or np.sign(d1) != np.sign(d2):
        return np.nan
    q = np.log(eps[-2] / eps[-1]) if np.isclose(eps[-3] / eps[-2], eps[-2] / eps[-1], rtol=0.2) else np.nan
    return float(np.log(d1 / d2) / q) if np.isfinite(q) else np.nan


def extrapolate_to_zero(eps, values, f: Nonlinearity) -> Extrapolation:
    """Least-squares fit of I(eps) = L + A eps + B f(eps) and return L.

    The floor density eps feeds the integrals through f(eps), which for
    sublinear f dominates the O(eps) smoothing error; with f linear the two
    terms coincide and only {1, eps} is used.
    """
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    fe = np.asarray(f.f(eps), dtype=float)
    cols = [np.ones_like(eps), eps]
    basis = ["1", "eps"]
    cand = fe / fe[0]
    lin = eps / eps[0]
    if eps.size >= 3 and np.max(np.abs(cand - lin)) > 1e-3:
        cols.append(fe)
        basis.append("f(eps)")
    A = np.stack(cols, axis=1)
    # column scaling keeps the small normal equations well conditioned
    norms = np.linalg.norm(A, axis=0)
    coef, *_ = np.linalg.lstsq(A / norms, values, rcond=None)
    return Extrapolation(eps, values, float(coef[0] / norms[0]), tuple(basis), observed_order(eps, values))


def integrals_sweep(spec: CounterexampleSpec, f: Nonlinearity, eps_values):
    """I1, I2 and the initial W2^2 for each eps (the grid is not used)."""
    rows = []
    for e in eps_values:
        sp = spec.with_eps(float(e))
        data = MollifiedData(sp)
        I1, I2 = dissipation_integrals(sp, f, data)
        rows.append({"eps": float(e), "I1": I1, "I2": I2, "w2_initial_sq": initial_w2_squared(sp, data)})
    return rows


def initial_w2_squared(spec: CounterexampleSpec, data: MollifiedData | None = None) -> float:
    """W2^2(u0^eps, v0^eps) = int (psi^eps(z) - z)^2 u0^eps(z) dz over B_R, by quadrature."""
    data = data if data is not None else MollifiedData(spec)
    s = spec
    psi = data.psi

    def g(z):
        return (psi(z) - z) ** 2 * data.u(z) * z ** (s.d - 1)

    pts = (s.a, s.a + s.eps, psi.b1[1], psi.b2[0], psi.b2[1])
    return s.sigma * _quad(g, 0.0, s.R, points=pts)


def grid_w2_squared(spec: CounterexampleSpec, grid: RadialGrid | None = None) -> float:
    u, v = build_mollified_data(spec, grid)
    W, _ = w2_radial(u, v)
    return W * W


# co-evolution ---------------------------------------------------------------


def transition_grid(spec: CounterexampleSpec, data: MollifiedData | None = None, h_min_ratio: float = 1.0 / 400,
                    h_max: float | None = None, growth: float = 1.05) -> RadialGrid:
    """Shells refined to eps * h_min_ratio on the transition annuli of u0^eps and v0^eps.

    The image of [a, a+eps] is only about eps/2 wide and v0^eps varies on a
    small fraction of that, so this annulus needs the finest cells.
    """
    data = data if data is not None else MollifiedData(spec)
    psi = data.psi
    lo, hi = psi(np.array([spec.a, spec.a + spec.eps]))
    focus = [(spec.a, spec.a + spec.eps), (float(lo), float(hi)), psi.b2]
    h_max = h_max if h_max is not None else spec.R / 300
    return RadialGrid.graded(spec.d, spec.R, h_max, focus, h_min=spec.eps * h_min_ratio, growth=growth)


def contraction_violation_experiment(spec: CounterexampleSpec, f: Nonlinearity, cfg=None, times=None,
                                     grid: RadialGrid | None = None):
    """Co-evolve (u0^eps, v0^eps) and report W2(t), the initial dissipation and the first rise of W2.

    The condition is evaluated at the plateau density r and recorded in the
    metadata; the experiment runs either way so that controls can use it.
    """
    from .nonlinearity import mccann_margin
    from .report import co_evolve, geometric_times
    from .solver import SolverConfig

    data = MollifiedData(spec)
    grid = grid if grid is not None else transition_grid(spec, data)
    u, v = data.on_grid(grid)
    times = np.asarray(times, dtype=float) if times is not None else geometric_times(1e-10, 1e-2, 40)
    cfg = cfg if cfg is not None else SolverConfig(t_end=float(times[-1]))
    rep = co_evolve(u, v, f, times, cfg)
    margin = float(mccann_margin(f, spec.d, np.array([spec.r]))[0])
    rep.metadata.update({
        "experiment": "counterexample",
        "nonlinearity": f.describe(),
        "d": spec.d, "r": spec.r, "a": spec.a, "delta": spec.delta, "eps": spec.eps, "R": spec.R,
        "N": grid.N,
        "condition_margin_at_r": margin,
        "Lambda": data.psi.Lambda,
        "limit_formula": dissipation_limit(f, spec.d, spec.r, spec.a, spec.delta),
    })
    return rep
