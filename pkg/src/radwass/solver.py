"""Finite-volume solver for radial solutions of du/dt = Lap f(u) on a ball.

The radial Laplacian r^(1-d) d/dr(r^(d-1) d/dr f(u)) is discretised in flux
form on spherical shells. Faces at the origin and at r = R carry zero flux,
which gives the Neumann problem and makes the total mass an exact telescoping
sum. Explicit Euler runs under a CFL bound; implicit Euler is solved by a
damped Newton iteration on a tridiagonal Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

import numpy as np
from scipy.linalg import solve_banded

from .errors import CFLViolation, DivisionGuard, InvalidParameter, StepFailure
from .nonlinearity import Nonlinearity
from .radial_measure import RadialDensity, RadialGrid
from .transport import RadialVelocityField


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping options.

    ``dt=None`` selects the CFL-adaptive step for the explicit scheme and
    dt = (smallest shell width) for the implicit scheme.
    """

    t_end: float
    scheme: str = "implicit"
    dt: float | None = None
    cfl_safety: float = 0.9
    snapshot_times: tuple[float, ...] = ()
    floor: float = 0.0
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    max_halvings: int = 12

    def __post_init__(self):
        if self.scheme not in ("explicit", "implicit"):
            raise InvalidParameter(f"unknown scheme {self.scheme!r}")
        if not (self.t_end >= 0):
            raise InvalidParameter("t_end must be nonnegative")
        if not (0 < self.cfl_safety <= 1):
            raise InvalidParameter("CFL safety factor must lie in (0, 1]")
        if self.dt is not None and not (self.dt > 0):
            raise InvalidParameter("dt must be positive")
        snaps = tuple(float(t) for t in self.snapshot_times)
        if list(snaps) != sorted(snaps) or any(t < 0 or t > self.t_end for t in snaps):
            raise InvalidParameter("snapshot times must be sorted and lie in [0, t_end]")
        if self.floor < 0:
            raise InvalidParameter("floor must be nonnegative")
        object.__setattr__(self, "snapshot_times", snaps)


@dataclass(frozen=True)
class SolverState:
    t: float
    density: RadialDensity
    last_dt: float = 0.0
    newton_iterations: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def umin(self) -> float:
        return float(self.density.values.min())

    @property
    def umax(self) -> float:
        return float(self.density.values.max())


class RadialDiffusionOperator:
    """Flux-form discrete radial Laplacian acting on the cell values of f(u)."""

    def __init__(self, grid: RadialGrid):
        self.grid = grid
        c = grid.centers
        inner = grid.edges[1:-1]
        # transmissibility of interior face i+1/2: area / distance between centres
        self.trans = grid.sigma * inner ** (grid.d - 1) / np.diff(c)
        self.volumes = grid.volumes

    def apply(self, fu: np.ndarray) -> np.ndarray:
        """Net inflow into each cell; sums to zero up to rounding."""
        flux = self.trans * np.diff(fu)
        out = np.zeros_like(fu)
        out[:-1] += flux
        out[1:] -= flux
        return out

    def dt_limit(self, max_df: float) -> float:
        """Largest explicit step keeping the update a convex combination."""
        if self.grid.N == 1 or max_df <= 0:
            return np.inf
        t = np.zeros(self.grid.N + 1)
        t[1:-1] = self.trans
        outflow = t[:-1] + t[1:]
        return float(np.min(self.volumes / outflow) / max_df)

    def jacobian_bands(self, dfw: np.ndarray, dt: float) -> np.ndarray:
        """Banded form of V/dt - L diag(f'(w))."""
        n = self.grid.N
        ab = np.zeros((3, n))
        t = self.trans
        diag = self.volumes / dt
        diag = diag + np.concatenate([t, [0.0]]) * dfw + np.concatenate([[0.0], t]) * dfw
        ab[1] = diag
        ab[0, 1:] = -t * dfw[1:]
        ab[2, :-1] = -t * dfw[:-1]
        return ab


def _eval_f(f: Nonlinearity, w):
    # the solver clips below at zero: iterates of the porous medium problem may
    # dip below zero transiently, and f is only defined on [0, inf)
    return f.f(np.maximum(w, 0.0))


def _eval_df(f: Nonlinearity, w):
    w = np.maximum(w, 0.0)
    if f.singular_at_zero:
        return f.df(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = f.df(w)
    return np.where(np.isfinite(out), out, 0.0)


def check_initial_data(u0: RadialDensity, f: Nonlinearity, cfg: SolverConfig):
    vmin = float(u0.values.min())
    if f.singular_at_zero and vmin <= 0:
        raise InvalidParameter("fast diffusion needs strictly positive initial data")
    if cfg.floor > 0 and vmin < cfg.floor:
        raise InvalidParameter(f"initial data dip below the positivity floor {cfg.floor}")


class _Stepper:
    def __init__(self, grid: RadialGrid, f: Nonlinearity, cfg: SolverConfig):
        self.op = RadialDiffusionOperator(grid)
        self.f = f
        self.cfg = cfg
        self.grid = grid

    def explicit_dt(self, u: np.ndarray) -> float:
        return self.cfg.cfl_safety * self.op.dt_limit(float(np.max(_eval_df(self.f, u))))

    def explicit(self, u: np.ndarray, dt: float) -> np.ndarray:
        rhs = self.op.apply(_eval_f(self.f, u)) / self.op.volumes
        new = u + dt * rhs
        if np.any(new < 0) or (self.f.singular_at_zero and np.any(new <= 0)):
            raise CFLViolation(
                f"explicit step dt={dt:.3e} produced a negative density; CFL limit is "
                f"{self.op.dt_limit(float(np.max(_eval_df(self.f, u)))):.3e}"
            )
        return new

    def newton(self, u: np.ndarray, dt: float):
        """One implicit Euler step; returns (values, iterations) or None on failure."""
        cfg = self.cfg
        op = self.op
        w = u.copy()
        positive = self.f.singular_at_zero
        scale = max(float(np.max(np.abs(u))), 1e-300)
        for it in range(1, cfg.newton_max_iter + 1):
            fw = _eval_f(self.f, w)
            G = op.volumes * (w - u) / dt - op.apply(fw)
            ab = op.jacobian_bands(_eval_df(self.f, w), dt)
            try:
                delta = solve_banded((1, 1), ab, -G)
            except (np.linalg.LinAlgError, ValueError):
                return None
            if not np.all(np.isfinite(delta)):
                return None
            lam = 1.0
            if positive:
                while np.any(w + lam * delta <= 0):
                    lam *= 0.5
                    if lam < 1e-8:
                        return None
            w = w + lam * delta
            if lam == 1.0 and np.max(np.abs(delta)) <= cfg.newton_tol * scale:
                return w, it
        return None

    def implicit(self, u: np.ndarray, dt: float, depth: int = 0):
        res = self.newton(u, dt)
        if res is not None:
            return res
        if depth >= self.cfg.max_halvings:
            raise StepFailure(f"Newton failed to converge after {depth} dt halvings (dt={dt:.3e})")
        half, it1 = self.implicit(u, 0.5 * dt, depth + 1)
        out, it2 = self.implicit(half, 0.5 * dt, depth + 1)
        return out, it1 + it2


def step(state: SolverState, f: Nonlinearity, cfg: SolverConfig, dt: float | None = None) -> SolverState:
    """Advance one time step. ``dt`` overrides the configured step."""
    grid = state.density.grid
    stepper = _Stepper(grid, f, cfg)
    u = np.array(state.density.values, dtype=float)
    if cfg.scheme == "explicit":
        if dt is None:
            dt = cfg.dt if cfg.dt is not None else stepper.explicit_dt(u)
        new, iters = stepper.explicit(u, dt), 0
    else:
        if dt is None:
            dt = cfg.dt if cfg.dt is not None else float(grid.widths.min())
        new, iters = stepper.implicit(u, dt)
    # tiny negative round-off at a degenerate front
    new = np.where((new < 0) & (new > -1e-14 * max(1.0, float(np.max(u)))), 0.0, new)
    dens = RadialDensity(grid, new)
    return SolverState(t=state.t + dt, density=dens, last_dt=dt, newton_iterations=iters)


def iterate(u0: RadialDensity, f: Nonlinearity, cfg: SolverConfig) -> Iterator[SolverState]:
    """Yield the initial state and every subsequent step up to t_end.

    Steps are shortened so that every snapshot time is hit exactly.
    """
    check_initial_data(u0, f, cfg)
    grid = u0.grid
    stepper = _Stepper(grid, f, cfg)
    targets = sorted(set(cfg.snapshot_times) | {cfg.t_end})
    state = SolverState(0.0, u0)
    yield state
    u = np.array(u0.values, dtype=float)
    t = 0.0
    base_dt = cfg.dt if cfg.dt is not None else float(grid.widths.min())
    for target in targets:
        while target - t > 1e-12 * max(1.0, target):
            if cfg.scheme == "explicit":
                dt = cfg.dt if cfg.dt is not None else stepper.explicit_dt(u)
            else:
                dt = base_dt
            last = dt >= target - t - 1e-12 * max(1.0, target)
            if last:
                dt = target - t
            if cfg.scheme == "explicit":
                u, iters = stepper.explicit(u, dt), 0
            else:
                u, iters = stepper.implicit(u, dt)
            u = np.where((u < 0) & (u > -1e-14 * max(1.0, float(np.max(u)))), 0.0, u)
            t = target if last else t + dt
            state = SolverState(t, RadialDensity(grid, u), last_dt=dt, newton_iterations=iters)
            yield state


def evolve(u0: RadialDensity, f: Nonlinearity, cfg: SolverConfig, callback: Callable | None = None):
    """Run to t_end; return [(t, density)] at t = 0, each snapshot time and t_end."""
    wanted = sorted(set(cfg.snapshot_times) | {cfg.t_end, 0.0})
    out = []
    k = 0
    for state in iterate(u0, f, cfg):
        if callback is not None:
            callback(state)
        while k < len(wanted) and abs(state.t - wanted[k]) <= 1e-12 * max(1.0, wanted[k]):
            out.append((wanted[k], state.density))
            k += 1
    return out


def _derivative_weights(x0, x1, x2, at):
    """Three-point first-derivative weights for samples at x0, x1, x2, evaluated at `at`."""
    w0 = (2 * at - x1 - x2) / ((x0 - x1) * (x0 - x2))
    w1 = (2 * at - x0 - x2) / ((x1 - x0) * (x1 - x2))
    w2 = (2 * at - x0 - x1) / ((x2 - x0) * (x2 - x1))
    return w0, w1, w2


def velocity_field(u: RadialDensity, f: Nonlinearity) -> RadialVelocityField:
    """Radial component of xi[u] = -grad f(u) / u at the cell centres.

    Central differences inside, the mirror image across the origin in the first
    cell (f(u) is even in r), a one-sided three-point formula in the last one.
    """
    grid = u.grid
    vals = np.asarray(u.values, dtype=float)
    if np.any(vals <= 0):
        raise DivisionGuard("velocity field needs a strictly positive density")
    fu = np.asarray(f.f(vals), dtype=float)
    c = grid.centers
    n = grid.N
    grad = np.zeros(n)
    if n >= 3:
        grad[1:-1] = (fu[2:] - fu[:-2]) / (c[2:] - c[:-2])
        w0, w1, w2 = _derivative_weights(c[-3], c[-2], c[-1], c[-1])
        grad[-1] = w0 * fu[-3] + w1 * fu[-2] + w2 * fu[-1]
    elif n == 2:
        grad[-1] = (fu[1] - fu[0]) / (c[1] - c[0])
    if n >= 2:
        grad[0] = (fu[1] - fu[0]) / (c[1] + c[0])
    return RadialVelocityField(grid, -grad / vals)


def with_config(cfg: SolverConfig, **changes) -> SolverConfig:
    return replace(cfg, **changes)
