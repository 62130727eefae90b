"""Diffusion nonlinearities f, their entropy densities U, and McCann's condition.

The entropy density is tied to f by ``f(r) = r U'(r) - U(r)`` with the
normalisation ``U(0) = U'(1) = 0``. Two families have closed forms (power
laws and the linear heat case); tabulated nonlinearities recover U by exact
integration of the monotone-cubic interpolant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import xlogy

from .errors import InvalidDomain, InvalidParameter

DEFAULT_R_GRID = np.logspace(-6.0, 6.0, 1201)


class Nonlinearity:
    """Common interface. Subclasses provide f, f', U, U' and optionally U''."""

    kind: str = "abstract"

    def f(self, r):
        raise NotImplementedError

    def df(self, r):
        raise NotImplementedError

    def U(self, r):
        raise NotImplementedError

    def dU(self, r):
        raise NotImplementedError

    def d2U(self, r):
        raise NotImplementedError

    @property
    def singular_at_zero(self) -> bool:
        """True when f'(0+) is infinite, so densities must stay positive."""
        return False

    def mccann_threshold(self, d: int) -> bool | None:
        """Closed-form verdict for McCann's condition, or None when unknown."""
        return None

    def domain_max(self) -> float:
        return np.inf

    def describe(self) -> str:
        return self.kind


@dataclass(frozen=True)
class PowerLaw(Nonlinearity):
    """f(r) = r**m. ``kind`` is "linear" for the heat equation, "power" otherwise."""

    m: float
    kind: str = "power"

    def __post_init__(self):
        if not np.isfinite(self.m) or self.m <= 0:
            raise InvalidParameter(f"power exponent must be positive, got m={self.m}")
        if self.kind not in ("power", "linear"):
            raise InvalidParameter(f"unknown power-law kind {self.kind!r}")
        if self.kind == "linear" and self.m != 1.0:
            raise InvalidParameter("the linear family has m = 1")

    @property
    def is_linear(self) -> bool:
        return self.m == 1.0

    def f(self, r):
        return np.power(r, self.m)

    def df(self, r):
        return self.m * np.power(r, self.m - 1.0)

    def U(self, r):
        r = np.asarray(r, dtype=float)
        if self.is_linear:
            return xlogy(r, r) - r
        return (np.power(r, self.m) - self.m * r) / (self.m - 1.0)

    def dU(self, r):
        r = np.asarray(r, dtype=float)
        if self.is_linear:
            return np.log(r)
        return self.m * (np.power(r, self.m - 1.0) - 1.0) / (self.m - 1.0)

    def d2U(self, r):
        return self.m * np.power(r, self.m - 2.0)

    @property
    def singular_at_zero(self) -> bool:
        return self.m < 1.0

    def mccann_threshold(self, d: int) -> bool:
        # m >= 1 - 1/d, with a few ulps of slack so that m = 1 - 1/d computed
        # in floating point counts as the (non-strict) boundary case
        return bool(self.m >= (1.0 - 1.0 / d) - 4 * np.finfo(float).eps)

    def describe(self) -> str:
        return "linear" if self.kind == "linear" else f"power:m={self.m:g}"


class TabulatedNonlinearity(Nonlinearity):
    """f given by samples (r_k, f_k), interpolated by a monotone cubic.

    The table must start at r = 0 with f = 0 and reach r = 1, where U' is
    anchored. U' is obtained by integrating f'(rho)/rho exactly on each cubic
    piece, then U = r U' - f.
    """

    kind = "custom"

    def __init__(self, r, fr, source: str = "table"):
        r = np.asarray(r, dtype=float)
        fr = np.asarray(fr, dtype=float)
        if r.ndim != 1 or r.shape != fr.shape or r.size < 3:
            raise InvalidParameter("table needs at least three (r, f) rows")
        if np.any(np.diff(r) <= 0):
            raise InvalidParameter("table r column must be strictly increasing")
        if r[0] != 0.0 or fr[0] != 0.0:
            raise InvalidParameter("table must start with the row (0, 0)")
        if np.any(np.diff(fr) <= 0):
            raise InvalidParameter("tabulated f must be strictly increasing")
        if r[-1] < 1.0:
            raise InvalidParameter("table must cover r = 1 where U'(1) = 0 is imposed")
        self.r = r
        self.fr = fr
        self.source = source
        self._f = PchipInterpolator(r, fr, extrapolate=False)
        self._df = self._f.derivative()
        self._build_primitive()

    def _build_primitive(self):
        # On piece k, f'(rho) = c1 + 2 c2 (rho - x) + 3 c3 (rho - x)^2, so
        # f'(rho)/rho = alpha/rho + beta + gamma*rho with the coefficients below.
        c = self._f.c
        x = self._f.x[:-1]
        c3, c2, c1 = c[0], c[1], c[2]
        self._alpha = c1 - 2 * c2 * x + 3 * c3 * x**2
        self._beta = 2 * c2 - 6 * c3 * x
        self._gamma = 3 * c3
        knots = self._f.x
        # cumulative integral of f'/rho from knot 1 onwards; piece 0 touches rho = 0
        # and is handled through its own antiderivative.
        inc = np.zeros(len(knots) - 1)
        for k in range(1, len(knots) - 1):
            inc[k] = self._piece_primitive(k, knots[k + 1]) - self._piece_primitive(k, knots[k])
        self._cum = np.concatenate([[0.0], np.cumsum(inc[1:])])  # value at knots[1:]
        self._dU_at_one = self._raw_dU(np.array([1.0]))[0]

    def _piece_primitive(self, k, rho):
        return self._alpha[k] * np.log(rho) + self._beta[k] * rho + 0.5 * self._gamma[k] * rho**2

    def _raw_dU(self, r):
        """Integral of f'/rho from knots[1] to r (any fixed base works; U'(1) fixes it)."""
        k = np.clip(np.searchsorted(self._f.x, r, side="right") - 1, 0, len(self._alpha) - 1)
        x1 = self._f.x[1]
        out = np.empty_like(r)
        first = k == 0
        out[first] = self._piece_primitive(0, r[first]) - self._piece_primitive(0, x1)
        rest = ~first
        kr = k[rest]
        base = self._cum[kr - 1]
        out[rest] = base + self._piece_primitive(kr, r[rest]) - self._piece_primitive(kr, self._f.x[kr])
        return out

    def _check(self, r, allow_zero=True):
        r = np.asarray(r, dtype=float)
        lo_bad = r < 0 if allow_zero else r <= 0
        if np.any(lo_bad) or np.any(r > self.r[-1] * (1 + 1e-12)):
            raise InvalidDomain(f"r outside the tabulated range [0, {self.r[-1]}]")
        return np.minimum(r, self.r[-1])

    def f(self, r):
        r = self._check(r)
        return self._f(r)

    def df(self, r):
        r = self._check(r)
        return self._df(r)

    def dU(self, r):
        r = self._check(r, allow_zero=False)
        scalar = r.ndim == 0
        out = self._raw_dU(np.atleast_1d(r)) - self._dU_at_one
        return out[0] if scalar else out

    def U(self, r):
        r = self._check(r)
        scalar = r.ndim == 0
        r1 = np.atleast_1d(r)
        out = np.zeros_like(r1)
        pos = r1 > 0
        out[pos] = r1[pos] * self.dU(r1[pos]) - self.f(r1[pos])
        return out[0] if scalar else out

    def d2U(self, r):
        r = self._check(r, allow_zero=False)
        return self._df(r) / r

    @property
    def singular_at_zero(self) -> bool:
        return False

    def domain_max(self) -> float:
        return float(self.r[-1])

    def describe(self) -> str:
        return f"table:{self.source}"


def make_power(m: float) -> PowerLaw:
    return PowerLaw(float(m))


def make_linear() -> PowerLaw:
    return PowerLaw(1.0, kind="linear")


def load_table(path) -> TabulatedNonlinearity:
    path = Path(path)
    try:
        data = np.loadtxt(path, comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise InvalidParameter(f"cannot read nonlinearity table {path}: {exc}") from exc
    if data.shape[1] != 2:
        raise InvalidParameter(f"{path}: expected two columns, got {data.shape[1]}")
    return TabulatedNonlinearity(data[:, 0], data[:, 1], source=str(path))


def parse_nonlinearity(spec: str) -> Nonlinearity:
    """Parse ``"power:m=1.5"``, ``"linear"`` or ``"table:<path>"``."""
    spec = spec.strip()
    if spec == "linear":
        return make_linear()
    if spec.startswith("power:"):
        body = spec[len("power:"):].strip()
        key, _, value = body.partition("=")
        if key.strip() != "m" or not value:
            raise InvalidParameter(f"malformed power spec {spec!r}; expected 'power:m=<value>'")
        try:
            m = float(value)
        except ValueError as exc:
            raise InvalidParameter(f"bad exponent in {spec!r}") from exc
        return make_power(m)
    if spec.startswith("table:"):
        return load_table(spec[len("table:"):].strip())
    raise InvalidParameter(f"unknown nonlinearity spec {spec!r}")


@dataclass(frozen=True)
class Verdict:
    """Outcome of a condition check on a sampled grid.

    ``holds`` is the final verdict. ``grid_holds`` is what the samples alone
    say; ``analytic`` is the closed-form answer when the family has one, and
    it takes precedence over the samples.
    """

    holds: bool
    grid_holds: bool
    analytic: bool | None
    worst_r: float
    worst_margin: float
    caveats: tuple[str, ...] = field(default=())

    def __bool__(self):
        return self.holds


def _positive_grid(r_grid, increasing=False):
    if r_grid is None:
        r_grid = DEFAULT_R_GRID
    r = np.asarray(r_grid, dtype=float).ravel()
    if r.size == 0 or np.any(~np.isfinite(r)) or np.any(r <= 0):
        raise InvalidParameter("r_grid must be nonempty and strictly positive")
    if increasing and np.any(np.diff(r) <= 0):
        raise InvalidParameter("r_grid must be strictly increasing")
    return r


def _default_grid_for(f: Nonlinearity, r_grid):
    if r_grid is not None:
        return r_grid
    rmax = f.domain_max()
    if np.isfinite(rmax):
        return DEFAULT_R_GRID[DEFAULT_R_GRID <= rmax]
    return DEFAULT_R_GRID


def _finish(f, d, grid_ok, r, margin, worst):
    analytic = f.mccann_threshold(d)
    holds = grid_ok if analytic is None else analytic
    caveats = ()
    if f.kind == "custom":
        caveats = ("tabulated f: C2 regularity not certified, only discrete monotonicity",)
    return Verdict(
        holds=bool(holds),
        grid_holds=bool(grid_ok),
        analytic=analytic,
        worst_r=float(r[worst]),
        worst_margin=float(margin[worst]),
        caveats=caveats,
    )


def mccann_margin(f: Nonlinearity, d: int, r):
    """d r f'(r) - (d-1) f(r); nonnegative everywhere iff McCann's condition holds."""
    r = np.asarray(r, dtype=float)
    return d * r * f.df(r) - (d - 1) * f.f(r)


def mccann_holds(f: Nonlinearity, d: int, r_grid=None) -> Verdict:
    """Check (d-1) f(r) <= d r f'(r) on the sampled radii."""
    if d < 1:
        raise InvalidParameter("dimension must be >= 1")
    r = _positive_grid(_default_grid_for(f, r_grid))
    margin = mccann_margin(f, d, r)
    tol = 1e-10 * np.maximum(1.0, f.f(r))
    worst = int(np.argmin(margin + tol))
    grid_ok = bool(np.all(margin >= -tol))
    return _finish(f, d, grid_ok, r, margin, worst)


def condition3_monotone(f: Nonlinearity, d: int, r_grid=None) -> Verdict:
    """Check that r -> r**(-1 + 1/d) f(r) is nondecreasing along the grid."""
    if d < 1:
        raise InvalidParameter("dimension must be >= 1")
    r = _positive_grid(_default_grid_for(f, r_grid), increasing=True)
    g = np.power(r, -1.0 + 1.0 / d) * f.f(r)
    inc = np.diff(g)
    tol = 1e-10 * np.maximum(1.0, np.maximum(np.abs(g[1:]), np.abs(g[:-1])))
    if inc.size == 0:
        return _finish(f, d, True, r, np.zeros(1), 0)
    worst = int(np.argmin(inc + tol))
    grid_ok = bool(np.all(inc >= -tol))
    return _finish(f, d, grid_ok, r[1:], inc, worst)


def psi_function(f: Nonlinearity, d: int, r):
    """psi(r) = r**d U(r**-d)."""
    r = np.asarray(r, dtype=float)
    return np.power(r, d) * f.U(np.power(r, -float(d)))


def psi_entropy_convexity(f: Nonlinearity, d: int, r_grid=None) -> Verdict:
    """Check discrete convexity of psi(r) = r**d U(r**-d) via second divided differences."""
    if d < 1:
        raise InvalidParameter("dimension must be >= 1")
    if r_grid is None:
        rmax = f.domain_max()
        lo = 1e-3 if not np.isfinite(rmax) else max(1e-3, rmax ** (-1.0 / d) * (1 + 1e-9))
        r_grid = np.logspace(np.log10(lo), 3.0, 1201)
    r = _positive_grid(r_grid, increasing=True)
    if r.size < 3:
        raise InvalidParameter("need at least three radii for second differences")
    psi = psi_function(f, d, r)
    if not np.all(np.isfinite(psi)):
        raise InvalidDomain("U is undefined at some sampled points")
    h0 = r[1:-1] - r[:-2]
    h1 = r[2:] - r[1:-1]
    w_left = 2.0 / (h0 * (h0 + h1))
    w_mid = -2.0 / (h0 * h1)
    w_right = 2.0 / (h1 * (h0 + h1))
    second = w_left * psi[:-2] + w_mid * psi[1:-1] + w_right * psi[2:]
    # rounding floor of the three-term combination
    scale = np.abs(w_left * psi[:-2]) + np.abs(w_mid * psi[1:-1]) + np.abs(w_right * psi[2:])
    tol = 1e-10 * np.maximum(scale, 1.0)
    worst = int(np.argmin(second + tol))
    grid_ok = bool(np.all(second >= -tol))
    return _finish(f, d, grid_ok, r[1:-1], second, worst)


def bracket_inequality(f: Nonlinearity, d: int, r: float, p: float, s: float, S: float) -> float:
    """p**d f(r p**-d) (S - 1) + f(r) (s - 1) for admissible s >= p, S >= 1/p.

    Here p is the d-th root of det of the Brenier Hessian, s and S the normalised
    Laplacians of the potential and of its Legendre transform.
    """
    if not (r > 0 and p > 0):
        raise InvalidParameter("r and p must be positive")
    slack = 1e-12 * max(1.0, abs(p), abs(1.0 / p))
    if s < p - slack or S < 1.0 / p - slack:
        raise InvalidParameter("need s >= p and S >= 1/p")
    return float(p**d * f.f(r * p ** (-d)) * (S - 1.0) + f.f(r) * (s - 1.0))


def bracket_lower_bound(f: Nonlinearity, d: int, r: float, p: float) -> float:
    """(p - 1)(f(r) - p**(d-1) f(r p**-d)), the bracket at s = p, S = 1/p."""
    return float((p - 1.0) * (f.f(r) - p ** (d - 1) * f.f(r * p ** (-d))))
