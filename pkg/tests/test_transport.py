import numpy as np
import pytest

from radwass.errors import DivisionGuard, InvalidParameter, MassMismatch
from radwass.harness import build_initial
from radwass.nonlinearity import make_power
from radwass.radial_measure import RadialDensity, RadialGrid, w2_squared
from radwass.solver import SolverConfig, SolverState, step
from radwass.transport import (
    dissipation,
    dissipation_value,
    displacement_interpolant,
    entropy,
    geodesic_convexity_scan,
)


def _pair(g):
    u = RadialDensity.from_function(g, lambda r: 0.05 + np.exp(-20 * r * r))
    v = RadialDensity.from_function(g, lambda r: 0.05 + np.exp(-10 * (r - 0.4) ** 2)).normalized_to(u.mass)
    return u, v


@pytest.mark.parametrize("m", [0.5, 2.0])
def test_dissipation_matches_time_derivative_of_w2(m):
    # D = (1/2) d/dt W2^2, checked against a central difference of the evolved pair
    g = RadialGrid.uniform(3, 1.0, 400)
    f = make_power(m)
    u, v = _pair(g)
    h = 2e-6
    cfg = SolverConfig(t_end=1.0)
    su, sv = SolverState(0.0, u), SolverState(0.0, v)
    w_plus = w2_squared(step(su, f, cfg, dt=h).density, step(sv, f, cfg, dt=h).density)
    w_half = w2_squared(step(su, f, cfg, dt=h / 2).density, step(sv, f, cfg, dt=h / 2).density)
    w0 = w2_squared(u, v)
    # one-sided Richardson estimate of the derivative at t = 0
    deriv = (4 * (w_half - w0) / (h / 2) - (w_plus - w0) / h) / 3
    D, w2sq = dissipation_value(u, v, f)
    assert w2sq == pytest.approx(w0, rel=1e-14)
    assert D == pytest.approx(0.5 * deriv, rel=5e-3)


def test_dissipation_of_identical_pair_is_zero():
    g = RadialGrid.uniform(2, 1.0, 50)
    u, _ = _pair(g)
    s = dissipation(u, u, make_power(2.0))
    assert s.dissipation == 0.0 and s.w2_sq == 0.0
    assert s.entropy_u == s.entropy_v == entropy(u, make_power(2.0))


def test_dissipation_needs_positive_densities():
    g = RadialGrid.uniform(3, 1.0, 20)
    u = RadialDensity.uniform_ball(g, 1.0, 0.5)
    with pytest.raises(DivisionGuard):
        dissipation_value(u, u, make_power(2.0))


def test_interpolant_endpoints_and_mass():
    g = RadialGrid.uniform(3, 1.0, 200)
    u, v = _pair(g)
    np.testing.assert_allclose(displacement_interpolant(u, v, 0.0).values, u.values, rtol=1e-9)
    np.testing.assert_allclose(displacement_interpolant(u, v, 1.0).values, v.values, rtol=1e-9)
    for t in (0.25, 0.5, 0.8):
        assert displacement_interpolant(u, v, t).mass == pytest.approx(u.mass, rel=1e-12)


def test_interpolant_is_a_constant_speed_geodesic():
    g = RadialGrid.uniform(3, 1.0, 800)
    u, v = _pair(g)
    total = np.sqrt(w2_squared(u, v))
    for t in (0.3, 0.6):
        ut = displacement_interpolant(u, v, t)
        assert np.sqrt(w2_squared(u, ut)) == pytest.approx(t * total, rel=2e-3)
        assert np.sqrt(w2_squared(ut, v)) == pytest.approx((1 - t) * total, rel=2e-3)


def test_interpolant_of_balls_is_a_ball():
    g = RadialGrid.uniform(3, 2.0, 400)
    u = RadialDensity.uniform_ball(g, 1.0, 1.0)
    v = RadialDensity.uniform_ball(g, 1 / 8, 2.0)
    w = displacement_interpolant(u, v, 0.5)
    inside = g.edges[1:] <= 1.5 - 1e-12
    np.testing.assert_allclose(w.values[inside], 1.5**-3, rtol=1e-9)


def test_interpolant_argument_checks():
    g = RadialGrid.uniform(3, 1.0, 20)
    u, v = _pair(g)
    with pytest.raises(InvalidParameter):
        displacement_interpolant(u, v, 1.5)
    with pytest.raises(MassMismatch):
        displacement_interpolant(u, v.normalized_to(2 * u.mass), 0.5)


@pytest.mark.parametrize("m,convex", [(0.4, False), (0.7, True), (1.0, True), (2.0, True)])
def test_geodesic_convexity_on_dilated_balls(m, convex):
    g = RadialGrid.uniform(3, 1.2, 400)
    u = build_initial("smoothed-ball(1, 0.5, 0.05)", g, 0.0)
    v = build_initial("smoothed-ball(1, 1.0, 0.05)", g, 0.0).normalized_to(u.mass)
    scan = geodesic_convexity_scan(u, v, make_power(m))
    assert scan.is_convex() is convex


def test_geodesic_scan_rejects_nonuniform_times():
    g = RadialGrid.uniform(3, 1.0, 20)
    u, v = _pair(g)
    with pytest.raises(InvalidParameter):
        geodesic_convexity_scan(u, v, make_power(2.0), t_grid=[0.0, 0.1, 0.5])
