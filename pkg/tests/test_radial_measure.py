import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import C1, C2, C3, uniform_balls_w2_sq
from radwass.errors import InvalidMap, InvalidParameter, MassMismatch
from radwass.radial_measure import (
    RadialDensity,
    RadialGrid,
    RadialMap,
    invert_monotone,
    monge_ampere_density,
    pushforward_radial,
    quantile_plan,
    read_density,
    unit_ball_volume,
    w2_radial,
    w2_squared,
    write_density,
)


def test_unit_ball_volumes():
    assert unit_ball_volume(1) == pytest.approx(C1, rel=1e-15)
    assert unit_ball_volume(2) == pytest.approx(C2, rel=1e-15)
    assert unit_ball_volume(3) == pytest.approx(C3, rel=1e-15)


def test_grid_volumes_sum_to_ball():
    g = RadialGrid.uniform(3, 2.0, 37)
    assert g.volumes.sum() == pytest.approx(C3 * 8.0, rel=1e-14)
    assert g.sigma == pytest.approx(4 * np.pi, rel=1e-15)


@pytest.mark.parametrize("edges", [[0.1, 1.0], [0.0], [0.0, 0.5, 0.5, 1.0], [0.0, 1.0, 0.7]])
def test_grid_rejects_bad_edges(edges):
    with pytest.raises(InvalidParameter):
        RadialGrid(3, np.array(edges))


def test_graded_grid_resolves_focus_interval():
    g = RadialGrid.graded(3, 1.5, 0.01, focus=[(1.0, 1.001)], h_min=1e-5, growth=1.05)
    w = g.widths
    inside = (g.centers > 1.0) & (g.centers < 1.001)
    assert w[inside].max() <= 1.05e-5
    assert w.max() <= 0.01 + 1e-15
    assert g.R == 1.5
    assert np.any(np.isclose(g.edges, 1.0)) and np.any(np.isclose(g.edges, 1.001))


def test_uniform_ball_exact_filling():
    g = RadialGrid.uniform(3, 2.0, 7)
    u = RadialDensity.uniform_ball(g, 2.0, 1.3)
    assert u.mass == pytest.approx(2.0 * C3 * 1.3**3, rel=1e-14)
    # the straddling shell holds the remainder, so all mass sits inside its outer edge
    outer = g.edges[np.searchsorted(g.edges, 1.3)]
    assert u.mass_within(outer) == pytest.approx(u.mass, rel=1e-14)
    assert u.values[0] == 2.0 and u.values[-1] == 0.0


def test_quantile_inverts_cumulative_mass():
    g = RadialGrid.uniform(3, 1.0, 50)
    u = RadialDensity.from_function(g, lambda r: 1 + np.cos(3 * r) ** 2)
    np.testing.assert_allclose(u.quantile(u.cumulative_mass()), g.edges, atol=1e-13)
    rho = np.linspace(0, 1, 17)
    np.testing.assert_allclose(u.quantile(u.mass_within(rho)), rho, atol=1e-12)


def test_quantile_of_uniform_ball_at_one_eighth():
    g = RadialGrid.uniform(3, 2.0, 100)
    u = RadialDensity.uniform_ball(g, 1.0, 1.0)
    assert u.quantile(u.mass / 8) == pytest.approx(0.5, rel=1e-14)
    with pytest.raises(InvalidParameter):
        u.quantile(2 * u.mass)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_w2_uniform_balls_closed_form(d):
    g = RadialGrid.uniform(d, 2.0, 2000)
    u = RadialDensity.uniform_ball(g, 1.0, 1.0)
    v = RadialDensity.uniform_ball(g, 2.0 ** -d, 2.0)
    expected = uniform_balls_w2_sq(d, 1.0, 2.0, u.mass)
    assert w2_squared(u, v) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("N", [200, 400, 800])
def test_w2_dilation_of_arbitrary_density(N):
    # dilation by lam sends rho to lam rho, so W2^2 = (1 - lam)^2 int rho^2 du;
    # re-binning the dilated density onto the same grid costs O(h^2)
    g = RadialGrid.uniform(3, 1.0, N)
    u = RadialDensity.from_function(g, lambda r: np.exp(-8 * r * r))
    lam = 0.6
    v = RadialDensity.from_cumulative(g, lambda rho: u.mass_within(rho / lam))
    assert w2_squared(u, v) == pytest.approx((1 - lam) ** 2 * u.second_moment(), rel=20.0 / N**2)


def test_w2_optional_mass_bins_do_not_change_value():
    g = RadialGrid.uniform(2, 1.0, 100)
    u = RadialDensity.from_function(g, lambda r: 1 + r)
    v = RadialDensity.from_function(g, lambda r: 2 - r).normalized_to(u.mass)
    w_plain, _ = w2_radial(u, v)
    w_binned, plan = w2_radial(u, v, K=400)
    assert w_binned == pytest.approx(w_plain, rel=1e-12)
    assert plan.transposed().cost() == pytest.approx(plan.cost(), rel=1e-15)


def test_w2_requires_equal_mass():
    g = RadialGrid.uniform(3, 1.0, 10)
    u = RadialDensity.uniform_ball(g, 1.0, 0.5)
    with pytest.raises(MassMismatch):
        w2_squared(u, u.normalized_to(2 * u.mass))
    with pytest.raises(InvalidParameter):
        quantile_plan(u, u, K=0)


def _random_density(g, coeffs):
    vals = np.abs(np.polynomial.chebyshev.chebval(2 * g.centers / g.R - 1, coeffs)) + 0.05
    return RadialDensity(g, vals)


positive_coeffs = st.lists(st.floats(-1.0, 1.0), min_size=2, max_size=5)


@given(c1=positive_coeffs, c2=positive_coeffs, c3=positive_coeffs, d=st.integers(1, 4))
def test_w2_metric_axioms(c1, c2, c3, d):
    g = RadialGrid.uniform(d, 1.0, 60)
    u = _random_density(g, c1)
    v = _random_density(g, c2).normalized_to(u.mass)
    w = _random_density(g, c3).normalized_to(u.mass)
    duv = np.sqrt(w2_squared(u, v))
    dvu = np.sqrt(w2_squared(v, u))
    duw = np.sqrt(w2_squared(u, w))
    dwv = np.sqrt(w2_squared(w, v))
    assert w2_squared(u, u) == pytest.approx(0.0, abs=1e-28)
    assert duv == pytest.approx(dvu, rel=1e-12, abs=1e-15)
    assert duv <= duw + dwv + 1e-12


def test_pushforward_by_dilation_map():
    g = RadialGrid.uniform(3, 2.0, 400)
    u = RadialDensity.uniform_ball(g, 1.0, 1.0)
    q = RadialMap(lambda z: np.minimum(1.5 * np.asarray(z), 1.5 + 0.25 * (np.asarray(z) - 1.0)))
    v = pushforward_radial(u, q)
    assert v.mass == pytest.approx(u.mass, rel=1e-12)
    # inside the image ball the density is 1 / 1.5^3
    inner = g.centers < 1.4
    np.testing.assert_allclose(v.values[inner], 1.5**-3, rtol=1e-9)


def test_pushforward_rejects_non_monotone_map():
    g = RadialGrid.uniform(3, 1.0, 10)
    u = RadialDensity.uniform_ball(g, 1.0, 0.5)
    with pytest.raises(InvalidMap):
        pushforward_radial(u, RadialMap(lambda z: 1.0 - np.asarray(z)))
    with pytest.raises(InvalidMap):
        pushforward_radial(u, RadialMap(lambda z: 2.0 * np.asarray(z)))


def test_monge_ampere_density_for_dilation():
    y, v = monge_ampere_density(lambda z: np.ones_like(z), RadialMap(lambda z: 2 * z, lambda z: 2 + 0 * z), np.array([0.3]), 3)
    assert y[0] == pytest.approx(0.6)
    assert v[0] == pytest.approx(1 / 8)


def test_invert_monotone_hits_kinks_exactly():
    f = lambda z: np.where(z < 1, 1.1 * z, 0.5 * (z + 1.2))
    df = lambda z: np.where(z < 1, 1.1, 0.5)
    z = invert_monotone(f, df, np.array([1.1, 1.1125, 1.15, 0.0, 0.55]), 0.0, 1.5)
    np.testing.assert_allclose(z, [1.0, 1.025, 1.1, 0.0, 0.5], atol=1e-13)


def test_density_file_roundtrip(tmp_path):
    g = RadialGrid.uniform(2, 1.5, 30)
    u = RadialDensity.from_function(g, lambda r: 1 + r**2)
    p = tmp_path / "u.txt"
    write_density(p, u)
    w = read_density(p)
    assert w.grid.d == g.d and w.grid.N == g.N
    np.testing.assert_allclose(w.grid.edges, g.edges, rtol=1e-14, atol=0)
    np.testing.assert_allclose(w.values, u.values, rtol=1e-14)
    p.write_text("no header\n")
    with pytest.raises(InvalidParameter):
        read_density(p)


def test_density_validation():
    g = RadialGrid.uniform(3, 1.0, 4)
    for bad in ([1, 2, 3], [1, -1, 1, 1], [1, np.nan, 1, 1]):
        with pytest.raises(InvalidParameter):
            RadialDensity(g, np.array(bad, float))
