import numpy as np
import pytest

from oracles import C3, LIMIT_BALL_M04, LIMIT_BALL_M2, LIMIT_SPHERE_M04, LIMIT_SPHERE_M2, W2_LIMIT_SQ_D3, taylor_limit
from radwass.counterexample import (
    CounterexampleSpec,
    MollifiedData,
    ball_normalized_limit,
    build_psi,
    contraction_violation_experiment,
    dissipation_integral_i1_target_form,
    dissipation_integrals,
    dissipation_limit,
    extrapolate_to_zero,
    initial_w2_squared,
    integrals_sweep,
    mollify,
    rescaled_limit,
    transition_grid,
    w2_limit_squared,
)
from radwass.errors import InvalidParameter
from radwass.nonlinearity import make_linear, make_power
from radwass.radial_measure import w2_squared

EPS = np.geomspace(1e-2, 1e-4, 8)


def spec(eps=1e-3, d=3, **kw):
    args = dict(d=d, r=1.0, a=1.0, delta=0.1, eps=eps, R=1.5)
    args.update(kw)
    return CounterexampleSpec(**args)


def test_closed_forms_against_frozen_values():
    assert dissipation_limit(make_power(0.4), 3, 1.0, 1.0, 0.1) == pytest.approx(LIMIT_SPHERE_M04, rel=1e-13)
    assert dissipation_limit(make_power(2.0), 3, 1.0, 1.0, 0.1) == pytest.approx(LIMIT_SPHERE_M2, rel=1e-13)
    assert ball_normalized_limit(make_power(0.4), 3, 1.0, 1.0, 0.1) == pytest.approx(LIMIT_BALL_M04, rel=1e-13)
    assert ball_normalized_limit(make_power(2.0), 3, 1.0, 1.0, 0.1) == pytest.approx(LIMIT_BALL_M2, rel=1e-13)
    assert w2_limit_squared(spec()) == pytest.approx(W2_LIMIT_SQ_D3, rel=1e-13)
    assert spec().mass == pytest.approx(C3, rel=1e-15)


@pytest.mark.parametrize("m", [0.3, 0.5, 1.0, 2.0])
def test_rescaled_limit_tends_to_taylor_coefficient(m):
    f = make_power(m)
    vals = [rescaled_limit(f, 3, 0.7, dl) for dl in (1e-2, 1e-3, 1e-4)]
    target = taylor_limit(3, m, 0.7)
    errs = [abs(v - target) for v in vals]
    assert errs[-1] < 1e-3 * max(1.0, abs(target))
    assert errs[0] > errs[1] > errs[2]


def test_sign_of_limit_follows_the_threshold():
    for d in (2, 3, 4):
        thr = 1 - 1 / d
        assert dissipation_limit(make_power(thr - 0.1), d, 1.0, 1.0, 0.05) > 0
        assert dissipation_limit(make_power(thr + 0.1), d, 1.0, 1.0, 0.05) < 0
        assert dissipation_limit(make_power(thr), d, 1.0, 1.0, 0.05) == pytest.approx(0.0, abs=1e-15)


def test_psi_is_continuous_and_maps_the_ball_into_itself():
    s = spec()
    psi = build_psi(s)
    k1, k2 = s.a, (1 + 2 * s.delta) * s.a
    for k in (k1, k2):
        left, right = psi(np.array([k - 1e-12, k + 1e-12]))
        assert right - left < 1e-11
    assert psi(np.array([s.R]))[0] == s.R
    y = np.linspace(0, s.R, 101)
    np.testing.assert_allclose(psi(psi.inverse(y)), y, atol=1e-14)


@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_mollified_map_invariants(eps):
    s = spec(eps)
    mm = mollify(s)
    psi = build_psi(s)
    # agrees with psi outside the blends, including the points a/2 and R
    z = np.array([0.5 * s.a, 0.9 * s.a, 1.1 * s.a, s.R])
    np.testing.assert_array_equal(mm(z), psi(z))
    assert mm.Lambda >= 1 + s.delta
    assert mm.Lambda < 6.0
    assert mm.A < 0.5
    assert mm.sup_error <= mm.A * eps * (1 + 1e-12)
    zz = np.linspace(1e-6, s.R, 5001)
    ratio = mm(zz) / zz
    assert ratio.min() >= 1 - 1e-12 and ratio.max() <= 1 + s.delta + 1e-12
    # derivative agrees with a finite difference of the values
    zb = np.linspace(*mm.b1, 7)[1:-1]
    h = 1e-4 * eps
    np.testing.assert_allclose((mm(zb + h) - mm(zb - h)) / (2 * h), mm.derivative(zb), rtol=1e-6)


def test_mollified_data_has_equal_mass_and_positive_floor():
    s = spec(1e-3)
    data = MollifiedData(s)
    assert data.mass_u(np.array([s.R]))[0] == pytest.approx(s.mass, rel=1e-13)
    assert data.mass_v(np.array([s.R]))[0] == pytest.approx(s.mass, rel=1e-13)
    y = np.linspace(0.01, s.R, 2001)
    assert data.v(y).min() > 0 and data.u(y).min() > 0
    # v0 is uniform well inside the image ball
    assert data.v(np.array([0.5]))[0] == pytest.approx(data.u(np.array([0.1]))[0] / 1.1**3, rel=1e-12)


def test_two_forms_of_i1_agree():
    s = spec(1e-3)
    f = make_power(0.4)
    data = MollifiedData(s)
    I1, _ = dissipation_integrals(s, f, data)
    assert dissipation_integral_i1_target_form(s, f, data) == pytest.approx(I1, rel=1e-6)


@pytest.mark.parametrize("m,expected", [(0.4, LIMIT_SPHERE_M04), (2.0, LIMIT_SPHERE_M2)])
def test_extrapolated_sum_matches_sphere_area_limit(m, expected):
    f = make_power(m)
    rows = integrals_sweep(spec(EPS[0]), f, EPS)
    total = np.array([r["I1"] + r["I2"] for r in rows])
    ex = extrapolate_to_zero(EPS, total, f)
    assert ex.limit == pytest.approx(expected, rel=1e-2)
    assert np.sign(ex.limit) == np.sign(expected)


def test_extrapolation_recovers_synthetic_limit():
    f = make_power(0.4)
    vals = 0.3 + 2.0 * EPS - 0.7 * f.f(EPS)
    ex = extrapolate_to_zero(EPS, vals, f)
    assert ex.limit == pytest.approx(0.3, rel=1e-10)
    assert ex.basis == ("1", "eps", "f(eps)")
    lin = extrapolate_to_zero(EPS, 0.3 + 2.0 * EPS, make_linear())
    assert lin.basis == ("1", "eps") and lin.limit == pytest.approx(0.3, rel=1e-10)


def test_initial_w2_tends_to_limit():
    errs = [abs(initial_w2_squared(spec(e)) - W2_LIMIT_SQ_D3) / W2_LIMIT_SQ_D3 for e in (1e-2, 1e-3, 1e-4)]
    assert errs[-1] < 1e-2
    assert errs[0] > errs[1] > errs[2]


def test_grid_w2_matches_quadrature():
    s = spec(1e-3)
    data = MollifiedData(s)
    u, v = data.on_grid(transition_grid(s, data))
    assert w2_squared(u, v) == pytest.approx(initial_w2_squared(s, data), rel=1e-3)


@pytest.mark.parametrize("kw", [dict(eps=0.02), dict(delta=0.3), dict(a=2.0), dict(d=0), dict(r=-1.0)])
def test_spec_validation(kw):
    args = dict(eps=1e-3)
    args.update(kw)
    with pytest.raises(InvalidParameter):
        spec(**args)


def test_eps0_is_admitted():
    s = spec(eps=0.01)
    assert s.eps == s.eps0


def test_violation_experiment_separates_the_pair():
    s = spec(1e-3)
    rep = contraction_violation_experiment(s, make_power(0.4))
    assert rep.verdict == "non-contractive"
    assert rep.d0 > 0
    assert rep.first_rise_time is not None
    assert rep.metadata["condition_margin_at_r"] < 0
    assert rep.mass_drift() < 1e-12


def test_control_experiment_contracts():
    s = spec(1e-3)
    rep = contraction_violation_experiment(s, make_power(2.0))
    assert rep.verdict == "contractive"
    assert rep.d0 < 0
    assert rep.first_rise_time is None
    assert rep.metadata["condition_margin_at_r"] > 0
