import math

import numpy as np
import pytest

from oracles import sectional_fd, warped_slice_metric
from riccicert.constructions import (
    ConcordanceParams,
    ProfileShape,
    HandleParams,
    RoundRadiusPath,
    concordance_schedule,
    concordance_search,
    estimate_C,
    fnu_curve,
    gamma_weight,
    isotopy_stage1,
    isotopy_stage2,
    make_boundary_profile,
    make_handle,
    make_isotopy_target,
    solve_geodesic_triangle,
)
from riccicert.errors import ConditionError, PreconditionError, SearchError
from riccicert.jetcurve import Jet3Curve, Poly, Sin, Sum
from riccicert.verify import GridSpec
from riccicert.warped import DoublyWarpedMetric, sectional

R_TEST = 2.0
B1 = 0.795  # keeps the stage-1 dive feasible after T2 at R = 2
NU_SMALL = 0.01


@pytest.fixture(scope="module")
def profile():
    return make_boundary_profile(R_TEST, NU_SMALL, B1)


@pytest.fixture(scope="module")
def target(profile):
    return make_isotopy_target(profile)


# ---------------------------------------------------------------------------
# handle metric
# ---------------------------------------------------------------------------


def test_fnu_invariants():
    p = HandleParams(R=2.0, nu=0.05, m=3, n=3)
    f = fnu_curve(p)
    L = math.pi * p.R / 3.0
    jet0 = f.jet(0.0)
    assert jet0.value == 1.0
    assert jet0.d1 == 0.0 and jet0.d3 == 0.0
    assert f.jet(L).d1 > p.nu  # f'(end) > nu


def test_fnu_uniform_convergence_linear_in_nu():
    devs = []
    for nu in (0.1, 0.05, 0.025):
        f = fnu_curve(HandleParams(R=2.0, nu=nu, m=3, n=3))
        L = math.pi * 2.0 / 3.0
        devs.append(max(abs(f.value(x) - 1.0)
                        for x in np.linspace(0.0, math.pi * 2.0 / 3.0, 101)))
    assert devs[0] == pytest.approx(0.1, rel=1e-12)  # max at the far end
    assert devs[0] / devs[1] == pytest.approx(2.0, rel=1e-9)
    assert devs[1] / devs[2] == pytest.approx(2.0, rel=1e-9)


def test_handle_nu_zero_limit_ricci_values():
    # f = 1 exactly: Ric_s = (n-1)/(16), Ric_k = m-1, Ric_h = (n-1)/16 at R=2
    R, m, n = 2.0, 3, 3
    dom = (0.0, math.pi * R / 3.0)
    g = DoublyWarpedMetric(
        Jet3Curve.from_node(Poly((1.0,)), dom),
        Jet3Curve.from_node(Sin(2.0 * R, 0.5 / R), dom),
        m, n, start_kind="closed_h", end_kind="boundary")
    c = sectional(g, 1.0)
    assert c.Ric_s == pytest.approx((n - 1) / (4.0 * R * R), abs=1e-12)
    assert c.Ric_k == pytest.approx(m - 1.0, abs=1e-12)
    assert c.Ric_h == pytest.approx((n - 1) / (4.0 * R * R), abs=1e-12)


def test_handle_positive_ricci_at_small_nu():
    g = make_handle(HandleParams(R=2.0, nu=0.01, m=3, n=3))
    lo, hi = g.domain
    cert = g.min_ricci(GridSpec.line(lo, hi, 256, depth=1))
    assert cert.passed
    assert cert.min_margin > 0.01  # regression floor; measured ~ 0.04


def test_handle_boundary_second_form_positive():
    from riccicert.warped import level_set_second_form
    g = make_handle(HandleParams(R=2.0, nu=0.05, m=3, n=3))
    lo, hi = g.domain
    pk, ph = level_set_second_form(g, hi - 1e-5)
    assert pk > 0.05  # the f'/f component the gluing needs


def test_handle_params_validation():
    with pytest.raises(PreconditionError):
        HandleParams(R=0.5, nu=0.1, m=3, n=3)
    with pytest.raises(PreconditionError):
        HandleParams(R=2.0, nu=0.0, m=3, n=3)
    with pytest.raises(PreconditionError):
        HandleParams(R=8.0, nu=0.1, m=3, n=3, fnu_power=4)  # power <= pi R/3


# ---------------------------------------------------------------------------
# boundary-sphere profile
# ---------------------------------------------------------------------------


def test_profile_passes_all_conditions_at_example_params(profile):
    assert profile.report.passed
    for check in profile.report.checks:
        assert check.margin > 0.0, check.name


def test_profile_spec_example_parameters():
    # the nu = 0.05, b1 = pi/6 example: conditions pass (Ricci is separate)
    prof = make_boundary_profile(2.0, 0.05, math.pi / 6.0)
    assert prof.report.passed
    assert prof.report.margin("h_ratio_before_T1") > 0.0
    # quantitative clause: -h''/h > 1/(5R) = 0.1 before T1
    for s in np.linspace(0.05, prof.T1, 100):
        jet = prof.h.jet(s)
        assert -jet.d2 / jet.value > 1.0 / (5.0 * prof.R)


def test_profile_k_closure_exact(profile):
    jet = profile.k.jet(profile.T)
    assert jet.value == pytest.approx(0.0, abs=1e-9)
    assert jet.d1 == pytest.approx(-1.0, abs=1e-9)
    assert jet.d2 == pytest.approx(0.0, abs=1e-9)


def test_profile_total_length_matches_round_path(profile):
    assert profile.T == pytest.approx(0.5 * math.pi * R_TEST, abs=1e-12)


def test_profile_reports_failures():
    # R too large: the h-arc cannot satisfy -h''/h > 1/(5R) while reaching R
    with pytest.raises(PreconditionError):
        make_boundary_profile(6.0, 0.01, B1)


def test_profile_metric_is_ricci_positive(profile):
    g = profile.metric(3, 3)
    cert = g.min_ricci(GridSpec.line(0.0, profile.T, 512, depth=1))
    assert cert.passed


# ---------------------------------------------------------------------------
# stage-1 target and the two isotopy stages
# ---------------------------------------------------------------------------


def test_target_passes_all_conditions(target):
    assert target.report.passed


def test_target_pins_value_at_T1(profile, target):
    assert target.k1.value(profile.T1) == pytest.approx(
        profile.k.value(profile.T1), abs=1e-9)


def test_target_slope_band(profile, target):
    nu_cb = profile.nu * math.cos(profile.b1)
    for s in np.linspace(0.05, profile.T2, 150):
        d1 = target.k1.jet(s).d1
        assert -nu_cb < d1 < 0.0


def test_stage1_endpoints_bit_exact(profile, target):
    path = isotopy_stage1(profile, target, 3, 3)
    assert path.metric_at(0.0).k is profile.k
    assert path.metric_at(1.0).k is target.k1
    assert path.metric_at(1.0).h is target.h1


def test_stage1_ricci_positive(profile, target):
    path = isotopy_stage1(profile, target, 3, 3)
    grid = GridSpec.box([(0.0, 1.0, 24), (0.0, profile.T, 128)], depth=1)
    cert = path.min_ricci(grid)
    assert cert.passed


def test_stage2_requires_concavity_and_domain(profile, target):
    with pytest.raises(PreconditionError):
        isotopy_stage2(target.k1, target.h1, 3.0, 3, 3)  # wrong domain for R=3
    convex = Jet3Curve.from_node(Poly((1.0, 0.0, 1.0)), target.k1.domain)
    with pytest.raises(PreconditionError):
        isotopy_stage2(convex, target.h1, R_TEST, 3, 3)


def test_stage2_ricci_positive_and_ends_round(profile, target):
    path = isotopy_stage2(target.k1, target.h1, R_TEST, 3, 3)
    grid = GridSpec.box([(1.0, 2.0, 24), (0.0, profile.T, 128)], depth=1)
    assert path.min_ricci(grid).passed
    g2 = path.metric_at(2.0)
    for s in np.linspace(0.0, profile.T, 64):
        c = sectional(g2, s)
        for v in (c.K_sk, c.K_sh, c.K_kk, c.K_hh, c.K_kh):
            assert v == pytest.approx(1.0 / R_TEST**2, abs=1e-10)


def test_stage_concatenation_shares_the_metric(profile, target):
    p1 = isotopy_stage1(profile, target, 3, 3)
    p2 = isotopy_stage2(target.k1, target.h1, R_TEST, 3, 3)
    end = p1.metric_at(1.0)
    start = p2.metric_at(1.0)
    assert end.k is start.k and end.h is start.h


def test_stage1_derivative_identities_along_path(profile, target):
    # k_lam'(0) = 0 and h_lam'(0) = 1 for every lambda
    path = isotopy_stage1(profile, target, 3, 3)
    for lam in (0.0, 0.3, 0.7, 1.0):
        g = path.metric_at(lam)
        assert g.k.jet(0.0).d1 == pytest.approx(0.0, abs=1e-12)
        assert g.h.jet(0.0).d1 == pytest.approx(1.0, abs=1e-12)
        assert g.k.jet(profile.T).d1 == pytest.approx(-1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# concordance schedule and bounds
# ---------------------------------------------------------------------------


def test_alpha_formula_at_e_squared():
    p = ConcordanceParams(t0=math.e, t1=math.e**2, r0=0.05, r1=0.3,
                          nu=0.7, C=1.0)
    assert p.alpha == pytest.approx(0.5, abs=1e-15)


def test_gamma_at_e():
    assert gamma_weight(math.e) == pytest.approx(1.0 / math.e, rel=1e-15)


def test_schedule_bijection_endpoints():
    p = ConcordanceParams(t0=math.e, t1=math.e**2, r0=0.05, r1=0.3,
                          nu=0.7, C=1.0)
    rho, lam = concordance_schedule(p)
    assert lam.value(p.t0) == pytest.approx(0.0, abs=1e-12)
    assert lam.value(p.t1) == pytest.approx(1.0, abs=1e-12)
    assert rho.value(p.t0) == pytest.approx(p.r1, abs=1e-12)
    assert rho.value(p.t1) == pytest.approx(p.r0, abs=1e-12)


def test_schedule_residual_identities():
    p = ConcordanceParams(t0=4.0, t1=16.0, r0=0.02, r1=0.2, nu=0.5, C=1.2)
    rho, lam = concordance_schedule(p)
    for t in np.exp(np.linspace(math.log(4.0), math.log(16.0), 1000)):
        g = gamma_weight(t)
        assert abs(p.alpha * lam.jet(t).d1 - g) < 1e-10
        jr = rho.jet(t)
        assert abs(p.beta * jr.d1 / jr.value + g) < 1e-10


def test_params_invariants():
    with pytest.raises(PreconditionError):
        ConcordanceParams(t0=0.9, t1=2.0, r0=0.1, r1=0.2, nu=0.5, C=0.1)
    with pytest.raises(PreconditionError):
        ConcordanceParams(t0=2.0, t1=4.0, r0=0.3, r1=0.2, nu=0.5, C=0.1)
    with pytest.raises(PreconditionError):
        ConcordanceParams(t0=2.0, t1=4.0, r0=0.1, r1=0.3, nu=0.5, C=2.0)


# ---------------------------------------------------------------------------
# the slice-family constant C
# ---------------------------------------------------------------------------


def test_estimate_C_constant_path_floors():
    path = RoundRadiusPath(Jet3Curve.from_node(Poly((1.0,)), (0.0, 1.0)), 3)
    assert estimate_C(path, GridSpec.line(0.0, 1.0, 101)) == 1e-6


def test_estimate_C_round_bump_matches_hand_formula():
    # r = 1 + 0.1 sin(pi s): sup|II| = max|r'/r|, sup|d_s II| = max|r''/r - (r'/r)^2|
    node = Sum((Poly((1.0,)), Sin(0.1, math.pi)))
    path = RoundRadiusPath(Jet3Curve.from_node(node, (0.0, 1.0)), 3)
    got = estimate_C(path, GridSpec.line(0.0, 1.0, 2001))
    grid = np.linspace(0.0, 1.0, 20001)
    r = 1.0 + 0.1 * np.sin(math.pi * grid)
    r1 = 0.1 * math.pi * np.cos(math.pi * grid)
    r2 = -0.1 * math.pi**2 * np.sin(math.pi * grid)
    want = 1.1 * max(np.max(np.abs(r1 / r)), np.max(np.abs(r2 / r - (r1 / r) ** 2)))
    assert got == pytest.approx(want, rel=1e-3)


def test_estimate_C_warped_path_finite(profile, target):
    path = isotopy_stage1(profile, target, 3, 3)
    grid = GridSpec.box([(0.0, 1.0, 17), (0.0, profile.T, 65)])
    C = estimate_C(path, grid)
    assert 0.0 < C < 10.0


# ---------------------------------------------------------------------------
# the concordance search
# ---------------------------------------------------------------------------


def bump_path(n=3):
    node = Sum((Poly((1.0,)), Sin(0.1, math.pi)))
    return RoundRadiusPath(Jet3Curve.from_node(node, (0.0, 1.0)), n)


def test_search_constant_path_small_t0():
    path = RoundRadiusPath(Jet3Curve.from_node(Poly((1.0,)), (0.0, 1.0)), 3)
    params, certs, boundary = concordance_search(path, nu=0.1)
    assert params.t0 == 32768.0  # regression baseline: C ~ 0 keeps bounds slack
    assert all(c.passed for c in certs.values())


def test_search_round_bump_certifies():
    params, certs, boundary = concordance_search(bump_path(), nu=0.05)
    assert 2.0 * params.r1 < 0.05
    assert math.log(params.r1) - math.log(params.r0) > params.C
    assert all(c.passed for c in certs.values())
    assert boundary["t0_end_margin"] > 1e-6
    assert boundary["t1_end_margin"] > 1e-6
    assert 0.0 < boundary["theta0"] < 0.5 * math.pi


def test_search_is_deterministic():
    a = concordance_search(bump_path(), nu=0.05)
    b = concordance_search(bump_path(), nu=0.05)
    assert a[0] == b[0]
    assert a[1]["ricci_theta_below"].min_margin == b[1]["ricci_theta_below"].min_margin


def test_search_rejects_nu_edge_cases():
    with pytest.raises(PreconditionError):
        concordance_search(bump_path(), nu=0.0)


def test_concordance_scaled_slices(profile=None):
    # the boundary-scale parameters reproduce iso:00/iso:10: the t0 slice is
    # g_0 and the t1 slice is R^2 g_1 with R = t1 r0 / (t0 r1)
    params, _, _ = concordance_search(bump_path(), nu=0.05,
                                      t_count=40, theta_count=12)
    scale = params.boundary_scale
    slice0 = (scale * params.t0 * params.r1) ** 2
    assert slice0 == pytest.approx(1.0, rel=1e-12)
    slice1 = (scale * params.t1 * params.r0) ** 2
    assert slice1 == pytest.approx(params.end_radius_factor ** 2, rel=1e-12)


def test_concordance_round_instantiation_fd_ricci_spot_check():
    # On a round-radius path, G collapses to a singly warped product
    # dt^2 + W^2(t) ds_n^2 with W = t rho(t) r(lambda(t)). Positivity is
    # scale-invariant, so check G/t_c^2 in log-radial coordinates
    # u = ln(t/t_c), where a 3-D slice FD oracle has O(1) inputs.
    params, _, _ = concordance_search(bump_path(), nu=0.05,
                                      t_count=40, theta_count=12)
    rho, lam = concordance_schedule(params)
    n = 3

    def W_over_t(t):
        lam_t = lam.value(t)
        r = 1.0 + 0.1 * math.sin(math.pi * lam_t)
        return rho.value(t) * r

    rng = np.random.default_rng(99)
    for _ in range(20):
        t_c = math.exp(rng.uniform(math.log(params.t0), math.log(params.t1)))

        def metric(x, t_c=t_c):
            # (u, theta, phi): G / t_c^2 = e^{2u}(du^2 + Wbar^2 ds_2^2)
            t = t_c * math.exp(x[0])
            wbar = W_over_t(t) * math.exp(x[0])
            return np.diag([math.exp(2.0 * x[0]), wbar**2,
                            wbar**2 * math.sin(x[1]) ** 2])

        x = np.array([0.0, 0.9, 0.5])
        K_tw = sectional_fd(metric, x, 0, 1)
        K_ww = sectional_fd(metric, x, 1, 2)
        ric_t = n * K_tw
        ric_w = K_tw + (n - 1) * K_ww
        assert ric_t > 0.0
        assert ric_w > 0.0


# ---------------------------------------------------------------------------
# spherical triangle
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("r", [math.pi / 16, math.pi / 8, math.pi / 6])
def test_triangle_residual_and_base(r):
    sol = solve_geodesic_triangle(r)
    assert abs(sol.residual) < 1e-10
    assert sol.x1 > r
    assert sol.theta0 < 0.5 * math.pi < sol.theta_r < math.pi


def test_triangle_path_limits():
    # sin z -> sin r at (pi/2, pi) and -> 1 at (pi/2, pi/2)
    from riccicert.constructions import _sin_z
    r = math.pi / 8
    near0, _ = _sin_z(0.5 * math.pi, math.pi - 1e-9, r)
    near1, _ = _sin_z(0.5 * math.pi - 1e-4, 0.5 * math.pi, r)
    assert near0 == pytest.approx(math.sin(r), abs=1e-6)
    assert near1 == pytest.approx(1.0, abs=1e-6)


def test_triangle_rejects_large_r():
    with pytest.raises(PreconditionError):
        solve_geodesic_triangle(1.0)
