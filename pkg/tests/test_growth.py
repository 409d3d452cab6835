import math

import numpy as np
import pytest

from oracles import scalar_root_bisection
from rtgrowth import (
    ModeCache,
    ModeLattice,
    alpha_of_s,
    build_normal_mode,
    find_neutral_bound,
    normal_mode_residual,
    solve_growth_rate,
)
from rtgrowth.errors import NotUnstable, StableInput

# independent sign-change bisection on s^2 + alpha(s), pure RT, k_max 8, degree 32
LAMBDA_REF_K8_DEG32 = 0.07521041201587039


@pytest.fixture(scope="module")
def ref_result():
    from rtgrowth import RTParameters

    return solve_growth_rate(RTParameters(2.0, 1.0), ModeLattice(8), 32, tol=1e-10)


def test_neutral_bracket(pure_rt):
    cache = ModeCache(pure_rt, 16)
    lo, hi = find_neutral_bound(pure_rt, ModeLattice(4), 16, 1.0, cache)
    a_lo = alpha_of_s(pure_rt, lo, ModeLattice(4), 16, cache=cache, profile=False).alpha
    a_hi = alpha_of_s(pure_rt, hi, ModeLattice(4), 16, cache=cache, profile=False).alpha
    assert a_lo < 0 < a_hi
    assert hi - lo <= 1e-3 * hi


def test_neutral_bound_from_small_guess(pure_rt):
    lo, hi = find_neutral_bound(pure_rt, ModeLattice(4), 12, 1e-6)
    assert 0 < lo < hi


def test_neutral_bound_stable(pure_rt):
    with pytest.raises(NotUnstable):
        find_neutral_bound(pure_rt.replace(vartheta=2.0), ModeLattice(3), 12)


def test_log_monotone(ref_result):
    log = sorted(ref_result.iterations)
    alphas = [a for _, a in log]
    assert all(b >= a - 1e-14 for a, b in zip(alphas, alphas[1:]))


def test_reference_lambda(ref_result):
    assert ref_result.verdict == "Unstable"
    assert abs(ref_result.Lambda - LAMBDA_REF_K8_DEG32) <= 1e-8
    lo, hi = ref_result.frak_J
    assert 0 < ref_result.Lambda < hi


def test_reference_lambda_live_oracle(pure_rt):
    lat = ModeLattice(4)
    cache = ModeCache(pure_rt, 16)
    r = solve_growth_rate(pure_rt, lat, 16, tol=1e-10, cache=cache, with_pressure=False)
    f = lambda s: s * s + alpha_of_s(pure_rt, s, lat, 16, cache=cache, profile=False).alpha
    root = scalar_root_bisection(f, 1e-8, r.frak_J[1], 1e-12)
    assert abs(r.Lambda - root) <= 1e-8


def test_fixed_point_identity(ref_result):
    L = ref_result.Lambda
    assert abs(L * L + ref_result.alpha_at_Lambda) <= 1e-10 * max(1.0, L * L)


def test_profile_normalized(ref_result):
    from rtgrowth import build_mode_operators

    w = ref_result.eigenprofile
    ops = build_mode_operators(ref_result.parameters, w.wavevector, w.degree)
    x = w.vector
    assert np.real(np.vdot(x, ops.M @ x)) == pytest.approx(1.0, abs=1e-10)


def test_stable_verdicts(pure_rt):
    r = solve_growth_rate(pure_rt.replace(vartheta=1.1), ModeLattice(4), 12)
    assert r.verdict == "Stable" and r.Lambda is None
    with pytest.raises(StableInput):
        build_normal_mode(r)


def test_normal_mode(ref_result):
    m = build_normal_mode(ref_result)
    L = ref_result.Lambda
    eta, u, q = m.field(0.0)
    assert np.array_equal(u.vector, ref_result.eigenprofile.vector)
    assert np.allclose(eta.vector * L, u.vector, rtol=1e-15, atol=0)
    e1, u1, q1 = m.field(0.3)
    e2, u2, q2 = m.field(1.1)
    assert np.allclose(u2.vector, math.exp(L * 0.8) * u1.vector, rtol=1e-13, atol=0)
    assert np.allclose(q2.minus, math.exp(L * 0.8) * q1.minus, rtol=1e-13, atol=0)
    assert np.allclose(e2.vector * L, u2.vector, rtol=1e-14, atol=0)


def test_residual_report(ref_result):
    rep = ref_result.residual_report
    assert rep["interior"] <= 1e-6
    assert rep["interface"] <= 1e-6
    assert rep["divergence"] <= 1e-10
    assert rep["boundary"] <= 1e-12


def test_zero_mode_zero_residual(ref_result):
    m = build_normal_mode(ref_result)
    from rtgrowth.growth import NormalMode

    z = NormalMode(m.Lambda, m.eta_profile.scaled(0.0), m.u_profile.scaled(0.0),
                   m.q_profile.scaled(0.0), m.wavevector)
    rep = normal_mode_residual(ref_result.parameters, z, 32)
    assert rep["interior"] == 0.0 and rep["interface"] == 0.0


def test_residual_with_all_effects(rich_params):
    r = solve_growth_rate(rich_params, ModeLattice(4), 32)
    assert r.verdict == "Unstable"
    assert r.residual_report["interior"] <= 1e-6
    assert r.residual_report["interface"] <= 1e-6
    assert r.pressure_consistency <= 1e-6


def test_adaptive_growth(pure_rt):
    r = solve_growth_rate(pure_rt.replace(mu_plus=0.05, mu_minus=0.05), ModeLattice(2, adaptive=True), 12)
    assert r.verdict == "Unstable"
    assert r.lattice.k_max > 2
    per = alpha_of_s(r.parameters, r.Lambda, r.lattice, 12, profile=False)
    assert per.shell_minimum >= per.alpha + 10 * abs(per.alpha) + 1
