import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from supercritical_lab.bubble import rescaled_bubble
from supercritical_lab.continuation import (
    ContinuationSchedule,
    ScheduleError,
    Stage,
    ball_family,
    blend,
    cutoff_chi,
    extract_blowup,
    harmonic,
    ratio_minimizer,
    run_schedule,
    transfer,
)
from supercritical_lab.discretization import assemble, reduction_weights
from supercritical_lab.geometry import AmbientParams, build_ball_generator
from supercritical_lab.solver import SolveOptions

P = AmbientParams(4, 1, "axial")
W = reduction_weights(P)


@pytest.fixture(scope="module")
def ball():
    dom = build_ball_generator(2.0, 1.0, 0.01, P)
    return dom, assemble(dom, W)


def _node_near(dom, z):
    return tuple(dom.nodes[np.argmin(np.linalg.norm(dom.nodes - np.asarray(z), axis=1))])


@pytest.mark.parametrize("eps", [0.05, 0.08])
def test_round_trip(ball, eps):
    dom, f = ball
    z = _node_near(dom, (0.0, 2.0))
    d = extract_blowup(rescaled_bubble(dom, eps, z, 3), 3, W, f)
    assert d.epsilon == pytest.approx(eps, rel=0.02)
    assert np.linalg.norm(np.subtract(d.zeta, z)) <= 0.01
    assert d.sign == 1 and not d.degenerate


def test_sign_flip(ball):
    dom, f = ball
    z = _node_near(dom, (0.0, 1.8))
    u = rescaled_bubble(dom, 0.06, z, 3)
    a, b = extract_blowup(u, 3, W, f), extract_blowup(-u, 3, W, f)
    assert b.sign == -1
    assert a.zeta == b.zeta and a.epsilon == b.epsilon
    assert a.profile_error == pytest.approx(b.profile_error, abs=1e-14)


def test_epsilon_tracks_a_over_c(ball):
    # c scaled by 1/4: a/c = 4, eps picks up (a/c)^{1/2} for n = 3
    dom, _ = ball
    w4 = W.__class__(W.a_exponents, 0.0, W.c_exponents, 1.0, 0.25, None,
                     W.orbit_exponent, W.orbit_scale)
    z = _node_near(dom, (0.0, 2.0))
    u = rescaled_bubble(dom, 0.05, z, 3)
    e1 = extract_blowup(u, 3, W, assemble(dom, W)).epsilon
    e4 = extract_blowup(u, 3, w4, assemble(dom, w4)).epsilon
    assert e4 == pytest.approx(2 * e1, rel=1e-12)


def test_schedule_validation():
    with pytest.raises(ScheduleError):
        ContinuationSchedule([])
    with pytest.raises(ScheduleError):
        ContinuationSchedule([(0.1, 6.5, 0, 0.05), (0.2, 6.1, 0, 0.04)])
    with pytest.raises(ScheduleError):
        ContinuationSchedule([(0.1, 6.5, 0, 0.05), (0.0, 6.7, 0, 0.04)])
    with pytest.raises(ScheduleError):
        ContinuationSchedule([(0.1, 6.5, 0, 0.05), (0.0, 6.1, 0, 0.06)])
    with pytest.raises(ScheduleError):
        ContinuationSchedule([(0.0, 2.0, 0, 0.05)])
    assert len(ContinuationSchedule([Stage(0.0, 6.0, 0.0, 0.1)])) == 1


def test_constant_schedule_is_idempotent():
    fam = ball_family(2.0, 1.0, P)
    sch = ContinuationSchedule([Stage(0.1, 6.5, 0.0, 0.06)] * 2)
    r = run_schedule(fam, W, sch, SolveOptions(restarts=1))
    assert r[1].result.level == pytest.approx(r[0].result.level, rel=1e-7)
    assert r[1].descriptor.zeta == pytest.approx(r[0].descriptor.zeta, abs=1e-9)


def test_transfer_is_exact_on_linear_fields():
    a = build_ball_generator(2.0, 1.0, 0.1, P)
    b = build_ball_generator(2.0, 1.0, 0.07, P)
    u = 3.0 + a.nodes[:, 0] - 0.5 * a.nodes[:, 1]
    v = transfer(u, a, b)
    inside = ~b.mesh.dirichlet & (np.linalg.norm(b.nodes - (0, 2), axis=1) < 0.85)
    exact = 3.0 + b.nodes[:, 0] - 0.5 * b.nodes[:, 1]
    assert np.allclose(v[inside], exact[inside], atol=1e-12)
    assert np.all(v[b.mesh.dirichlet] == 0)


def test_ratio_minimizer():
    dom = build_ball_generator(2.0, 1.0, 0.05, P)
    assert ratio_minimizer(dom, W, 3) == pytest.approx((0.0, 1.0), abs=1e-6)
    bumped = reduction_weights(P, c_bump=(0.0, 2.0, 3.0, 0.3))
    assert abs(ratio_minimizer(dom, bumped, 3)[1] - 2.0) < 0.1


def test_harmonic():
    assert harmonic(4) == pytest.approx(float(Fraction(25, 12)), rel=1e-15)


def test_cutoff_k1_is_g():
    c = cutoff_chi(1)
    gp = lambda r: -30 * (r - 1) ** 2 * (2 - r) ** 2
    G = integrate.quad(lambda r: 2 * math.pi * r * gp(r) ** 2, 1, 2, epsabs=0, epsrel=1e-13)[0]
    S = math.pi + integrate.quad(lambda r: 2 * math.pi * r * blend(r) ** 2, 1, 2,
                                 epsabs=0, epsrel=1e-13)[0]
    assert c.grad_sq_integral == pytest.approx(G, rel=1e-12)
    assert c.sq_integral == pytest.approx(S, rel=1e-12)
    assert np.allclose(c.profile, blend(c.radii), atol=1e-15)


@pytest.mark.parametrize("k", [1, 3, 16])
def test_cutoff_support(k):
    c = cutoff_chi(k, radius_scale=0.7)
    assert np.all(c.profile[c.radii <= 0.7 / k] == pytest.approx(1.0, abs=1e-14))
    assert np.all(c.profile[c.radii >= 1.4] == 0.0)
    assert np.all(np.diff(c.profile) <= 1e-15)


def test_cutoff_decay():
    ks = [2 ** i for i in range(9)]
    res = [cutoff_chi(k) for k in ks]
    g = [r.grad_sq_integral for r in res]
    s = [r.sq_integral for r in res]
    assert all(np.diff(g) < 0) and all(np.diff(s) < 0)
