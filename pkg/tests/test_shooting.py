import math

import numpy as np
import pytest

from desitter import (ChartPoint, ChartState, Connectability, IntegratorConfig,
                      NoConvergence, NotOnBrane, bulk_inner, chart_to_bulk,
                      connectability, embed, integrate_bulk,
                      integrate_geodesic, shoot_geodesic, unembed)
from conftest import random_pseudosphere_point

ORIGIN = ChartPoint([0.0, 0.0, 0.0, 0.0], 1.0)
SOUTH = np.array([0.0, 0.0, 0.0, 0.0, -1.0])


# --------------------------------------------------------------------------
# classifier

def test_classifier_all_classes():
    # c = <Xa, Xb> against the south pole is just the X4 component
    assert connectability(SOUTH, [np.sinh(1), 0, 0, 0, -np.cosh(1)], 1.0) \
        is Connectability.TIMELIKE_GEODESIC
    assert connectability(SOUTH, [1.0, 1.0, 0, 0, -1.0], 1.0) \
        is Connectability.NULL_GEODESIC
    assert connectability(SOUTH, [0, 1.0, 0, 0, 0], 1.0) \
        is Connectability.SPACELIKE_GEODESIC
    assert connectability(SOUTH, [0, 0, 0, 0, 1.0], 1.0) \
        is Connectability.SPACELIKE_GEODESIC  # antipode, c = +ell^2 edge
    assert connectability(SOUTH, [1.0, 0, 0, 0, np.sqrt(2)], 1.0) \
        is Connectability.NO_GEODESIC
    assert connectability(SOUTH, SOUTH, 1.0) is Connectability.COINCIDENT


def test_classifier_is_symmetric(rng):
    for _ in range(50):
        Xa = random_pseudosphere_point(rng)
        Xb = random_pseudosphere_point(rng)
        assert connectability(Xa, Xb, 1.0) is connectability(Xb, Xa, 1.0)


def test_classifier_boundary_band():
    # boundary_tol widens the null band around c = -ell^2
    Xb = np.array([1.0, 1.0 + 1e-6, 0, 0, -1.0])
    Xb[4] = -math.sqrt(1.0 + Xb[0] ** 2 - Xb[1] ** 2)
    assert connectability(SOUTH, Xb, 1.0, boundary_tol=1e-9) \
        is Connectability.SPACELIKE_GEODESIC
    assert connectability(SOUTH, Xb, 1.0, boundary_tol=1e-3) \
        is Connectability.NULL_GEODESIC


def test_classifier_rejects_off_shell():
    with pytest.raises(NotOnBrane):
        connectability(SOUTH, [0, 0, 0, 0, -1.01], 1.0)


def test_classifier_scales_with_ell():
    ell = 7.0
    a = ell * SOUTH
    b = ell * np.array([np.sinh(0.3), 0, 0, 0, -np.cosh(0.3)])
    assert connectability(a, b, ell) is Connectability.TIMELIKE_GEODESIC


# --------------------------------------------------------------------------
# two-point solver, analytic seeds

def test_shoot_timelike_axis():
    target = ChartPoint([2 * math.tanh(0.5), 0, 0, 0], 1.0)
    r = shoot_geodesic(ORIGIN, target)
    assert r.kind is Connectability.TIMELIKE_GEODESIC
    assert r.gauge == "timelike"
    np.testing.assert_allclose(r.u, [1, 0, 0, 0], atol=1e-9)
    assert r.s_star == pytest.approx(1.0, abs=1e-9)
    assert r.endpoint_error <= 1e-10


def test_shoot_timelike_into_past():
    target = ChartPoint([-2 * math.tanh(0.5), 0, 0, 0], 1.0)
    r = shoot_geodesic(ORIGIN, target)
    assert r.kind is Connectability.TIMELIKE_GEODESIC
    np.testing.assert_allclose(r.u, [-1, 0, 0, 0], atol=1e-9)
    assert r.s_star == pytest.approx(1.0, abs=1e-9)


def test_shoot_null_ray():
    r = shoot_geodesic(ORIGIN, ChartPoint([1.0, 1.0, 0, 0], 1.0))
    assert r.kind is Connectability.NULL_GEODESIC
    assert r.gauge == "null"
    assert r.u[0] == 1.0  # affine normalization
    np.testing.assert_allclose(r.u, [1, 1, 0, 0], atol=1e-9)
    assert r.s_star == pytest.approx(1.0, abs=1e-9)


def test_shoot_spacelike_arc():
    r = shoot_geodesic(ORIGIN, ChartPoint([0.0, 0.5, 0, 0], 1.0))
    assert r.kind is Connectability.SPACELIKE_GEODESIC
    assert r.gauge == "spacelike"
    np.testing.assert_allclose(r.u, [0, 1, 0, 0], atol=1e-9)
    # arc length to x1 = 0.5 on the unit pseudo-sphere: 2 atan(1/4)
    assert r.s_star == pytest.approx(2 * math.atan(0.25), abs=1e-9)


def test_shoot_coincident_returns_zero():
    r = shoot_geodesic(ORIGIN, ORIGIN)
    assert r.kind is Connectability.COINCIDENT
    assert r.s_star == 0.0
    assert r.iterations == 0
    np.testing.assert_allclose(r.u, 0.0)


def test_shoot_unreachable_raises():
    far = unembed([1.0, 0, 0, 0, math.sqrt(2)], 1.0)
    with pytest.raises(NoConvergence):
        shoot_geodesic(ORIGIN, far)


def test_shoot_ell_mismatch():
    with pytest.raises(ValueError):
        shoot_geodesic(ORIGIN, ChartPoint([0.1, 0, 0, 0], 2.0))


# --------------------------------------------------------------------------
# solutions reintegrate to the target

def reintegrate_error(frm, r):
    cfg = IntegratorConfig(h=1e-3, s_span=(0.0, r.s_star))
    tr = integrate_geodesic(ChartState(frm, r.u), cfg)
    return tr


def test_shoot_generic_pair_reintegrates():
    frm = ChartPoint([0.2, -0.3, 0.1, 0.0], 1.0)
    to = ChartPoint([0.9, 0.4, -0.2, 0.3], 1.0)
    r = shoot_geodesic(frm, to)
    tr = reintegrate_error(frm, r)
    assert tr.status == "ok"
    assert np.max(np.abs(tr.x[-1] - to.x)) < 1e-9


def test_shoot_random_pairs_reintegrate(rng):
    # endpoint check runs in bulk coordinates: the chart ODE needs very
    # small steps when the path sweeps near the excluded cone, the bulk
    # one does not
    hits = 0
    for _ in range(10):
        Xa = random_pseudosphere_point(rng, tau_max=1.0)
        Xb = random_pseudosphere_point(rng, tau_max=1.0)
        kind = connectability(Xa, Xb, 1.0)
        if kind in (Connectability.NO_GEODESIC, Connectability.COINCIDENT):
            continue
        c = bulk_inner(Xa, Xb)
        if abs(c + 1.0) < 1e-3 or abs(c - 1.0) < 1e-3:
            continue  # numerically marginal boundary cases
        frm, to = unembed(Xa, 1.0), unembed(Xb, 1.0)
        r = shoot_geodesic(frm, to)
        assert r.kind is kind
        cfg = IntegratorConfig(h=1e-3, s_span=(0.0, r.s_star))
        tr = integrate_bulk(chart_to_bulk(ChartState(frm, r.u)), 1.0, cfg)
        assert tr.status == "ok"
        assert np.max(np.abs(tr.X[-1] - Xb)) < 1e-7 * max(
            1.0, float(np.max(np.abs(Xb))))
        hits += 1
    assert hits >= 5


def test_shoot_respects_endpoint_tol():
    r = shoot_geodesic(ORIGIN, ChartPoint([0.9, 0.4, -0.2, 0.3], 1.0),
                       endpoint_tol=1e-8)
    assert r.endpoint_error <= 1e-8


def test_shoot_impossible_tolerance_is_honest():
    # integration error floors the achievable endpoint error, so an
    # absurd tolerance must fail loudly instead of returning a bad fit
    cfg = IntegratorConfig(h=0.05, s_span=(0.0, 1.0))
    with pytest.raises(NoConvergence):
        shoot_geodesic(ORIGIN, ChartPoint([0.9, 0.4, -0.2, 0.3], 1.0),
                       cfg=cfg, endpoint_tol=1e-16)


def test_shoot_agrees_with_classifier_on_embedding():
    # the solver classifies through the same invariant c it solves with
    frm = ChartPoint([0.1, 0.2, 0.0, 0.0], 1.0)
    to = ChartPoint([1.1, -0.3, 0.2, 0.0], 1.0)
    kind = connectability(embed(frm), embed(to), 1.0)
    r = shoot_geodesic(frm, to)
    assert r.kind is kind
