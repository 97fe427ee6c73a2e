import numpy as np
import pytest

from desitter import (ChartPoint, ChartState, DegenerateFit, Forcing,
                      InsufficientSamples, IntegratorConfig, analytic_reference,
                      chart_to_bulk, conservation_report, convergence_order,
                      geodesic_residual, integrate_bulk, integrate_geodesic,
                      l_drift, mac_residual, mac_residual_max, maca_residual,
                      maca_residual_max, norm_drift, trajectory_agreement)
from conftest import chart_points_with_sigma

ORIGIN = ChartPoint([0.0, 0.0, 0.0, 0.0], 1.0)


def canonical_run(s1=1.0, h=1e-3):
    cfg = IntegratorConfig(method="rk4", h=h, s_span=(0.0, s1))
    return integrate_geodesic(ChartState(ORIGIN, [1.0, 0, 0, 0]), cfg)


def forced_run():
    # velocity rotated in the (1,2) plane: decidedly not a geodesic
    st = ChartState(ORIGIN, [np.sqrt(2.0), 1.0, 0, 0])
    cfg = IntegratorConfig(h=1e-3, s_span=(0.0, 1.2))
    return integrate_geodesic(st, cfg, forcing=Forcing(rate=2.0, plane=(1, 2)))


# --------------------------------------------------------------------------
# pointwise wedge residuals

def test_mac_vanishes_on_geodesic_acceleration(rng):
    for x in chart_points_with_sigma(rng, 30, lo=-5.0, hi=3.0):
        st = ChartState(ChartPoint(x, 1.0), rng.normal(size=4))
        m = mac_residual(st)
        assert m.shape == (4, 4)
        assert np.max(np.abs(m)) < 1e-12
        v = maca_residual(st)
        assert v.shape == (4,)
        assert np.max(np.abs(v)) < 1e-12


def test_mac_is_antisymmetric(rng):
    x = chart_points_with_sigma(rng, 1)[0]
    st = ChartState(ChartPoint(x, 1.0), rng.normal(size=4))
    m = mac_residual(st, accel=np.array([0.3, -0.1, 0.2, 0.0]))
    np.testing.assert_allclose(m, -m.T, atol=1e-15)


def test_mac_detects_non_geodesic_acceleration():
    st = ChartState(ChartPoint([0.5, 0.2, 0, 0], 1.0), [1.0, 0.3, 0, 0])
    # zero acceleration is not geodesic here since x.u != 0
    m = mac_residual(st, accel=np.zeros(4))
    v = maca_residual(st, accel=np.zeros(4))
    assert np.max(np.abs(m)) > 1e-3
    assert np.max(np.abs(v)) > 1e-3


def test_trajectory_wedge_maxima_small_on_geodesic():
    tr = canonical_run(s1=5.0)
    assert mac_residual_max(tr) < 1e-9
    assert maca_residual_max(tr) < 1e-9


# --------------------------------------------------------------------------
# negative control: forced motion must light up every diagnostic

def test_forced_run_fails_all_geodesic_diagnostics():
    base = conservation_report(canonical_run(s1=1.2))
    forced = conservation_report(forced_run())
    assert forced.mac_max > 1e6 * max(base.mac_max, 1e-300)
    assert forced.maca_max > 1e6 * max(base.maca_max, 1e-300)
    assert forced.geodesic_residual_max > 1e6 * base.geodesic_residual_max
    assert forced.l_drift_rel_max > 1e6 * max(base.l_drift_rel_max, 1e-300)
    assert forced.norm_drift > 1e6 * max(base.norm_drift, 1e-300)


# --------------------------------------------------------------------------
# finite-difference residual and its floor

def test_geodesic_residual_sits_on_fd_floor():
    tr = canonical_run()
    res = geodesic_residual(tr)
    floor = geodesic_residual(analytic_reference(tr))
    # the integrator error is invisible next to the second-order
    # differencing truncation, so the two agree to many digits
    assert res == pytest.approx(floor, rel=1e-3)


def test_fd_floor_scales_quadratically():
    tr1 = canonical_run(h=2e-3)
    tr2 = canonical_run(h=1e-3)
    f1 = geodesic_residual(analytic_reference(tr1))
    f2 = geodesic_residual(analytic_reference(tr2))
    assert f1 / f2 == pytest.approx(4.0, rel=0.05)


def test_geodesic_residual_needs_three_samples():
    cfg = IntegratorConfig(s_span=(0.0, 0.0))
    tr = integrate_geodesic(ChartState(ORIGIN, [1.0, 0, 0, 0]), cfg)
    with pytest.raises(InsufficientSamples):
        geodesic_residual(tr)


def test_geodesic_residual_skips_unmapped_bulk_samples():
    # this bulk run has one sample on the excluded cone (nan chart row)
    st = ChartState(ChartPoint([0.0, 1.0, 0, 0], 1.0), [1.0, 1.0, 0, 0])
    cfg = IntegratorConfig(h=1e-2, s_span=(0.0, 3.0))
    tr = integrate_bulk(chart_to_bulk(st), 1.0, cfg)
    assert np.any(~np.isfinite(tr.x))
    assert np.isfinite(geodesic_residual(tr))


# --------------------------------------------------------------------------
# drifts and agreement

def test_l_drift_shapes_and_normalization():
    tr = canonical_run()
    drift_abs, drift_rel = l_drift(tr)
    assert drift_abs.shape == (10,)
    assert drift_rel.shape == (10,)
    assert np.all(drift_rel <= drift_abs + 1e-300)
    assert np.max(drift_rel) < 1e-10


def test_norm_drift_canonical():
    assert norm_drift(canonical_run()) < 1e-12


def test_agreement_identical_is_zero():
    tr = canonical_run()
    assert trajectory_agreement(tr, tr) == 0.0


def test_agreement_rejects_mismatched_grids():
    a = canonical_run(h=1e-2)
    b = canonical_run(h=3e-3)
    with pytest.raises(ValueError):
        trajectory_agreement(a, b)


# --------------------------------------------------------------------------
# order fitting

def test_convergence_order_exact_powers():
    pts = [(h, 2.7 * h ** 4) for h in (0.1, 0.05, 0.025)]
    assert convergence_order(pts) == pytest.approx(4.0, abs=1e-12)


def test_convergence_order_guards():
    with pytest.raises(DegenerateFit):
        convergence_order([(0.1, 1e-3)])
    with pytest.raises(DegenerateFit):
        convergence_order([(0.1, 1e-3), (0.05, 0.0)])
    with pytest.raises(ValueError):
        convergence_order([(0.1, 1e-3), (-0.05, 1e-4)])


# --------------------------------------------------------------------------
# the assembled report

def test_conservation_report_fields():
    tr = canonical_run()
    rep = conservation_report(tr)
    assert rep.mode == "intrinsic"
    assert rep.status == "ok"
    assert rep.n_samples == tr.n
    assert rep.method == "rk4"
    assert rep.h == 1e-3
    assert len(rep.l_initial) == 10
    assert rep.l_drift_rel_max < 1e-10
    assert rep.geodesic_residual_max is not None
    assert rep.fd_floor is not None
    assert rep.geodesic_residual_max == pytest.approx(rep.fd_floor, rel=1e-3)
    d = rep.to_dict()
    assert d["mode"] == "intrinsic"
    assert isinstance(d["l_drift_rel"], list)


def test_conservation_report_explicit_floor_passthrough():
    tr = canonical_run()
    rep = conservation_report(tr, fd_floor=1.23)
    assert rep.fd_floor == 1.23


def test_conservation_report_single_sample():
    cfg = IntegratorConfig(s_span=(0.5, 0.5))
    tr = integrate_geodesic(ChartState(ORIGIN, [1.0, 0, 0, 0]), cfg)
    rep = conservation_report(tr)
    assert rep.geodesic_residual_max is None
    assert rep.fd_floor is None
    assert rep.n_samples == 1
