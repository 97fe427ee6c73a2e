"""Conservation and consistency diagnostics for integrated trajectories.

The residual identities come in two families.  The wedge identities
(mac, maca) restate constancy of the ambient angular momentum in chart
variables; substituting the geodesic acceleration makes them vanish
identically, so evaluated with a curve's actual acceleration they
separate geodesics from forced motion at machine precision.  The
geodesic-equation residual instead estimates the acceleration from the
samples by finite differences, which gives it an O(step^2) floor that
callers calibrate on the analytic solution.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .chart import ETA4, _omega
from .dynamics import (ChartState, Trajectory, _chart_accel,
                       analytic_bulk_geodesic, trajectory_from_bulk_samples)
from .errors import DegenerateFit, InsufficientSamples


# ---------------------------------------------------------------------------
# wedge identities

def _mac_matrix(x, u, a, ell):
    om = _omega(x, ell)
    xu = np.sum(ETA4 * x * u, axis=-1)
    A = (om * om / (ell * ell) * xu)[..., None] * u + om[..., None] * a
    return (x[..., :, None] * A[..., None, :]
            - A[..., :, None] * x[..., None, :])


def _maca_vector(x, u, a, ell):
    om = _omega(x, ell)
    ell2 = ell * ell
    xu = np.sum(ETA4 * x * u, axis=-1)
    uu = np.sum(ETA4 * u * u, axis=-1)
    xa = np.sum(ETA4 * x * a, axis=-1)
    bracket = (om / ell2) * xu * xu + uu + xa
    lead = -(2.0 * om - 1.0)
    return (lead[..., None] * (a + (om / ell2 * xu)[..., None] * u)
            + (om / (2.0 * ell2) * bracket)[..., None] * x)


def mac_residual(state: ChartState, accel=None) -> np.ndarray:
    """Antisymmetric 4x4 wedge residual x^k A^l - A^k x^l with
    A = (Omega^2/ell^2)(x.u) u + Omega a.

    accel defaults to the geodesic acceleration, for which the matrix
    vanishes identically; pass the actual acceleration of a non-geodesic
    curve to measure its failure to conserve angular momentum.
    """
    x = state.point.x
    ell = state.point.ell
    a = np.asarray(accel, dtype=float) if accel is not None \
        else _chart_accel(x, state.u, ell)
    return _mac_matrix(x, state.u, a, ell)


def maca_residual(state: ChartState, accel=None) -> np.ndarray:
    """4-vector wedge residual of the mixed (mu, 4) angular momentum
    components; same acceleration convention as mac_residual."""
    x = state.point.x
    ell = state.point.ell
    a = np.asarray(accel, dtype=float) if accel is not None \
        else _chart_accel(x, state.u, ell)
    return _maca_vector(x, state.u, a, ell)


def _trajectory_accel(traj: Trajectory, x, u):
    if traj.forcing is not None:
        return traj.forcing.accel(x, u)
    return _chart_accel(x, u, traj.ell)


def mac_residual_max(traj: Trajectory) -> float:
    """Largest |mac entry| along a trajectory, using its own law of
    motion for the acceleration."""
    ok = np.all(np.isfinite(traj.x), axis=1) & np.all(np.isfinite(traj.u), axis=1)
    x, u = traj.x[ok], traj.u[ok]
    a = _trajectory_accel(traj, x, u)
    return float(np.max(np.abs(_mac_matrix(x, u, a, traj.ell))))


def maca_residual_max(traj: Trajectory) -> float:
    ok = np.all(np.isfinite(traj.x), axis=1) & np.all(np.isfinite(traj.u), axis=1)
    x, u = traj.x[ok], traj.u[ok]
    a = _trajectory_accel(traj, x, u)
    return float(np.max(np.abs(_maca_vector(x, u, a, traj.ell))))


# ---------------------------------------------------------------------------
# finite-difference geodesic residual

def geodesic_residual(traj: Trajectory) -> float:
    """Max norm of d2x/ds2 + (Omega/ell^2)(x.u) u - (Omega/2 ell^2)(u.u) x
    along the trajectory, with the second derivative estimated by
    three-point differences of the sampled velocities (second order on
    uniform and nonuniform grids alike).

    Raises InsufficientSamples below 3 usable samples.
    """
    ok = np.all(np.isfinite(traj.x), axis=1) & np.all(np.isfinite(traj.u), axis=1)
    idx = np.flatnonzero(ok)
    # keep the longest run of consecutive usable samples
    if len(idx) >= 3:
        breaks = np.flatnonzero(np.diff(idx) != 1)
        runs = np.split(idx, breaks + 1)
        idx = max(runs, key=len)
    if len(idx) < 3:
        raise InsufficientSamples("need at least 3 chart samples")
    s = traj.s[idx]
    x = traj.x[idx]
    u = traj.u[idx]
    h1 = (s[1:-1] - s[:-2])[:, None]
    h2 = (s[2:] - s[1:-1])[:, None]
    a_fd = (-h2 / (h1 * (h1 + h2)) * u[:-2]
            + (h2 - h1) / (h1 * h2) * u[1:-1]
            + h1 / (h2 * (h1 + h2)) * u[2:])
    a_geo = _chart_accel(x[1:-1], u[1:-1], traj.ell)
    return float(np.max(np.abs(a_fd - a_geo)))


def analytic_reference(traj: Trajectory) -> Trajectory:
    """Closed-form solution from the same initial state on the same
    parameter grid; its geodesic_residual is the pure finite-difference
    floor for that grid."""
    init = traj.bulk_state(0)
    states = [analytic_bulk_geodesic(init, traj.ell, float(si) - float(traj.s[0]))
              for si in traj.s]
    X = np.array([st.X for st in states])
    V = np.array([st.V for st in states])
    return trajectory_from_bulk_samples(traj.s.copy(), X, V, traj.ell,
                                        mass=traj.mass)


# ---------------------------------------------------------------------------
# drifts, agreement, convergence

def l_drift(traj: Trajectory):
    """Per-component drift of the ten conserved charges.

    Returns (absolute, relative) arrays of shape (10,); the relative
    drift is normalized by max(1, |L(0)|) componentwise.
    """
    L0 = traj.L[0]
    drift = np.max(np.abs(traj.L - L0), axis=0)
    return drift, drift / np.maximum(1.0, np.abs(L0))


def norm_drift(traj: Trajectory) -> float:
    good = np.isfinite(traj.norm)
    return float(np.max(np.abs(traj.norm[good] - traj.norm[0])))


def trajectory_agreement(a: Trajectory, b: Trajectory) -> float:
    """Max pointwise chart-coordinate difference on a shared grid."""
    n = min(a.n, b.n)
    if n == 0 or np.max(np.abs(a.s[:n] - b.s[:n])) > 1e-9:
        raise ValueError("trajectories do not share a parameter grid")
    ok = (np.all(np.isfinite(a.x[:n]), axis=1)
          & np.all(np.isfinite(b.x[:n]), axis=1))
    if not np.any(ok):
        raise ValueError("no comparable samples")
    return float(np.max(np.abs(a.x[:n][ok] - b.x[:n][ok])))


def convergence_order(points) -> float:
    """Least-squares slope of log(err) against log(h).

    points: iterable of (h, err) pairs.  Raises DegenerateFit for fewer
    than two points or any non-positive error.
    """
    pts = [(float(h), float(e)) for h, e in points]
    if len(pts) < 2:
        raise DegenerateFit("need at least two (h, err) points")
    if any(h <= 0 for h, _ in pts):
        raise ValueError("step sizes must be positive")
    if any(e <= 0 for _, e in pts):
        raise DegenerateFit("zero or negative error in fit")
    logs_h = np.log([h for h, _ in pts])
    logs_e = np.log([e for _, e in pts])
    slope = np.polyfit(logs_h, logs_e, 1)[0]
    return float(slope)


# ---------------------------------------------------------------------------
# report

@dataclass
class ConservationReport:
    """Everything cmd_verify needs to apply thresholds."""

    mode: str
    status: str
    stop_reason: str
    n_samples: int
    s_span: tuple
    method: str
    h: float
    abs_tol: float
    rel_tol: float
    constraint_projection: bool
    l_initial: list
    l_drift_abs: list
    l_drift_rel: list
    l_drift_rel_max: float
    norm_drift: float
    constraint_max: float
    mac_max: float
    maca_max: float
    geodesic_residual_max: float | None
    fd_floor: float | None

    def to_dict(self):
        return asdict(self)


def conservation_report(traj: Trajectory, fd_floor=None) -> ConservationReport:
    """Measure every diagnostic on one trajectory.

    fd_floor: pass the analytic-reference geodesic_residual for the same
    grid (see analytic_reference); computed here when omitted and the
    trajectory is a plain geodesic run.
    """
    drift_abs, drift_rel = l_drift(traj)
    try:
        geo = geodesic_residual(traj)
    except InsufficientSamples:
        geo = None
    if fd_floor is None and traj.n >= 3:
        try:
            fd_floor = geodesic_residual(analytic_reference(traj))
        except InsufficientSamples:
            fd_floor = None
    cfg = traj.config
    return ConservationReport(
        mode=traj.mode,
        status=traj.status,
        stop_reason=traj.stop_reason,
        n_samples=traj.n,
        s_span=tuple(cfg.s_span) if cfg is not None else (float(traj.s[0]), float(traj.s[-1])),
        method=cfg.method if cfg is not None else "samples",
        h=cfg.h if cfg is not None else float("nan"),
        abs_tol=cfg.abs_tol if cfg is not None else float("nan"),
        rel_tol=cfg.rel_tol if cfg is not None else float("nan"),
        constraint_projection=bool(cfg.constraint_projection) if cfg is not None else False,
        l_initial=[float(v) for v in traj.L[0]],
        l_drift_abs=[float(v) for v in drift_abs],
        l_drift_rel=[float(v) for v in drift_rel],
        l_drift_rel_max=float(np.max(drift_rel)),
        norm_drift=norm_drift(traj),
        constraint_max=float(np.max(np.abs(traj.constraint_residual))),
        mac_max=mac_residual_max(traj),
        maca_max=maca_residual_max(traj),
        geodesic_residual_max=geo,
        fd_floor=fd_floor,
    )
