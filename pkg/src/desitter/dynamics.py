"""Geodesic flow in the chart and constrained dynamics in the bulk.

Two equivalent routes to the same curves:

* intrinsic: d2x/ds2 = -(Omega/ell^2)(x.u) u + (Omega/2 ell^2)(u.u) x
  in chart coordinates, where dots are flat 4d Lorentzian contractions;
* bulk: d2X/ds2 = lambda X with lambda = <V,V>/ell^2, the motion that
  keeps the ambient angular momentum X wedge V constant while staying
  on the pseudo-sphere.

Integrators: classic fixed-step RK4 and an embedded Dormand-Prince 5(4)
pair with per-step error control.  Intrinsic runs watch the chart-exit
quantity q = 1 - sigma^2/4 ell^2 (equal to 2 ell/(ell - X4)): q crossing
zero or collapsing below 1e-12 means the curve left the chart, and the
run stops with a partial trajectory flagged "singularity".
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .bulk import METRIC_SIGNS, angular_momentum, bulk_inner, pseudo_sphere_residual
from .chart import (ETA4, ON_BRANE_TOL, SINGULARITY_EPS, ChartPoint,
                    _embed, _omega, _sigma2, _unembed, _velocity_to_bulk,
                    _velocity_to_chart, conformal_factor, embed,
                    embed_differential, unembed)
from .errors import ConstraintViolated, NoConvergence, NorthPole, NotOnBrane

STATUS_OK = "ok"
STATUS_SINGULARITY = "singularity"
STATUS_MAX_STEPS = "max_steps"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class ChartState:
    """Position and velocity in chart coordinates."""

    point: ChartPoint
    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.shape != (4,):
            raise ValueError("chart velocity needs exactly 4 components")
        if not np.all(np.isfinite(u)):
            raise ValueError("chart velocity must be finite")
        object.__setattr__(self, "u", u)


@dataclass(frozen=True)
class BulkState:
    """Ambient position and velocity; kept on the pseudo-sphere by the
    dynamics, checked by the operations that receive it."""

    X: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        V = np.asarray(self.V, dtype=float)
        if X.shape != (5,) or V.shape != (5,):
            raise ValueError("bulk state needs 5+5 components")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(V))):
            raise ValueError("bulk state must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "V", V)


@dataclass(frozen=True)
class Forcing:
    """Non-geodesic test forcing: rotate the velocity at a fixed rate in
    one coordinate plane.  Preserves eta(u, u), breaks the geodesic law."""

    rate: float
    plane: tuple = (1, 2)

    def __post_init__(self):
        i, j = self.plane
        if not (0 <= i < 4 and 0 <= j < 4 and i != j):
            raise ValueError("plane must be two distinct indices in 0..3")

    def accel(self, x, u):
        i, j = self.plane
        a = np.zeros_like(u)
        a[..., i] = -self.rate * u[..., j]
        a[..., j] = self.rate * u[..., i]
        return a


@dataclass(frozen=True)
class IntegratorConfig:
    """Stepper selection and budgets.

    method   "rk4" (fixed step h) or "dp54" (embedded 5(4) pair meeting
             abs_tol/rel_tol per step; h seeds the first step).
    h        rk4 uses n = ceil(span/h) equal steps, so the grid lands on
             the far end exactly and halving h exactly doubles n.
    s_span   (s0, s1) with s1 >= s0; equal ends give a single sample.
    constraint_projection  bulk mode only: after each accepted step pull
             X back to <X,X> = -ell^2 and remove the V component along X.
    """

    method: str = "rk4"
    h: float = 1e-3
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    s_span: tuple = (0.0, 1.0)
    max_steps: int = 2_000_000
    constraint_projection: bool = False

    def __post_init__(self):
        if self.method not in ("rk4", "dp54"):
            raise ValueError("method must be 'rk4' or 'dp54'")
        if not self.h > 0:
            raise ValueError("h must be positive")
        if not (self.abs_tol > 0 and self.rel_tol >= 0):
            raise ValueError("tolerances must be positive")
        s0, s1 = self.s_span
        if not (math.isfinite(s0) and math.isfinite(s1) and s1 >= s0):
            raise ValueError("s_span must be finite with s1 >= s0")
        if not self.max_steps > 0:
            raise ValueError("max_steps must be positive")
        object.__setattr__(self, "s_span", (float(s0), float(s1)))


@dataclass
class Trajectory:
    """Sampled solution with both representations at every sample.

    Bulk-mode samples that sit on the excluded cone X4 = ell carry nan
    chart entries.  norm is g(u, u) for intrinsic runs and <V, V> for
    bulk runs; constraint_residual is <X, X> + ell^2.
    """

    s: np.ndarray
    x: np.ndarray
    u: np.ndarray
    X: np.ndarray
    V: np.ndarray
    L: np.ndarray
    norm: np.ndarray
    constraint_residual: np.ndarray
    ell: float
    mass: float
    mode: str
    status: str
    stop_reason: str = ""
    config: IntegratorConfig | None = None
    forcing: Forcing | None = None

    @property
    def n(self):
        return len(self.s)

    def chart_state(self, i):
        if not np.all(np.isfinite(self.x[i])):
            raise NorthPole("sample has no chart representation")
        return ChartState(ChartPoint(self.x[i], self.ell), self.u[i])

    def bulk_state(self, i):
        return BulkState(self.X[i], self.V[i])


# ---------------------------------------------------------------------------
# right-hand sides

def _chart_accel(x, u, ell, forcing=None):
    if forcing is not None:
        return forcing.accel(x, u)
    om = _omega(x, ell)
    xu = np.sum(ETA4 * x * u, axis=-1)
    uu = np.sum(ETA4 * u * u, axis=-1)
    c1 = -(om / (ell * ell)) * xu
    c2 = (om / (2.0 * ell * ell)) * uu
    return c1[..., None] * u + c2[..., None] * x


def _chart_ode(ell, forcing=None):
    def f(s, y):
        x = y[..., :4]
        u = y[..., 4:]
        return np.concatenate([u, _chart_accel(x, u, ell, forcing)], axis=-1)
    return f


def _bulk_ode(ell):
    def f(s, y):
        X = y[..., :5]
        V = y[..., 5:]
        lam = np.sum(METRIC_SIGNS * V * V, axis=-1) / (ell * ell)
        return np.concatenate([V, lam[..., None] * X], axis=-1)
    return f


def geodesic_rhs(state: ChartState) -> np.ndarray:
    """(dx/ds, d2x/ds2) of the intrinsic geodesic equation, shape (8,).

    The acceleration equals -Gamma^a_{mn} u^m u^n with the closed-form
    connection; raises ChartSingularity on the singular sphere.
    """
    conformal_factor(state.point)  # singularity guard
    ell = state.point.ell
    return np.concatenate([state.u, _chart_accel(state.point.x, state.u, ell)])


def bulk_constrained_rhs(state: BulkState, ell) -> np.ndarray:
    """(dX/ds, lambda X) with lambda = <V,V>/ell^2, shape (10,).

    Raises ConstraintViolated when the state is off the pseudo-sphere by
    more than 1e-6 ell^2 or off tangency by more than 1e-6 ell.
    """
    if not ell > 0:
        raise ValueError("ell must be positive")
    res = pseudo_sphere_residual(state.X, ell)
    if abs(res) > 1e-6 * ell * ell:
        raise ConstraintViolated(f"pseudo-sphere residual {res:.3e}")
    tang = bulk_inner(state.X, state.V)
    if abs(tang) > 1e-6 * ell:
        raise ConstraintViolated(f"tangency residual {tang:.3e}")
    lam = bulk_inner(state.V, state.V) / (ell * ell)
    return np.concatenate([state.V, lam * state.X])


# ---------------------------------------------------------------------------
# analytic solution of the bulk dynamics

def analytic_bulk_geodesic(init: BulkState, ell, s) -> BulkState:
    """Closed-form solution of d2X/ds2 = kappa X, kappa = <V0,V0>/ell^2.

    Hyperbolic for timelike kappa > 0, trigonometric for spacelike
    kappa < 0, linear for exactly null initial velocity.
    """
    X0, V0 = init.X, init.V
    kappa = bulk_inner(V0, V0) / (ell * ell)
    if kappa > 0:
        r = math.sqrt(kappa)
        X = X0 * math.cosh(r * s) + V0 * (math.sinh(r * s) / r)
        V = X0 * (r * math.sinh(r * s)) + V0 * math.cosh(r * s)
    elif kappa < 0:
        r = math.sqrt(-kappa)
        X = X0 * math.cos(r * s) + V0 * (math.sin(r * s) / r)
        V = -X0 * (r * math.sin(r * s)) + V0 * math.cos(r * s)
    else:
        X = X0 + V0 * s
        V = V0.copy()
    return BulkState(X, V)


# ---------------------------------------------------------------------------
# representation maps

def chart_to_bulk(state: ChartState) -> BulkState:
    """Push a chart state to the bulk; exact inverse of bulk_to_chart."""
    return BulkState(embed(state.point),
                     embed_differential(state.point, state.u))


def bulk_to_chart(state: BulkState, ell, tol=ON_BRANE_TOL) -> ChartState:
    """Pull a bulk state back to the chart.

    Raises NotOnBrane / NorthPole exactly as unembed does.
    """
    p = unembed(state.X, ell, tol)
    u = _velocity_to_chart(state.X, state.V, ell)
    return ChartState(p, u)


# ---------------------------------------------------------------------------
# steppers

def _rk4_step(f, s, y, h):
    k1 = f(s, y)
    k2 = f(s + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(s + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(s + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Dormand-Prince 5(4) tableau; first-same-as-last.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])
_DP_ERR = _DP_B5 - _DP_B4


def _dp54_step(f, s, y, h, k1=None):
    k = [k1 if k1 is not None else f(s, y)]
    for i in range(1, 7):
        yi = y + h * sum(a * kk for a, kk in zip(_DP_A[i], k))
        k.append(f(s + _DP_C[i] * h, yi))
    y5 = y + h * sum(b * kk for b, kk in zip(_DP_B5, k) if b != 0.0)
    err = h * sum(e * kk for e, kk in zip(_DP_ERR, k) if e != 0.0)
    return y5, err, k[6]


def _run_rk4(f, y0, s0, s1, h, max_steps, monitor=None, project=None):
    samples = [(s0, y0)]
    span = s1 - s0
    if span == 0.0:
        return samples, STATUS_OK, ""
    n = max(1, int(math.ceil(span / h - 1e-12)))
    heff = span / n
    y = y0
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, n + 1):
            if i > max_steps:
                return samples, STATUS_MAX_STEPS, f"budget {max_steps} exhausted"
            s_prev = s0 + (i - 1) * heff
            y_new = _rk4_step(f, s_prev, y, heff)
            if monitor is not None:
                verdict = monitor(y_new)
                if verdict is not None:
                    return samples, verdict[0], verdict[1]
            if project is not None:
                y_new = project(y_new)
            samples.append((s1 if i == n else s0 + i * heff, y_new))
            y = y_new
    return samples, STATUS_OK, ""


def _run_dp54(f, y0, s0, s1, atol, rtol, h0, max_steps,
              monitor=None, project=None, s_eval=None):
    samples = [(s0, y0)]
    span = s1 - s0
    if span == 0.0:
        return samples, STATUS_OK, ""
    targets = None
    ti = 0
    if s_eval is not None:
        targets = [t for t in np.sort(np.asarray(s_eval, dtype=float))
                   if s0 < t <= s1]
        if not targets or targets[-1] < s1:
            targets = (targets or []) + [s1]
    s, y = s0, y0
    h = min(h0, span)
    k1 = None
    attempts = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while s < s1 - 1e-14 * max(1.0, abs(s1)):
            if attempts >= max_steps:
                return samples, STATUS_MAX_STEPS, f"budget {max_steps} exhausted"
            limit = targets[ti] if targets is not None else s1
            h_try = min(h, limit - s)
            y_new, err, k_last = _dp54_step(f, s, y, h_try, k1)
            attempts += 1
            if not np.all(np.isfinite(y_new)):
                return samples, STATUS_FAILED, "non-finite step"
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            errnorm = math.sqrt(float(np.mean((err / scale) ** 2)))
            if errnorm <= 1.0:
                if monitor is not None:
                    verdict = monitor(y_new)
                    if verdict is not None:
                        return samples, verdict[0], verdict[1]
                if project is not None:
                    y_new = project(y_new)
                    k1 = None
                else:
                    k1 = k_last
                s = s + h_try
                y = y_new
                samples.append((s, y))
                if targets is not None and s >= targets[ti] - 1e-14:
                    ti = min(ti + 1, len(targets) - 1)
            else:
                k1 = None if project is not None else k1
            factor = 0.9 * errnorm ** -0.2 if errnorm > 0 else 5.0
            h = h_try * min(5.0, max(0.2, factor))
            if h < 1e-14 * span:
                return samples, STATUS_FAILED, "step size underflow"
    return samples, STATUS_OK, ""


def _bulk_projection(ell):
    def project(y):
        X = y[:5]
        V = y[5:]
        X = X * (ell / math.sqrt(-bulk_inner(X, X)))
        V = V + (bulk_inner(X, V) / (ell * ell)) * X
        return np.concatenate([X, V])
    return project


# |x| beyond this many ell is within ~1/COORD_LIMIT of a chart boundary
COORD_LIMIT = 1e6
# relative jump of the conserved velocity norm that flags a crossing
NORM_JUMP_TOL = 0.1


def _chart_monitor(ell, q0, norm0=None):
    """Stop conditions for intrinsic runs.  The chart boundary shows up
    three ways: q = 1 - sigma^2/4 ell^2 collapsing or changing sign,
    coordinates running away (null-direction exits keep sigma^2 bounded,
    so q alone misses them), and, for geodesics, the conserved norm
    g(u, u) jumping when a step lands across the singular set."""
    state = {"q": q0}

    def monitor(y_new):
        if not np.all(np.isfinite(y_new)):
            # coordinates blew up in finite s: the chart ended, not the flow
            return STATUS_SINGULARITY, "non-finite chart coordinates"
        x = y_new[:4]
        if float(np.max(np.abs(x))) > COORD_LIMIT * ell:
            return STATUS_SINGULARITY, "chart coordinates diverged"
        q = 1.0 - float(_sigma2(x)) / (4.0 * ell * ell)
        if abs(q) < SINGULARITY_EPS:
            return STATUS_SINGULARITY, "conformal factor diverged"
        if q * state["q"] < 0:
            return STATUS_SINGULARITY, "crossed the singular sphere"
        if norm0 is not None:
            u = y_new[4:]
            norm = float(np.sum(ETA4 * u * u)) / (q * q)
            if abs(norm - norm0) > NORM_JUMP_TOL * max(1.0, abs(norm0)):
                return STATUS_SINGULARITY, "conserved velocity norm jumped"
        state["q"] = q
        return None
    return monitor


def _bulk_monitor(ell):
    def monitor(y_new):
        if not np.all(np.isfinite(y_new)):
            return STATUS_FAILED, "non-finite bulk state"
        res = float(np.sum(METRIC_SIGNS * y_new[:5] * y_new[:5])) + ell * ell
        if abs(res) > 1e-3 * ell * ell:
            return STATUS_FAILED, f"constraint residual {res:.3e}"
        return None
    return monitor


# ---------------------------------------------------------------------------
# trajectory assembly

def trajectory_from_chart_samples(s, x, u, ell, mass=1.0, status=STATUS_OK,
                                  stop_reason="", config=None, forcing=None):
    """Build a full Trajectory from chart samples (used for analytic
    references and synthetic curves as well as by integrate)."""
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    om = _omega(x, ell)
    X = _embed(x, om, ell)
    V = _velocity_to_bulk(x, u, om, ell)
    norm = om * om * np.sum(ETA4 * u * u, axis=-1)
    constraint = np.sum(METRIC_SIGNS * X * X, axis=-1) + ell * ell
    L = angular_momentum(X, V, mass)
    return Trajectory(s=s, x=x, u=u, X=X, V=V, L=L, norm=norm,
                      constraint_residual=constraint, ell=ell, mass=mass,
                      mode="intrinsic", status=status, stop_reason=stop_reason,
                      config=config, forcing=forcing)


def trajectory_from_bulk_samples(s, X, V, ell, mass=1.0, status=STATUS_OK,
                                 stop_reason="", config=None):
    s = np.asarray(s, dtype=float)
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    x = _unembed(X, ell)
    u = _velocity_to_chart(X, V, ell)
    norm = np.sum(METRIC_SIGNS * V * V, axis=-1)
    constraint = np.sum(METRIC_SIGNS * X * X, axis=-1) + ell * ell
    L = angular_momentum(X, V, mass)
    return Trajectory(s=s, x=x, u=u, X=X, V=V, L=L, norm=norm,
                      constraint_residual=constraint, ell=ell, mass=mass,
                      mode="bulk", status=status, stop_reason=stop_reason,
                      config=config)


def integrate_geodesic(state: ChartState, cfg: IntegratorConfig,
                       mass=1.0, forcing=None, s_eval=None) -> Trajectory:
    """Integrate the intrinsic equation (or a forced variant) from state."""
    ell = state.point.ell
    q0 = 1.0 / conformal_factor(state.point)  # raises on singular start
    f = _chart_ode(ell, forcing)
    y0 = np.concatenate([state.point.x, state.u])
    norm0 = None
    if forcing is None:
        # g(u, u) is a constant of geodesic motion; forced runs vary it
        norm0 = float(np.sum(ETA4 * state.u * state.u)) / (q0 * q0)
    monitor = _chart_monitor(ell, q0, norm0)
    s0, s1 = cfg.s_span
    if cfg.method == "rk4":
        samples, status, reason = _run_rk4(f, y0, s0, s1, cfg.h,
                                           cfg.max_steps, monitor)
    else:
        samples, status, reason = _run_dp54(f, y0, s0, s1, cfg.abs_tol,
                                            cfg.rel_tol, cfg.h, cfg.max_steps,
                                            monitor, s_eval=s_eval)
    ss = np.array([p[0] for p in samples])
    ys = np.array([p[1] for p in samples])
    return trajectory_from_chart_samples(ss, ys[:, :4], ys[:, 4:], ell,
                                         mass=mass, status=status,
                                         stop_reason=reason, config=cfg,
                                         forcing=forcing)


def integrate_bulk(state: BulkState, ell, cfg: IntegratorConfig,
                   mass=1.0, s_eval=None) -> Trajectory:
    """Integrate the constrained bulk dynamics from state."""
    bulk_constrained_rhs(state, ell)  # initial constraint check
    f = _bulk_ode(ell)
    y0 = np.concatenate([state.X, state.V])
    monitor = _bulk_monitor(ell)
    project = _bulk_projection(ell) if cfg.constraint_projection else None
    s0, s1 = cfg.s_span
    if cfg.method == "rk4":
        samples, status, reason = _run_rk4(f, y0, s0, s1, cfg.h,
                                           cfg.max_steps, monitor, project)
    else:
        samples, status, reason = _run_dp54(f, y0, s0, s1, cfg.abs_tol,
                                            cfg.rel_tol, cfg.h, cfg.max_steps,
                                            monitor, project, s_eval=s_eval)
    ss = np.array([p[0] for p in samples])
    ys = np.array([p[1] for p in samples])
    return trajectory_from_bulk_samples(ss, ys[:, :5], ys[:, 5:], ell,
                                        mass=mass, status=status,
                                        stop_reason=reason, config=cfg)


def integrate(rhs, init, cfg: IntegratorConfig, ell=None, mass=1.0) -> Trajectory:
    """Dispatch on the dynamical law: rhs must be geodesic_rhs (with a
    ChartState) or bulk_constrained_rhs (with a BulkState and ell)."""
    if rhs is geodesic_rhs:
        if not isinstance(init, ChartState):
            raise TypeError("geodesic_rhs integrates a ChartState")
        return integrate_geodesic(init, cfg, mass=mass)
    if rhs is bulk_constrained_rhs:
        if not isinstance(init, BulkState):
            raise TypeError("bulk_constrained_rhs integrates a BulkState")
        if ell is None:
            raise ValueError("bulk integration needs ell")
        return integrate_bulk(init, ell, cfg, mass=mass)
    raise TypeError("rhs must be geodesic_rhs or bulk_constrained_rhs")


# ---------------------------------------------------------------------------
# connectability and shooting

class Connectability(enum.Enum):
    TIMELIKE_GEODESIC = "timelike"
    NULL_GEODESIC = "null"
    SPACELIKE_GEODESIC = "spacelike"
    NO_GEODESIC = "none"
    COINCIDENT = "coincident"


def connectability(Xa, Xb, ell, boundary_tol=1e-9,
                   on_brane_tol=ON_BRANE_TOL) -> Connectability:
    """Classify the geodesic relation of two pseudo-sphere points by
    c = <Xa, Xb>: c < -ell^2 timelike, c = -ell^2 null, up to +ell^2
    spacelike, beyond that unreachable.  boundary_tol (times ell^2)
    sets the width of the null band and the spacelike edge."""
    Xa = np.asarray(Xa, dtype=float)
    Xb = np.asarray(Xb, dtype=float)
    for X in (Xa, Xb):
        res = pseudo_sphere_residual(X, ell)
        if abs(res) > on_brane_tol * ell * ell:
            raise NotOnBrane(f"pseudo-sphere residual {res:.3e}")
    if np.max(np.abs(Xa - Xb)) <= boundary_tol * ell:
        return Connectability.COINCIDENT
    c = bulk_inner(Xa, Xb)
    ell2 = ell * ell
    tol = boundary_tol * ell2
    if c < -ell2 - tol:
        return Connectability.TIMELIKE_GEODESIC
    if c <= -ell2 + tol:
        return Connectability.NULL_GEODESIC
    if c <= ell2 + tol:
        return Connectability.SPACELIKE_GEODESIC
    return Connectability.NO_GEODESIC


@dataclass(frozen=True)
class ShootingResult:
    u: np.ndarray
    s_star: float
    kind: Connectability
    endpoint_error: float
    iterations: int
    gauge: str


def _propagate_bulk(Y0, s_star, h_target, ell):
    """March one or many bulk states (rows of Y0) to parameter s_star.

    Every step re-projects onto the pseudo-sphere and its tangent bundle:
    without this the endpoint residual keeps an irreducible radial
    component (the constraint drift of the raw integrator), which puts a
    floor under the Newton solve that no choice of (u, s*) can beat.

    The step count is capped: huge spans only arise in the null gauge,
    where the affine span scales with the chart u0 of the source and the
    bulk ODE is linear (RK4 integrates it exactly at any step size).
    """
    if s_star == 0.0:
        return Y0.copy()
    n = max(1, min(int(math.ceil(abs(s_star) / h_target)), 20_000))
    h = s_star / n
    f = _bulk_ode(ell)
    y = Y0
    # bad trial guesses overflow legitimately; callers test for finiteness
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for i in range(n):
            y = _rk4_step(f, i * h, y, h)
            X = y[..., :5]
            V = y[..., 5:]
            r2 = -np.sum(METRIC_SIGNS * X * X, axis=-1, keepdims=True)
            X = X * (ell / np.sqrt(r2))
            xv = np.sum(METRIC_SIGNS * X * V, axis=-1, keepdims=True)
            V = V + (xv / (ell * ell)) * X
            y = np.concatenate([X, V], axis=-1)
            if not np.any(np.isfinite(y)):
                break
    return y


_GAUGE_TARGET = {"timelike": 1.0, "spacelike": -1.0}


def _shoot_residual(frm, to, Xb, u, s_star, gauge, ell, h):
    """Endpoint mismatch in bulk coordinates plus the gauge condition.

    The chart-side mismatch is the pullback of this one, but with an
    unbounded amplification factor near the excluded cone; measuring in
    the bulk keeps the stopping test well conditioned for every target.
    """
    om0 = conformal_factor(frm)
    X0 = _embed(frm.x, om0, ell)
    V0 = _velocity_to_bulk(frm.x, u, om0, ell)
    y_end = _propagate_bulk(np.concatenate([X0, V0]), s_star, h, ell)
    if not np.all(np.isfinite(y_end)):
        return None
    F = np.empty(6)
    F[:5] = y_end[:5] - Xb
    if gauge == "null":
        F[5] = u[0] - 1.0
    else:
        F[5] = om0 * om0 * float(np.sum(ETA4 * u * u)) - _GAUGE_TARGET[gauge]
    return F, y_end


def _shoot_jacobian(frm, to, Xb, u, s_star, gauge, ell, h, F0, y_end0):
    """Forward-difference Jacobian in u (batched) and analytic in s*.

    6 equations, 5 unknowns; both endpoints sit on the pseudo-sphere so
    the radial direction carries no information and the system is solved
    by least squares.
    """
    om0 = conformal_factor(frm)
    X0 = _embed(frm.x, om0, ell)
    deltas = 1e-7 * np.maximum(1.0, np.abs(u))
    U = np.tile(u, (4, 1)) + np.diag(deltas)
    V0 = _velocity_to_bulk(np.tile(frm.x, (4, 1)), U, om0, ell)
    Y0 = np.concatenate([np.tile(X0, (4, 1)), V0], axis=1)
    Y_end = _propagate_bulk(Y0, s_star, h, ell)
    if not np.all(np.isfinite(Y_end)):
        return None
    J = np.zeros((6, 5))
    for i in range(4):
        J[:5, i] = (Y_end[i, :5] - Xb - F0[:5]) / deltas[i]
    J[:5, 4] = y_end0[5:]
    if gauge == "null":
        J[5, 0] = 1.0
    else:
        J[5, :4] = 2.0 * om0 * om0 * ETA4 * u
    return J


def _newton_shoot(frm, to, u0, s0, gauge, ell, h, endpoint_tol, max_iter,
                  s_bounds):
    u = np.array(u0, dtype=float)
    s_star = float(s0)
    Xb = embed(to)
    scale = max(ell, float(np.max(np.abs(Xb))))

    def converged(F):
        return np.max(np.abs(F[:5])) < endpoint_tol * scale and abs(F[5]) < 1e-9

    out = _shoot_residual(frm, to, Xb, u, s_star, gauge, ell, h)
    if out is None:
        return None
    F, y_end = out
    for it in range(1, max_iter + 1):
        if converged(F):
            return u, s_star, float(np.max(np.abs(F[:5]))), it - 1
        J = _shoot_jacobian(frm, to, Xb, u, s_star, gauge, ell, h, F, y_end)
        if J is None:
            return None
        dz = np.linalg.lstsq(J, -F, rcond=None)[0]
        if not np.all(np.isfinite(dz)):
            return None
        accepted = False
        lam = 1.0
        fnorm = float(np.linalg.norm(F))
        for _ in range(8):
            u_try = u + lam * dz[:4]
            s_try = s_star + lam * dz[4]
            lo, hi = s_bounds
            s_try = min(max(s_try, lo), hi)
            out = _shoot_residual(frm, to, Xb, u_try, s_try, gauge, ell, h)
            # demand real contraction; a stall at the noise floor of the
            # discrete map is a failure, not slow progress
            if out is not None and float(np.linalg.norm(out[0])) < 0.9 * fnorm:
                u, s_star = u_try, s_try
                F, y_end = out
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            return None
    if converged(F):
        return u, s_star, float(np.max(np.abs(F[:5]))), max_iter
    return None


def _tangent_project(v, Xa, ell):
    return v + (bulk_inner(v, Xa) / (ell * ell)) * Xa


def _fallback_guesses(Xa, Xb, c, ell):
    """Initial velocities spanning all causal classes, for pairs where no
    analytic guess exists (or as a net under the analytic one)."""
    guesses = []
    W = _tangent_project(Xb, Xa, ell)
    nw = bulk_inner(W, W)
    if abs(nw) > 1e-12 * ell * ell:
        What = W / math.sqrt(abs(nw))
        if nw > 0:
            guesses += [(What, ell, "timelike"), (-What, ell, "timelike")]
        else:
            guesses += [(What, 0.5 * math.pi * ell, "spacelike"),
                        (-What, 0.5 * math.pi * ell, "spacelike")]
    basis = []
    for k in range(5):
        e = np.zeros(5)
        e[k] = 1.0
        t = _tangent_project(e, Xa, ell)
        for b in basis:
            nb = bulk_inner(b, b)
            if abs(nb) > 1e-9:
                t = t - (bulk_inner(t, b) / nb) * b
        nt = bulk_inner(t, t)
        if abs(nt) > 1e-9:
            basis.append(t / math.sqrt(abs(nt)))
        if len(basis) == 3:
            break
    for b in basis[:2]:
        if bulk_inner(b, b) > 0:
            guesses.append((b, ell, "timelike"))
        else:
            guesses.append((b, 0.5 * math.pi * ell, "spacelike"))
    tl = [g for g in guesses if g[2] == "timelike"]
    sl = [g for g in guesses if g[2] == "spacelike"]
    if tl and sl:
        null_dir = tl[0][0] + sl[0][0]
        guesses.append((null_dir, ell, "null"))
    return guesses[:6]


def shoot_geodesic(frm: ChartPoint, to: ChartPoint, cfg=None,
                   endpoint_tol=1e-10, max_iter=30) -> ShootingResult:
    """Two-point boundary solve: find (u, s*) with x(s*; frm, u) = to.

    Newton iteration on the integrated endpoint, seeded by the closed
    form of the bulk dynamics.  Scale freedom is fixed by g(u, u) = +1
    (timelike), -1 (spacelike), or u0 = 1 (null, s* sign free).  The
    endpoint mismatch is measured in embedding coordinates, where it is
    well conditioned for every target; endpoint_tol is relative to
    max(ell, largest embedding coordinate of the target).  Raises
    NoConvergence when every guess fails; a from == to pair returns the
    zero solution.
    """
    if frm.ell != to.ell:
        raise ValueError("endpoints must share the same ell")
    ell = frm.ell
    h = (cfg.h if cfg is not None else 5e-3 * ell)
    Xa = embed(frm)
    Xb = embed(to)
    kind = connectability(Xa, Xb, ell)
    if kind is Connectability.COINCIDENT:
        return ShootingResult(u=np.zeros(4), s_star=0.0, kind=kind,
                              endpoint_error=0.0, iterations=0, gauge="none")
    c = bulk_inner(Xa, Xb)
    ell2 = ell * ell

    trials = []
    if kind is Connectability.TIMELIKE_GEODESIC:
        theta = math.acosh(-c / ell2)
        V = (Xb - Xa * math.cosh(theta)) / (ell * math.sinh(theta))
        trials.append((V, ell * theta, "timelike",
                       (1e-8 * ell, ell * (theta + 5.0)), max_iter))
    elif kind is Connectability.SPACELIKE_GEODESIC:
        theta = math.acos(min(1.0, max(-1.0, -c / ell2)))
        if math.sin(theta) > 1e-9:
            V = (Xb - Xa * math.cos(theta)) / (ell * math.sin(theta))
            trials.append((V, ell * theta, "spacelike",
                           (1e-8 * ell, 1.5 * math.pi * ell), max_iter))
    elif kind is Connectability.NULL_GEODESIC:
        V = Xb - Xa
        trials.append((V, 1.0, "null", (-100.0 * ell, 100.0 * ell), max_iter))
    if kind is Connectability.NO_GEODESIC or not trials:
        for V, s0, gauge in _fallback_guesses(Xa, Xb, c, ell):
            bounds = ((-16.0 * ell, 16.0 * ell) if gauge == "null"
                      else (1e-8 * ell, 8.0 * ell))
            trials.append((V, s0, gauge, bounds, 8))

    for V, s0, gauge, bounds, iters in trials:
        u0 = _velocity_to_chart(Xa, V, ell)
        if not np.all(np.isfinite(u0)):
            continue
        s_guess = s0
        if gauge == "null":
            # affine rescale so u0[0] = 1; the span scales inversely
            alpha = u0[0]
            if abs(alpha) < 1e-12:
                continue
            u0 = u0 / alpha
            s_guess = s0 * alpha
        if iters < max_iter:
            # fallback guesses are rough; keep their spans inside bounds
            s_guess = min(max(s_guess, bounds[0]), bounds[1])
        trial_h = h if iters == max_iter else 4.0 * h
        sol = _newton_shoot(frm, to, u0, s_guess, gauge, ell, trial_h,
                            endpoint_tol, iters, bounds)
        if sol is not None:
            u, s_star, err, its = sol
            kind_out = {"timelike": Connectability.TIMELIKE_GEODESIC,
                        "spacelike": Connectability.SPACELIKE_GEODESIC,
                        "null": Connectability.NULL_GEODESIC}[gauge]
            return ShootingResult(u=u, s_star=s_star, kind=kind_out,
                                  endpoint_error=err, iterations=its,
                                  gauge=gauge)
    raise NoConvergence(
        f"no geodesic found after {len(trials)} initial guesses")
