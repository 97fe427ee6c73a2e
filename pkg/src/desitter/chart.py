"""Conformal chart of the pseudo-sphere.

Coordinates x = (x0, x1, x2, x3) cover the pseudo-sphere of radius ell
minus the cone X4 = ell.  The flat Lorentzian square sigma^2 = eta(x, x)
controls the conformal factor Omega = 1 / (1 - sigma^2 / 4 ell^2), which
diverges on the coordinate sphere sigma^2 = 4 ell^2; the pullback metric
is Omega^2 diag(1, -1, -1, -1).  The radius travels with every point, so
nothing here is global state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bulk import bulk_inner
from .errors import ChartSingularity, NorthPole, NotOnBrane

ETA4 = np.array([1.0, -1.0, -1.0, -1.0])

# |1 - sigma^2/4ell^2| below this counts as sitting on the singular sphere
SINGULARITY_EPS = 1e-12

# |ell - X4| below this (relative to ell) counts as the excluded cone
NORTH_POLE_EPS = 1e-12

# default |<X,X> + ell^2| tolerance, relative to ell^2, for unembedding
ON_BRANE_TOL = 1e-9


@dataclass(frozen=True)
class ChartPoint:
    """Chart coordinates plus the pseudo-sphere radius they refer to."""

    x: np.ndarray
    ell: float = 1.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.shape != (4,):
            raise ValueError("chart point needs exactly 4 coordinates")
        if not np.all(np.isfinite(x)):
            raise ValueError("chart coordinates must be finite")
        ell = float(self.ell)
        if not (np.isfinite(ell) and ell > 0):
            raise ValueError("ell must be positive and finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "ell", ell)


def sigma_squared(p: ChartPoint) -> float:
    """Flat Lorentzian square eta_{mu nu} x^mu x^nu of the coordinates."""
    return float(_sigma2(p.x))


def conformal_factor(p: ChartPoint) -> float:
    """Omega = 1 / (1 - sigma^2 / 4 ell^2).

    Raises ChartSingularity when the denominator is within
    SINGULARITY_EPS of zero.  Omega is negative beyond the singular
    sphere; both signs are valid chart territory.
    """
    q = 1.0 - _sigma2(p.x) / (4.0 * p.ell * p.ell)
    if abs(q) < SINGULARITY_EPS:
        raise ChartSingularity(
            f"conformal factor diverges: 1 - sigma^2/4ell^2 = {q:.3e}")
    return 1.0 / q


def embed(p: ChartPoint) -> np.ndarray:
    """Bulk position of a chart point, shape (5,)."""
    omega = conformal_factor(p)
    return _embed(p.x, omega, p.ell)


def unembed(X, ell, tol=ON_BRANE_TOL) -> ChartPoint:
    """Chart point with embed(unembed(X)) = X.

    Raises NotOnBrane if X is off the pseudo-sphere by more than
    tol * ell^2, NorthPole if X sits on the excluded cone X4 = ell.
    """
    X = np.asarray(X, dtype=float)
    if X.shape != (5,):
        raise ValueError("bulk point needs exactly 5 components")
    residual = bulk_inner(X, X) + ell * ell
    if abs(residual) > tol * ell * ell:
        raise NotOnBrane(f"pseudo-sphere residual {residual:.3e}")
    denom = ell - X[4]
    if abs(denom) < NORTH_POLE_EPS * ell:
        raise NorthPole("X4 = ell: chart coordinates undefined")
    return ChartPoint(2.0 * ell * X[:4] / denom, ell)


def embedding_jacobian(p: ChartPoint) -> np.ndarray:
    """Differential of the embedding, shape (5, 4).

    Rows 0..3: Omega delta^mu_nu + (Omega^2 / 2 ell^2) x^mu x_nu;
    row 4: -(Omega^2 / ell) x_nu.
    """
    omega = conformal_factor(p)
    ell = p.ell
    x_lower = ETA4 * p.x
    J = np.zeros((5, 4))
    J[:4, :] = omega * np.eye(4) + (omega * omega / (2.0 * ell * ell)) * np.outer(p.x, x_lower)
    J[4, :] = -(omega * omega / ell) * x_lower
    return J


def embed_differential(p: ChartPoint, u) -> np.ndarray:
    """Bulk velocity corresponding to chart velocity u at p, shape (5,)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (4,):
        raise ValueError("chart velocity needs exactly 4 components")
    omega = conformal_factor(p)
    return _velocity_to_bulk(p.x, u, omega, p.ell)


def pullback_metric(p: ChartPoint) -> np.ndarray:
    """Induced metric Omega^2 diag(1, -1, -1, -1), shape (4, 4)."""
    omega = conformal_factor(p)
    return omega * omega * np.diag(ETA4)


def metric_norm(p: ChartPoint, u) -> float:
    """g_p(u, u) for a chart velocity u."""
    omega = conformal_factor(p)
    u = np.asarray(u, dtype=float)
    return float(omega * omega * np.sum(ETA4 * u * u))


def christoffel(p: ChartPoint) -> np.ndarray:
    """Connection coefficients Gamma^a_{mn} in closed form, shape (4,4,4).

    Gamma^a_{mn} = (Omega / 2 ell^2)(delta^a_m x_n + delta^a_n x_m
                                     - eta_{mn} x^a).
    """
    omega = conformal_factor(p)
    coef = omega / (2.0 * p.ell * p.ell)
    x_up = p.x
    x_lo = ETA4 * p.x
    eye = np.eye(4)
    combo = (eye[:, :, None] * x_lo[None, None, :]
             + eye[:, None, :] * x_lo[None, :, None]
             - np.diag(ETA4)[None, :, :] * x_up[:, None, None])
    return coef * combo


def christoffel_fd(p: ChartPoint, h=1e-4) -> np.ndarray:
    """Finite-difference oracle for the connection, shape (4,4,4).

    Uses Gamma^a_{mn} = 1/2 g^{ab}(d_m g_{bn} + d_n g_{bm} - d_b g_{mn})
    with central differences of pullback_metric, O(h^2) accurate.  Any
    stencil point on the singular sphere raises ChartSingularity.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    ell = p.ell
    dg = np.zeros((4, 4, 4))  # dg[l, b, n] = d_l g_{bn}
    for lam in range(4):
        e = np.zeros(4)
        e[lam] = h
        gp = pullback_metric(ChartPoint(p.x + e, ell))
        gm = pullback_metric(ChartPoint(p.x - e, ell))
        dg[lam] = (gp - gm) / (2.0 * h)
    ginv = np.linalg.inv(pullback_metric(p))
    # 1/2 g^{ab} (dg[m,b,n] + dg[n,b,m] - dg[b,m,n])
    term = (np.einsum("mbn->bmn", dg) + np.einsum("nbm->bmn", dg)
            - np.einsum("bmn->bmn", dg))
    return 0.5 * np.einsum("ab,bmn->amn", ginv, term)


# ---------------------------------------------------------------------------
# array kernels shared with the dynamics module; x has shape (..., 4),
# X shape (..., 5).  No singularity guards here: callers monitor.

def _sigma2(x):
    return np.sum(ETA4 * x * x, axis=-1)


def _omega(x, ell):
    return 1.0 / (1.0 - _sigma2(x) / (4.0 * ell * ell))


def _embed(x, omega, ell):
    t = _sigma2(x) / (4.0 * ell * ell)
    Xmu = omega[..., None] * x if np.ndim(omega) else omega * x
    X4 = -ell * omega * (1.0 + t)
    return np.concatenate([Xmu, np.asarray(X4)[..., None]], axis=-1)


def _velocity_to_bulk(x, u, omega, ell):
    xu = np.sum(ETA4 * x * u, axis=-1)
    om = np.asarray(omega)
    coef = (om * om / (2.0 * ell * ell)) * xu
    Vmu = om[..., None] * u + coef[..., None] * x
    V4 = -(om * om / ell) * xu
    return np.concatenate([Vmu, np.asarray(V4)[..., None]], axis=-1)


def _unembed(X, ell):
    """Chart coordinates of bulk points; rows too close to the excluded
    cone come back as nan."""
    X = np.asarray(X, dtype=float)
    denom = ell - X[..., 4]
    bad = np.abs(denom) < NORTH_POLE_EPS * ell
    safe = np.where(bad, 1.0, denom)
    x = 2.0 * ell * X[..., :4] / safe[..., None]
    if np.ndim(x) == 1:
        return np.full(4, np.nan) if bad else x
    x[bad] = np.nan
    return x


def _velocity_to_chart(X, V, ell):
    """Chart velocity of bulk states; nan where the chart degenerates."""
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    denom = ell - X[..., 4]
    bad = np.abs(denom) < NORTH_POLE_EPS * ell
    safe = np.where(bad, 1.0, denom)
    u = (2.0 * ell / safe[..., None]) * (
        V[..., :4] + X[..., :4] * (V[..., 4] / safe)[..., None])
    if np.ndim(u) == 1:
        return np.full(4, np.nan) if bad else u
    u[bad] = np.nan
    return u
