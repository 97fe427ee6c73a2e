"""Linear algebra of the flat five-dimensional ambient space.

The ambient metric is diag(1, -1, -1, -1, -1); positive norm means
timelike.  Vectors are plain numpy arrays of shape (5,).  Bivectors are
stored as their ten independent upper-triangle components in the fixed
order of BIVECTOR_PAIRS, which makes antisymmetry structural.
"""
from __future__ import annotations

import enum

import numpy as np

# signature signs of the ambient metric, index A = 0..4
METRIC_SIGNS = np.array([1.0, -1.0, -1.0, -1.0, -1.0])

# component order for bivectors: L[k] = L^{AB} with (A, B) = BIVECTOR_PAIRS[k]
BIVECTOR_PAIRS = tuple((a, b) for a in range(5) for b in range(a + 1, 5))
BIVECTOR_NAMES = tuple(f"L{a}{b}" for a, b in BIVECTOR_PAIRS)

_IA = np.array([a for a, _ in BIVECTOR_PAIRS])
_IB = np.array([b for _, b in BIVECTOR_PAIRS])
_PAIR_SIGNS = METRIC_SIGNS[_IA] * METRIC_SIGNS[_IB]


class CausalClass(enum.Enum):
    TIMELIKE = "timelike"
    NULL = "null"
    SPACELIKE = "spacelike"


def bulk_inner(u, v):
    """Ambient inner product <u, v>.  Broadcasts over leading axes."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    out = np.sum(METRIC_SIGNS * u * v, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def pseudo_sphere_residual(X, ell):
    """<X, X> + ell^2; zero exactly when X lies on the pseudo-sphere."""
    if not ell > 0:
        raise ValueError("ell must be positive")
    return bulk_inner(X, X) + ell * ell


def angular_momentum(X, V, mass=1.0):
    """Ten components m (X^A V^B - X^B V^A), ordered as BIVECTOR_PAIRS.

    Broadcasts over leading axes of X and V.
    """
    if not mass > 0:
        raise ValueError("mass must be positive")
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    return mass * (X[..., _IA] * V[..., _IB] - X[..., _IB] * V[..., _IA])


def bivector_matrix(L):
    """Expand ten upper-triangle components into the full 5x5 matrix."""
    L = np.asarray(L, dtype=float)
    M = np.zeros((5, 5))
    M[_IA, _IB] = L
    M[_IB, _IA] = -L
    return M


def bivector_components(M):
    """Inverse of bivector_matrix: read the upper triangle of a 5x5 matrix."""
    M = np.asarray(M, dtype=float)
    return M[_IA, _IB].copy()


def bivector_invariant(L):
    """Signature-weighted scalar sum_{A<B} s_A s_B (L^{AB})^2.

    Invariant under ambient isometries, in particular spatial rotations.
    """
    L = np.asarray(L, dtype=float)
    out = np.sum(_PAIR_SIGNS * L * L, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def classify(v, tol=1e-12):
    """Causal character of a bulk vector; |<v, v>| <= tol counts as null."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    q = bulk_inner(v, v)
    if abs(q) <= tol:
        return CausalClass.NULL
    return CausalClass.TIMELIKE if q > 0 else CausalClass.SPACELIKE
