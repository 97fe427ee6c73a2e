import numpy as np
import pytest

ETA4 = np.array([1.0, -1.0, -1.0, -1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def eta4(x, y):
    return float(np.sum(ETA4 * x * y))


def chart_points_with_sigma(rng, n, lo=-10.0, hi=3.9, ell=1.0):
    """Chart coordinates with sigma^2 = eta(x, x) uniform in (lo, hi).

    hi < 4 ell^2 keeps every point off the singular sphere; negative
    values exercise the spacelike side.
    """
    targets = rng.uniform(lo, hi, size=n) * ell * ell
    out = np.empty((n, 4))
    for i, target in enumerate(targets):
        while True:
            x = rng.normal(size=4)
            s2 = eta4(x, x)
            if abs(s2) > 1e-6 and s2 * target > 0:
                out[i] = x * np.sqrt(target / s2)
                break
            if abs(target) < 1e-12:
                out[i] = 0.0
                break
    return out


def random_pseudosphere_point(rng, ell=1.0, tau_max=2.0):
    """Uniform-ish point on <X, X> = -ell^2: boost parameter tau times a
    random direction on the unit 3-sphere."""
    tau = rng.uniform(-tau_max, tau_max)
    w = rng.normal(size=4)
    w /= np.linalg.norm(w)
    return np.concatenate([[ell * np.sinh(tau)], ell * np.cosh(tau) * w])


def random_tangent(rng, X, ell=1.0):
    """Random bulk vector tangent to the pseudo-sphere at X."""
    signs = np.array([1.0, -1.0, -1.0, -1.0, -1.0])
    v = rng.normal(size=5)
    inner = float(np.sum(signs * v * X))
    return v + (inner / (ell * ell)) * X
