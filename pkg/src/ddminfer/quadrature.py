"""Adaptive quadrature helpers for moment and normalization integrals.

Thin wrappers over scipy's Gauss-Kronrod integrator with the variable
changes we use for semi-infinite first-passage integrals.  Absolute
tolerance defaults to 1e-10 so that quadrature error never competes
with the identities being tested.
"""

from scipy.integrate import quad

ABS_TOL = 1e-10

__all__ = ["ABS_TOL", "integrate", "integrate_tail", "density_mass"]


def integrate(f, a, b, tol=ABS_TOL):
    """Integral of f over the finite interval (a, b)."""
    val, _ = quad(f, a, b, epsabs=tol, epsrel=1e-12, limit=400)
    return val


def integrate_tail(f, start, tol=ABS_TOL):
    """Integral of f over (start, inf) via the map t = start + s/(1-s).

    The map compactifies the tail onto s in (0, 1); the Jacobian is
    1/(1-s)^2.
    """

    def g(s):
        r = 1.0 - s
        return f(start + s / r) / (r * r)

    val, _ = quad(g, 0.0, 1.0, epsabs=tol, epsrel=1e-12, limit=400)
    return val


def density_mass(f, split=1.0, tol=ABS_TOL):
    """Total mass of a density on (0, inf), split at a finite point.

    ``split`` should sit past any kink of f (for switch-drift densities,
    the switch time) so each sub-integral sees a smooth integrand.
    """
    return integrate(f, 0.0, split, tol) + integrate_tail(f, split, tol)
