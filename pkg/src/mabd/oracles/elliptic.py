"""Complete elliptic integral, Jacobi sn and the large-amplitude pendulum."""
import math
from dataclasses import dataclass


class OutOfDomain(ValueError):
    pass


def _check(kappa):
    if not 0.0 <= kappa < 1.0:
        raise OutOfDomain(f"modulus {kappa} outside [0, 1)")


def _agm(a, b):
    for _ in range(64):
        if abs(a - b) <= 1e-16 * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return a


def elliptic_K(kappa):
    """K(κ) = ∫₀^{π/2} dθ / sqrt(1 - κ² sin²θ) via the arithmetic-geometric mean."""
    _check(kappa)
    return math.pi / (2.0 * _agm(1.0, math.sqrt((1.0 - kappa) * (1.0 + kappa))))


def jacobi_sn(u, kappa):
    """Jacobi elliptic sine by the descending Landen (AGM) recursion."""
    _check(kappa)
    if kappa == 0.0:
        return math.sin(u)
    a, b, c = [1.0], [math.sqrt((1.0 - kappa) * (1.0 + kappa))], [kappa]
    while abs(c[-1]) > 1e-16 * a[-1] and len(a) < 64:
        a.append(0.5 * (a[-1] + b[-1]))
        c.append(0.5 * (a[-2] - b[-1]))
        b.append(math.sqrt(a[-2] * b[-1]))
    n = len(a) - 1
    phi = (2.0**n) * a[n] * u
    for m in range(n, 0, -1):
        phi = 0.5 * (phi + math.asin(c[m] / a[m] * math.sin(phi)))
    return max(-1.0, min(1.0, math.sin(phi)))


@dataclass(frozen=True)
class EllipticPendulum:
    """Physical pendulum released from rest at amplitude ``amplitude`` (rad).

    ``length`` is the pivot-to-COM distance and ``inertia`` the moment about
    the pivot; ``omega_lin² = m g d / I``.
    """

    mass: float
    length: float
    inertia: float
    gravity: float = 9.81
    amplitude: float = math.pi / 2

    @property
    def kappa(self):
        return math.sin(self.amplitude / 2.0)

    @property
    def omega_lin(self):
        return math.sqrt(self.mass * self.gravity * self.length / self.inertia)

    @property
    def period(self):
        return 4.0 * elliptic_K(self.kappa) / self.omega_lin


def pendulum_theta(t, params):
    """Angle below the release horizontal: π/2 − 2 asin(κ sn(K − ω t, κ))."""
    k = params.kappa
    K = elliptic_K(k)
    return math.pi / 2.0 - 2.0 * math.asin(k * jacobi_sn(K - params.omega_lin * t, k))
