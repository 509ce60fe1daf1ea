"""The power family P(z) = z**alpha + g and its derived constants."""
from __future__ import annotations

import math
from dataclasses import dataclass


class PowerDomainError(ValueError):
    pass


@dataclass(frozen=True)
class PowerFunction:
    """Machine power draw as a function of speed: ``P(z) = z**alpha + g``.

    ``alpha >= 1`` is the dynamic exponent, ``g >= 0`` the static draw while
    the machine is active.
    """

    alpha: float
    g: float = 0.0

    def __post_init__(self):
        if self.alpha < 1.0:
            raise PowerDomainError(f"alpha must be >= 1, got {self.alpha}")
        if self.g < 0.0:
            raise PowerDomainError(f"g must be >= 0, got {self.g}")

    def __call__(self, z: float) -> float:
        if z < 0.0:
            raise PowerDomainError(f"speed must be >= 0, got {z}")
        return z ** self.alpha + self.g

    def dynamic(self, z: float) -> float:
        """Dynamic part only: z**alpha."""
        if z < 0.0:
            raise PowerDomainError(f"speed must be >= 0, got {z}")
        return z ** self.alpha

    def deriv(self, z: float) -> float:
        """P'(z) = alpha * z**(alpha-1).  Static draw never enters."""
        a = self.alpha
        if z < 0.0:
            raise PowerDomainError(f"speed must be >= 0, got {z}")
        if z == 0.0:
            # right limit: alpha * z**(alpha-1) -> 0 for alpha > 1, 1 for alpha == 1
            return 1.0 if a == 1.0 else 0.0
        return a * z ** (a - 1.0)

    def q_value(self, z: float) -> float:
        """P(z) - z P'(z) = (1 - alpha) z**alpha + g."""
        return (1.0 - self.alpha) * self.dynamic(z) + self.g

    def critical_speed(self) -> float:
        """argmin over s > 0 of P(s)/s, i.e. the root of (alpha-1) s**alpha = g.

        Convention: 0 when g == 0 (the infimum is not attained); error when
        alpha == 1 with g > 0 (P(s)/s decreases forever).
        """
        if self.g == 0.0:
            return 0.0
        if self.alpha == 1.0:
            raise PowerDomainError("no finite critical speed for alpha=1, g>0")
        return (self.g / (self.alpha - 1.0)) ** (1.0 / self.alpha)

    def idle_cost_rate(self) -> float:
        """P(s_c)/s_c, the best achievable energy per unit of work; 0 if g == 0."""
        sc = self.critical_speed()
        if sc == 0.0:
            return 0.0
        return self(sc) / sc

    def epsilon_of(self) -> float:
        """Smallest eps with z * P'((1-eps) z) <= P(z) for all z > 0.

        For the z**alpha family the binding regime is z -> inf, where the
        static term vanishes, so the constant is 1 - alpha**(-1/(alpha-1))
        for every g >= 0 (and 0 when alpha == 1, where P' is constant).
        """
        a = self.alpha
        if a == 1.0:
            return 0.0
        return 1.0 - a ** (-1.0 / (a - 1.0))


def conjugate_gain(power: PowerFunction, price: float) -> float:
    """max over z >= 0 of price*z - P(z) (charging no static draw at z = 0).

    This is the best profit a price-taker extracts from the machine; it
    prices the adversary's freedom in Lagrangian bounds.  Zero whenever the
    price is below the critical energy rate.
    """
    if price <= 0.0:
        return 0.0
    a = power.alpha
    if a == 1.0:
        if price > 1.0 + 1e-12:
            raise PowerDomainError("unbounded conjugate for linear power")
        return 0.0
    z = (price / a) ** (1.0 / (a - 1.0))
    return max(0.0, price * z - power(z))


def epsilon_defining_gap(power: PowerFunction, eps: float, z: float) -> float:
    """P(z) - z*P'((1-eps)z); >= 0 exactly when ``eps`` satisfies the
    speed-discount requirement at ``z``."""
    if not 0.0 <= eps < 1.0:
        raise PowerDomainError("eps must lie in [0, 1)")
    return power(z) - z * power.deriv((1.0 - eps) * z)


def epsilon_search(power: PowerFunction, z_grid_size: int = 400) -> float:
    """Numeric confirmation of :meth:`PowerFunction.epsilon_of`.

    Bisects for the smallest eps whose defining gap is nonnegative on a log
    grid of speeds.  Exposed for tests; the closed form is authoritative.
    The binding regime is z -> inf (static draw adds slack at finite z), so
    the grid reaches far up.
    """
    zs = [10.0 ** (k / (z_grid_size / 10.0) - 2.0) for k in range(z_grid_size)]

    def ok(eps: float) -> bool:
        return all(epsilon_defining_gap(power, eps, z) >= -1e-12 for z in zs)

    lo, hi = 0.0, 1.0 - 1e-9
    if ok(lo):
        return 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
