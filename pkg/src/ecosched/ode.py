"""Feasibility system linking accumulated virtual load to its pricing profile.

The admission algorithm prices volume with the marginal power of a *shadow*
profile ``v`` that grows with the accumulated virtual load ``u``.  For a
guarantee factor ``r`` the pair must satisfy, with ``q(z) = P(z) - z P'(z)``,

    q'(v) dv/du + P'(v) >= P'(u) / r
    (r - 1) P'(u) + r q'(v) dv/du >= 0
    dv/du > 0,        boundary  q(v(0)) = 0.

Both sign readings of the q-term are implemented because they disagree about
which linear map solves the system; see :func:`check_closed_form`.  Under the
as-printed sign the smallest feasible ``r`` for pure power is ``alpha**alpha``
and the tangent solution is ``v = u / alpha`` (offset by the critical speed
when static power is present) -- that configuration is what the admission
algorithm wires in.  Under the negated sign the system is feasible already
near ``r = 1``, which contradicts minimality of ``alpha**alpha``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .power import PowerFunction


class QSign(enum.Enum):
    """Sign convention for the q-term's derivative in the system."""

    AS_PRINTED = "as_printed"  # q'(v) = (1 - alpha) P'(v)
    NEGATED = "negated"  # q'(v) = (alpha - 1) P'(v)


DEFAULT_CONVENTION = QSign.AS_PRINTED


def _qprime(power: PowerFunction, v: float, convention: QSign) -> float:
    sign = -1.0 if convention is QSign.AS_PRINTED else 1.0
    return sign * (power.alpha - 1.0) * power.deriv(v)


def system_residuals(
    power: PowerFunction, r: float, u: float, v: float, slope: float, convention: QSign
) -> tuple[float, float]:
    qp = _qprime(power, v, convention)
    res1 = qp * slope + power.deriv(v) - power.deriv(u) / r
    res2 = (r - 1.0) * power.deriv(u) + r * qp * slope
    return res1, res2


def boundary_shadow(power: PowerFunction) -> float:
    """v(0) solving q(v) = 0: the critical speed (0 for pure power)."""
    return power.critical_speed()


@dataclass(frozen=True)
class SpeedMap:
    """Sampled solution v(u) with the slopes used at each sample."""

    samples: tuple[tuple[float, float], ...]
    slopes: tuple[float, ...]
    r: float
    convention: QSign

    def value(self, u: float) -> float:
        pts = self.samples
        if u <= pts[0][0]:
            return pts[0][1]
        for (u0, v0), (u1, v1) in zip(pts, pts[1:]):
            if u <= u1:
                w = (u - u0) / (u1 - u0)
                return v0 + w * (v1 - v0)
        return pts[-1][1]

    def worst_residuals(self, power: PowerFunction) -> tuple[float, float]:
        worst1 = worst2 = math.inf
        for (u, v), m in zip(self.samples, self.slopes):
            r1, r2 = system_residuals(power, self.r, u, v, m, self.convention)
            worst1, worst2 = min(worst1, r1), min(worst2, r2)
        return worst1, worst2


@dataclass(frozen=True)
class SolveOutcome:
    speed_map: Optional[SpeedMap]
    infeasible_at: Optional[float] = None

    @property
    def feasible(self) -> bool:
        return self.speed_map is not None


def _slope_bounds(
    power: PowerFunction, r: float, u: float, v: float, convention: QSign
) -> tuple[float, float]:
    """Admissible slope interval [lo, hi] at a point; hi may be inf."""
    a = power.alpha
    pu, pv = power.deriv(u), power.deriv(v)
    if a == 1.0:
        ok = (1.0 - 1.0 / r) >= -1e-15 and (r - 1.0) >= -1e-15
        return (1.0, 1.0) if ok else (1.0, 0.0)
    scale = (a - 1.0) * pv
    if convention is QSign.AS_PRINTED:
        if scale <= 0.0:
            return 0.0, -1.0  # P'(v)=0: first inequality unsatisfiable
        hi = min((pv - pu / r) / scale, (r - 1.0) * pu / (r * scale))
        return 0.0, hi
    lo = max(0.0, (pu / r - pv) / scale) if scale > 0.0 else 0.0
    if r < 1.0 and scale > 0.0:
        lo = max(lo, (1.0 - r) * pu / (r * scale))
    return lo, math.inf


def _slope_grid(alpha: float) -> list[float]:
    # include the tangent candidate 1/alpha exactly so feasibility at the
    # threshold ratio is not lost to grid resolution
    grid = [k / 2000.0 for k in range(1, 6001)]
    grid.append(1.0 / alpha)
    return grid


def _seed_slope(power: PowerFunction, r: float, convention: QSign) -> float:
    """Best ray slope out of the origin (pure-power start is scale free)."""
    best_c, best_margin = 1.0, -math.inf
    for c in _slope_grid(power.alpha):
        lo, hi = _slope_bounds(power, r, 1.0, c, convention)
        margin = (hi - c) if convention is QSign.AS_PRINTED else (c - lo)
        if margin > best_margin:
            best_c, best_margin = c, margin
    return best_c


def solve_v_of_u(
    power: PowerFunction,
    r: float,
    u_max: float,
    step: float,
    convention: QSign = DEFAULT_CONVENTION,
) -> SolveOutcome:
    """Explicit forward integration of the extremal admissible solution.

    Under the as-printed sign both inequalities cap the slope from above, so
    the integrator rides the largest admissible slope (the reachable-set
    frontier: a solution exists iff the frontier survives).  Under the negated
    sign they bound it from below and the minimal slope is taken.
    """
    if step <= 0.0:
        raise ValueError("step must be > 0")
    if u_max <= 0.0:
        raise ValueError("u_max must be > 0")
    if r <= 0.0:
        raise ValueError("r must be > 0")
    v = boundary_shadow(power)
    u = 0.0
    samples: list[tuple[float, float]] = []
    slopes: list[float] = []
    seed = _seed_slope(power, r, convention) if v == 0.0 else None
    first = True
    while u < u_max:
        h = min(step, u_max - u)
        if first and seed is not None:
            m = seed
        else:
            # the second inequality degenerates at exactly u=0 when static
            # power is present (P'(0)=0); take the first step's bounds just
            # inside the interval
            u_eval = max(u, h / 2.0) if first else u
            lo, hi = _slope_bounds(power, r, u_eval, v, convention)
            if hi < lo:
                return SolveOutcome(None, infeasible_at=u)
            m = min(hi, 1e6) if convention is QSign.AS_PRINTED else max(lo, 1e-9)
        if m <= 0.0:
            return SolveOutcome(None, infeasible_at=u)
        if not first:
            r1, r2 = system_residuals(power, r, u, v, m, convention)
            if min(r1, r2) < -1e-9:
                return SolveOutcome(None, infeasible_at=u)
            samples.append((u, v))
            slopes.append(m)
        u += h
        v += m * h
        first = False
    samples.append((u, v))
    slopes.append(slopes[-1] if slopes else 1.0)
    return SolveOutcome(SpeedMap(tuple(samples), tuple(slopes), r, convention))


def _ray_feasible(power: PowerFunction, r: float, convention: QSign) -> bool:
    """Pure-power feasibility via the ray reduction (exact up to grid size).

    For g == 0 every quantity in the system scales, so solutions through the
    origin can be taken linear, v = c u; a ray is admissible iff its slope
    lies inside its own bounds.
    """
    if power.alpha == 1.0:
        return r >= 1.0 - 1e-12
    for c in _slope_grid(power.alpha):
        lo, hi = _slope_bounds(power, r, 1.0, c, convention)
        if lo - 1e-12 <= c <= hi + 1e-12:
            return True
    return False


def find_r_star(
    power: PowerFunction,
    tol: float,
    convention: QSign = DEFAULT_CONVENTION,
    u_max: float = 50.0,
    step: float = 0.01,
) -> float:
    """Smallest r >= 1 for which the system is feasible, by bisection."""
    if tol <= 0.0:
        raise ValueError("tol must be > 0")

    if power.g == 0.0:
        def feasible(r: float) -> bool:
            return _ray_feasible(power, r, convention)
    else:
        def feasible(r: float) -> bool:
            return solve_v_of_u(power, r, u_max, step, convention).feasible

    lo = 1.0
    if feasible(lo):
        return lo
    hi = 10.0 * power.alpha ** power.alpha
    if not feasible(hi):
        raise RuntimeError(f"no feasible r below {hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ClosedFormReport:
    """Residuals of the linear candidate v = v0 + c*u under both signs."""

    r: float
    slope: float
    per_convention: dict

    def validating_conventions(self) -> list[QSign]:
        return [
            conv
            for conv, row in self.per_convention.items()
            if row["min_res1"] >= -1e-9 and row["min_res2"] >= -1e-9
        ]


def check_closed_form(power: PowerFunction, r: float, c: float) -> ClosedFormReport:
    """Evaluate both system inequalities for the linear map v = v0 + c*u on a
    log grid of loads, under both q-sign conventions."""
    v0 = boundary_shadow(power)
    grid = [10.0 ** (k / 10.0 - 3.0) for k in range(61)]
    per: dict = {}
    for conv in QSign:
        r1s, r2s = [], []
        for u in grid:
            r1, r2 = system_residuals(power, r, u, v0 + c * u, c, conv)
            r1s.append(r1)
            r2s.append(r2)
        per[conv] = {"min_res1": min(r1s), "min_res2": min(r2s)}
    return ClosedFormReport(r=r, slope=c, per_convention=per)


@dataclass(frozen=True)
class ShadowPricing:
    """Closed-form pricing map wired into the admission algorithm.

    ``shadow(level) = s_c + level/alpha`` solves the system with equality at
    ``r = alpha**alpha`` under the as-printed sign, and meets the boundary
    condition exactly for every static draw (q(s_c) = 0).  Prices are the
    marginal power of the shadow profile.
    """

    power: PowerFunction

    @property
    def ratio(self) -> float:
        return self.power.alpha ** self.power.alpha

    def shadow(self, level: float) -> float:
        return self.power.critical_speed() + level / self.power.alpha

    def price(self, level: float) -> float:
        return self.power.deriv(self.shadow(level))

    def level_of_price(self, price: float) -> float:
        a = self.power.alpha
        if a == 1.0:
            raise ValueError("constant price map has no inverse")
        v = (price / a) ** (1.0 / (a - 1.0))
        return max(0.0, a * (v - self.power.critical_speed()))


@lru_cache(maxsize=None)
def validated_pricing(alpha: float, g: float) -> ShadowPricing:
    """Build the pricing map after confirming it solves the system.

    Checked once per power function: the linear map with slope 1/alpha must
    satisfy, at r = alpha**alpha under the default sign, the first system
    inequality plus the rejection-rate inequality in its price form,
    (r-1) P'(v) + r q'(v) dv/du >= 0.  (With static power the second printed
    inequality, which uses P'(u), degenerates near u = 0 because P'(0) = 0;
    the admission argument only ever charges rejected volume at the price
    P'(v), so the price form is the operative one.)
    """
    power = PowerFunction(alpha, g)
    pricing = ShadowPricing(power)
    if alpha > 1.0:
        v0 = boundary_shadow(power)
        r = pricing.ratio
        for k in range(61):
            u = 10.0 ** (k / 10.0 - 3.0)
            v = v0 + u / alpha
            r1, _ = system_residuals(power, r, u, v, 1.0 / alpha, DEFAULT_CONVENTION)
            r2_price = (r - 1.0) * power.deriv(v) + r * _qprime(
                power, v, DEFAULT_CONVENTION
            ) / alpha
            if min(r1, r2_price) < -1e-9:
                raise RuntimeError(
                    f"shadow pricing fails the system at u={u} (res {r1}, {r2_price})"
                )
    return pricing
