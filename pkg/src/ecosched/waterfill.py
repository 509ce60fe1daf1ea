"""Exact water-filling over piecewise-constant base profiles.

Pouring volume into a time window raises the lowest part of the base profile
uniformly until either the requested volume is placed or the marginal price of
the current level reaches a cap.  Levels live in profile units; an optional
strictly increasing ``price_of_level`` map converts levels to prices so the
cap can be expressed in price units.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

from .stepfn import StepFunction


class FillBinding(enum.Enum):
    VOLUME_MET = "volume_met"
    PRICE_CAP_HIT = "price_cap_hit"


@dataclass(frozen=True)
class FillResult:
    increment: StepFunction
    level: float
    placed: float
    binding: FillBinding


class NonMonotonePriceError(ValueError):
    pass


def _window_bins(base: StepFunction, lo: float, hi: float) -> list[tuple[float, float]]:
    """(value, length) pieces of ``base`` inside [lo, hi], gaps as 0."""
    bins: list[tuple[float, float]] = []
    cursor = lo
    for s, e, v in base.segments():
        s, e = max(s, lo), min(e, hi)
        if e <= s:
            continue
        if s > cursor:
            bins.append((0.0, s - cursor))
        bins.append((v, e - s))
        cursor = e
    if cursor < hi:
        bins.append((0.0, hi - cursor))
    return bins


def _level_for_volume(bins: list[tuple[float, float]], volume: float) -> float:
    """Level L with sum(max(0, L - v) * len) == volume.  Bins must be sorted."""
    covered_len = 0.0
    poured = 0.0
    level = bins[0][0]
    for i, (v, ln) in enumerate(bins):
        if v > level:
            room = (v - level) * covered_len
            if poured + room >= volume:
                break
            poured += room
            level = v
        covered_len += ln
    return level + (volume - poured) / covered_len


def _water(bins: list[tuple[float, float]], level: float) -> float:
    return sum((level - v) * ln for v, ln in bins if v < level)


def fill(
    base: StepFunction,
    window: tuple[float, float],
    volume: float,
    price_cap: Optional[float] = None,
    price_of_level: Optional[Callable[[float], float]] = None,
    level_of_price: Optional[Callable[[float], float]] = None,
) -> FillResult:
    """Pour ``volume`` into ``window`` on top of ``base``.

    Returns the added profile, the final water level, the volume actually
    placed, and which constraint stopped the pour.  With no cap the volume is
    always placed (the level is unbounded).  When the price of the level that
    would absorb the whole volume exceeds ``price_cap``, the pour stops at the
    cap level instead and ``placed < volume``.

    A cap at or below the price of the window's lowest point places nothing;
    this covers the constant-price degenerate case (linear power), where any
    cap <= the flat price rejects and any larger cap never binds.
    """
    lo, hi = window
    if not lo < hi:
        raise ValueError("window must have positive length")
    if not volume > 0.0:
        raise ValueError("volume must be > 0")
    price = price_of_level if price_of_level is not None else (lambda lv: lv)

    bins = sorted(_window_bins(base, lo, hi))
    floor_level = bins[0][0]
    level_vol = _level_for_volume(bins, volume)
    if price(level_vol) < price(floor_level):
        raise NonMonotonePriceError("price_of_level must be nondecreasing")

    if price_cap is not None and price(floor_level) >= price_cap:
        return FillResult(StepFunction.zero(), floor_level, 0.0, FillBinding.PRICE_CAP_HIT)

    if price_cap is None or price(level_vol) <= price_cap:
        level, binding = level_vol, FillBinding.VOLUME_MET
    else:
        if level_of_price is not None:
            level = level_of_price(price_cap)
        else:
            level = _invert_price(price, price_cap, floor_level, level_vol)
        level = min(max(level, floor_level), level_vol)
        binding = FillBinding.PRICE_CAP_HIT

    segs = []
    for s, e, v in _iter_window(base, lo, hi):
        if v < level:
            segs.append((s, e, level - v))
    increment = StepFunction.from_segments(segs)
    placed = _water(bins, level)
    return FillResult(increment, level, placed, binding)


def _iter_window(base: StepFunction, lo: float, hi: float):
    cursor = lo
    for s, e, v in base.segments():
        s, e = max(s, lo), min(e, hi)
        if e <= s:
            continue
        if s > cursor:
            yield cursor, s, 0.0
        yield s, e, v
        cursor = e
    if cursor < hi:
        yield cursor, hi, 0.0


def level_for_price(
    price: float,
    price_of_level: Callable[[float], float],
    lo: float = 0.0,
    rel_tol: float = 1e-10,
) -> float:
    """Inverse of a nondecreasing level->price map at ``price`` by bisection.

    Raises when ``price`` lies below ``price_of_level(lo)``.  Callers with an
    analytic inverse should use it instead; this is the generic fallback.
    """
    p_lo = price_of_level(lo)
    if price < p_lo:
        raise ValueError(f"price {price} below range (min {p_lo})")
    if price == p_lo:
        return lo
    hi = max(1.0, lo * 2.0 + 1.0)
    for _ in range(200):
        if price_of_level(hi) >= price:
            break
        hi *= 2.0
    else:
        return math.inf  # constant or capped price map: cap never binds
    return _invert_price(price_of_level, price, lo, hi, rel_tol)


def _invert_price(price_fn, target, lo, hi, rel_tol: float = 1e-12) -> float:
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if price_fn(mid) >= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rel_tol * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def chunked_fill_level(
    base: StepFunction,
    window: tuple[float, float],
    volume: float,
    chunks: int,
) -> float:
    """Reference simulation: add the volume in ``chunks`` equal parts, each
    poured at the current lowest point.  Converges to :func:`fill`'s level as
    ``chunks`` grows; used as the discretisation-limit oracle in tests."""
    lo, hi = window
    bins = sorted(_window_bins(base, lo, hi))
    level = bins[0][0]
    dv = volume / chunks
    for _ in range(chunks):
        level = _level_for_volume(bins, _water(bins, level) + dv)
    return level
