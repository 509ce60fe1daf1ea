"""Piecewise-constant functions of time with exact interval arithmetic.

A :class:`StepFunction` is nonnegative, has finitely many breakpoints and is
zero outside the covered span.  Every speed profile, pending-weight curve and
water level in this package is one of these, so all integrals reduce to exact
sums of ``value * overlap`` terms -- no quadrature anywhere.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence


def feq(a: float, b: float, tol: float = 1e-9) -> bool:
    """Equality with absolute tolerance scaled by max(1, |operand|)."""
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class StepFunction:
    """Canonical piecewise-constant function.

    ``values[i]`` holds on ``[breakpoints[i], breakpoints[i+1])``; the function
    is 0 outside ``[breakpoints[0], breakpoints[-1]]``.  Canonical form merges
    adjacent equal values and strips zero-valued edge intervals, so two equal
    functions compare equal structurally.
    """

    breakpoints: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        bp, vals = self.breakpoints, self.values
        if len(bp) != len(vals) + 1 and not (len(bp) == 0 and len(vals) == 0):
            raise ValueError("breakpoints/values length mismatch")
        for a, b in zip(bp, bp[1:]):
            if not a < b:
                raise ValueError("breakpoints must be strictly increasing")
        for v in vals:
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"values must be finite and >= 0, got {v}")
        if vals:
            if vals[0] == 0.0 or vals[-1] == 0.0:
                raise ValueError("not canonical: zero-valued edge interval")
            for u, w in zip(vals, vals[1:]):
                if u == w:
                    raise ValueError("not canonical: equal adjacent values")

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    @staticmethod
    def zero() -> "StepFunction":
        return StepFunction((), ())

    @staticmethod
    def constant(value: float, start: float, end: float) -> "StepFunction":
        if end <= start:
            raise ValueError("end must exceed start")
        return StepFunction.from_segments([(start, end, value)])

    @staticmethod
    def from_segments(segments: Iterable[tuple[float, float, float]]) -> "StepFunction":
        """Build from non-overlapping ``(start, end, value)`` pieces.

        Gaps between pieces become zero-valued intervals.  Tiny negative
        values (|v| <= 1e-12) from float cancellation are clamped to 0.
        """
        segs = sorted((s, e, v) for s, e, v in segments if e > s)
        bp: list[float] = []
        vals: list[float] = []
        for s, e, v in segs:
            if v < 0.0:
                if v < -1e-12:
                    raise ValueError(f"negative segment value {v}")
                v = 0.0
            if bp and s < bp[-1]:
                raise ValueError("overlapping segments")
            if not bp:
                bp.append(s)
            elif s > bp[-1]:
                bp.append(s)
                vals.append(0.0)
            bp.append(e)
            vals.append(v)
        return _canonical(bp, vals)

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.values

    @property
    def start(self) -> float:
        return self.breakpoints[0] if self.breakpoints else 0.0

    @property
    def end(self) -> float:
        return self.breakpoints[-1] if self.breakpoints else 0.0

    def value_at(self, t: float) -> float:
        """Right-continuous evaluation; 0 outside the covered span."""
        bp = self.breakpoints
        if not self.values or t < bp[0] or t >= bp[-1]:
            return 0.0
        return self.values[bisect_right(bp, t) - 1]

    def segments(self) -> Iterator[tuple[float, float, float]]:
        """Yield ``(start, end, value)`` over the covered span."""
        for i, v in enumerate(self.values):
            yield self.breakpoints[i], self.breakpoints[i + 1], v

    def integral(self, a: float, b: float) -> float:
        if a > b:
            raise ValueError("integration bounds reversed")
        total = 0.0
        for s, e, v in self.segments():
            lo, hi = max(a, s), min(b, e)
            if hi > lo and v:
                total += v * (hi - lo)
        return total

    def total(self) -> float:
        return self.integral(self.start, self.end) if self.values else 0.0

    def support_measure(self) -> float:
        return sum(e - s for s, e, v in self.segments() if v > 0.0)

    def max_value(self) -> float:
        return max(self.values, default=0.0)

    def min_on(self, a: float, b: float) -> float:
        """Minimum value over [a, b), counting uncovered time as 0."""
        if b <= a:
            raise ValueError("empty interval")
        lo = math.inf
        cursor = a
        for s, e, v in self.segments():
            s, e = max(s, a), min(e, b)
            if e <= s:
                continue
            if s > cursor:
                lo = 0.0
            lo = min(lo, v)
            cursor = e
        if cursor < b:
            lo = 0.0
        return 0.0 if lo is math.inf else lo

    # ------------------------------------------------------------------
    # arithmetic
    # ------------------------------------------------------------------

    def __add__(self, other: "StepFunction") -> "StepFunction":
        return pointwise_sum([self, other])

    def minus(self, other: "StepFunction") -> "StepFunction":
        """Pointwise difference, clamped at 0 (tolerating float dust)."""
        return _combine([self, other], lambda vs: max(0.0, vs[0] - vs[1]))

    def scaled(self, k: float) -> "StepFunction":
        if k < 0:
            raise ValueError("negative scale")
        return _canonical(list(self.breakpoints), [v * k for v in self.values])

    def mapped(self, fn: Callable[[float], float]) -> "StepFunction":
        """Apply ``fn`` to each value (zero stays implicit outside the span)."""
        return _canonical(list(self.breakpoints), [fn(v) for v in self.values])

    def restricted(self, a: float, b: float) -> "StepFunction":
        segs = []
        for s, e, v in self.segments():
            s, e = max(s, a), min(e, b)
            if e > s:
                segs.append((s, e, v))
        return StepFunction.from_segments(segs)

    def sup_norm_diff(self, other: "StepFunction") -> float:
        gap = 0.0
        for _, _, vs in _merged_cells([self, other]):
            gap = max(gap, abs(vs[0] - vs[1]))
        return gap

    def approx_eq(self, other: "StepFunction", tol: float = 1e-9) -> bool:
        return self.sup_norm_diff(other) <= tol


# ----------------------------------------------------------------------
# module-level operations
# ----------------------------------------------------------------------


def integrate(f: StepFunction, a: float, b: float) -> float:
    """Exact integral of ``f`` over ``[a, b]``; 0 when a == b."""
    return f.integral(a, b)


def pointwise_sum(fs: Sequence[StepFunction]) -> StepFunction:
    """Canonical sum; per-cell values use ``math.fsum`` so the result is
    identical under any ordering of ``fs``."""
    if not fs:
        return StepFunction.zero()
    return _combine(list(fs), math.fsum)


def upper_envelope(entries: Sequence[tuple[float, float, float]]) -> StepFunction:
    """Pointwise maximum of interval-supported constants ``(lo, hi, value)``."""
    entries = [(lo, hi, v) for lo, hi, v in entries if hi > lo]
    if not entries:
        return StepFunction.zero()
    cuts = sorted({e[0] for e in entries} | {e[1] for e in entries})
    bp: list[float] = [cuts[0]]
    vals: list[float] = []
    for a, b in zip(cuts, cuts[1:]):
        vals.append(max((v for lo, hi, v in entries if lo <= a and b <= hi), default=0.0))
        bp.append(b)
    return _canonical(bp, vals)


def _merged_cells(fs: list[StepFunction]) -> Iterator[tuple[float, float, list[float]]]:
    cuts = sorted({t for f in fs for t in f.breakpoints})
    for a, b in zip(cuts, cuts[1:]):
        yield a, b, [f.value_at(a) for f in fs]


def _combine(fs: list[StepFunction], op: Callable[[list[float]], float]) -> StepFunction:
    bp: list[float] = []
    vals: list[float] = []
    for a, b, cell in _merged_cells(fs):
        v = op(cell)
        if not bp:
            bp = [a, b]
            vals = [v]
        else:
            bp.append(b)
            vals.append(v)
    return _canonical(bp, vals)


def _canonical(bp: list[float], vals: list[float]) -> StepFunction:
    # merge equal neighbours
    mbp: list[float] = []
    mvals: list[float] = []
    for i, v in enumerate(vals):
        if mvals and mvals[-1] == v:
            mbp[-1] = bp[i + 1]
        else:
            if not mvals:
                mbp.append(bp[i])
            mbp.append(bp[i + 1])
            mvals.append(v)
    # strip zero edges
    while mvals and mvals[0] == 0.0:
        mvals.pop(0)
        mbp.pop(0)
    while mvals and mvals[-1] == 0.0:
        mvals.pop()
        mbp.pop()
    if not mvals:
        return StepFunction((), ())
    return StepFunction(tuple(mbp), tuple(mvals))
