"""Single-machine online admission minimizing energy plus forfeited value.

Each arriving job water-fills its volume into its window on a *virtual* load
profile shared by all jobs (including rejected ones).  The marginal price of
an extra unit of level is the marginal power of the shadow profile from
:mod:`ecosched.ode`; a job is admitted iff its volume fits before the price
reaches ``value/volume``.  Admitted jobs run at their virtual profiles, which
an earliest-deadline pass re-verifies for feasibility.

Alongside the schedule the run constructs per-job dual multipliers whose
objective value certifies a lower bound on any offline cost; the per-chunk
re-simulation in :func:`check_induction_step` verifies the inequality that
makes the published guarantee hold for this run.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .edf import execute_edf
from .model import CostBreakdown, Instance, MachineState, ProblemKind, Schedule
from .ode import ShadowPricing, validated_pricing
from .power import conjugate_gain
from .stepfn import StepFunction, pointwise_sum, upper_envelope
from .waterfill import FillBinding, fill


@dataclass
class FillTrace:
    """Snapshot of one job's admission round (for the chunked re-check)."""

    job_id: int
    base: StepFunction  # virtual load profile before this job
    window: tuple[float, float]
    volume: float
    value: float
    level: float
    accepted: bool


@dataclass
class EnergyValueRun:
    instance: Instance
    accepted: set[int]
    lam: dict[int, float]
    gamma: dict[int, float]
    virtual_profiles: dict[int, StepFunction]
    v_profile: StepFunction
    shadow_increments: dict[int, StepFunction]
    schedule: Schedule
    breakdown: CostBreakdown
    dual_value: float  # objective of the stated dual program at our point
    dual_value_q_form: float  # surplus form; what the per-chunk check bounds
    dual_certified: float  # rigorous lower bound on any offline cost
    ratio_bound: float
    fill_trace: list[FillTrace] = field(default_factory=list)

    @property
    def primal(self) -> float:
        return self.breakdown.total_primal

    def report_dict(self) -> dict:
        dual = self.dual_value
        ratio = 1.0 if self.primal == 0.0 and dual == 0.0 else self.primal / dual
        return {
            "problem": self.instance.problem.value,
            "primal": self.primal,
            "dual": dual,
            "dual_q_form": self.dual_value_q_form,
            "dual_certified": self.dual_certified,
            "ratio": ratio,
            "ratio_bound": self.ratio_bound,
            "accepted_ids": sorted(self.accepted),
            "lambda": {str(k): v for k, v in sorted(self.lam.items())},
            "gamma": {str(k): v for k, v in sorted(self.gamma.items())},
            "energy": self.breakdown.dynamic_energy + self.breakdown.static_energy,
            "lost_value": self.breakdown.lost_value,
            "dual_terms": {
                "power_of_shadow": _power_integral(self.instance, self.v_profile),
                "lambda_dot_shadow": sum(
                    self.lam[j] * self.shadow_increments[j].total()
                    for j in self.shadow_increments
                ),
                "gamma_sum": sum(self.gamma.values()),
            },
        }

    def report_json(self) -> str:
        return json.dumps(self.report_dict(), sort_keys=True, indent=2) + "\n"


def _power_integral(instance: Instance, profile: StepFunction) -> float:
    """Integral of P over the profile's support (static draw only while > 0)."""
    P = instance.power
    return sum((v ** P.alpha + P.g) * (e - s) for s, e, v in profile.segments() if v > 0)


def run(instance: Instance) -> EnergyValueRun:
    if instance.problem is not ProblemKind.ENERGY_PLUS_LOST_VALUE:
        raise ValueError(f"wrong problem kind {instance.problem}")
    power = instance.power
    pricing = validated_pricing(power.alpha, power.g)
    inverse = pricing.level_of_price if power.alpha > 1.0 else None

    load = StepFunction.zero()  # aggregate virtual profile over all jobs
    shadow_prev = StepFunction.zero()
    accepted: set[int] = set()
    lam: dict[int, float] = {}
    gamma: dict[int, float] = {}
    virtual: dict[int, StepFunction] = {}
    shadow_inc: dict[int, StepFunction] = {}
    trace: list[FillTrace] = []

    for job in sorted(instance.jobs, key=lambda j: (j.release, j.id)):
        window = (job.release, job.deadline)
        cap = job.value / job.volume
        res = fill(
            load, window, job.volume,
            price_cap=cap, price_of_level=pricing.price, level_of_price=inverse,
        )
        lam_j = pricing.price(res.level)
        ok = res.binding is FillBinding.VOLUME_MET
        trace.append(
            FillTrace(job.id, load, window, job.volume, job.value, res.level, ok)
        )
        load = load + res.increment
        virtual[job.id] = res.increment
        if ok:
            accepted.add(job.id)
            lam[job.id] = lam_j
            gamma[job.id] = lam_j * job.volume
        else:
            lam[job.id] = lam_j
            gamma[job.id] = job.value
        shadow_now = load.mapped(pricing.shadow)
        shadow_inc[job.id] = shadow_now.minus(shadow_prev)
        shadow_prev = shadow_now

    speed = pointwise_sum([virtual[j] for j in sorted(accepted)])
    schedule = _build_schedule(instance, speed, virtual, accepted)
    breakdown = _breakdown(instance, speed, accepted)
    shadow = shadow_prev
    dual_n = (
        _power_integral(instance, shadow)
        - sum(lam[j] * shadow_inc[j].total() for j in shadow_inc)
        + sum(gamma.values())
    )
    dual_q = sum(
        power.q_value(v) * (e - s) for s, e, v in shadow.segments() if v > 0
    ) + sum(gamma.values())
    # Rigorous offline bound: minimize the Lagrangian directly.  Per instant
    # the adversary's best response to the multiplier envelope costs their
    # conjugate gain; the admission prices make every other term nonnegative.
    lam_envelope = upper_envelope(
        [(j.release, j.deadline, lam[j.id]) for j in instance.jobs]
    )
    dual_cert = sum(gamma.values()) - sum(
        conjugate_gain(power, price) * (e - s)
        for s, e, price in lam_envelope.segments()
    )
    return EnergyValueRun(
        instance=instance,
        accepted=accepted,
        lam=lam,
        gamma=gamma,
        virtual_profiles=virtual,
        v_profile=shadow,
        shadow_increments=shadow_inc,
        schedule=schedule,
        breakdown=breakdown,
        dual_value=dual_n,
        dual_value_q_form=dual_q,
        dual_certified=dual_cert,
        ratio_bound=pricing.ratio,
        fill_trace=trace,
    )


def _build_schedule(instance, speed, virtual, accepted) -> Schedule:
    tuples = [
        (j.id, j.release, j.deadline, j.volume) for j in instance.jobs if j.id in accepted
    ]
    completion = execute_edf(tuples, speed).completion if tuples else {}
    timeline = [
        (s, e, MachineState.WORKING if v > 0 else MachineState.IDLE)
        for s, e, v in speed.segments()
    ]
    return Schedule(
        per_job_speed={j: virtual[j] for j in sorted(accepted)},
        assignment={
            j.id: (0 if j.id in accepted else "rejected") for j in instance.jobs
        },
        state_timeline={0: timeline},
        completion_times=completion,
    )


def _breakdown(instance, speed, accepted) -> CostBreakdown:
    P = instance.power
    dyn = sum(v ** P.alpha * (e - s) for s, e, v in speed.segments())
    stat = P.g * speed.support_measure()
    lost = sum(j.value for j in instance.jobs if j.id not in accepted)
    coll = sum(j.value for j in instance.jobs if j.id in accepted)
    return CostBreakdown(
        dynamic_energy=dyn,
        static_energy=stat,
        lost_value=lost,
        collected_value=coll,
        total_primal=dyn + stat + lost,
    )


# ----------------------------------------------------------------------
# runtime verification
# ----------------------------------------------------------------------


@dataclass
class InductionReport:
    max_violation: float
    per_job: dict[int, float]

    @property
    def ok(self) -> bool:
        return self.max_violation <= 1e-6


def check_induction_step(run_: EnergyValueRun, chunks: int = 1000) -> InductionReport:
    """Re-play every admission in small volume chunks and verify that each
    chunk's primal gain is covered by the guarantee factor times the dual
    gain (admitted jobs), resp. that the rejection inequality holds.

    The dual gain of a chunk is the change of the q-term of the shadow
    profile plus the end-of-chunk price times the chunk volume (an
    underestimate of the final multiplier's contribution).
    """
    power = run_.instance.power
    pricing = validated_pricing(power.alpha, power.g)
    r_star = pricing.ratio
    worst = 0.0
    per_job: dict[int, float] = {}
    for tr in run_.fill_trace:
        violation = _replay_fill(power, pricing, tr, r_star, chunks)
        per_job[tr.job_id] = violation
        worst = max(worst, violation)
    return InductionReport(max_violation=worst, per_job=per_job)


def _replay_fill(power, pricing: ShadowPricing, tr: FillTrace, r_star, chunks) -> float:
    lo, hi = tr.window
    # sorted (value, length) bins of the base inside the window
    bins: list[tuple[float, float]] = []
    cursor = lo
    for s, e, v in tr.base.segments():
        s, e = max(s, lo), min(e, hi)
        if e <= s:
            continue
        if s > cursor:
            bins.append((0.0, s - cursor))
        bins.append((v, e - s))
        cursor = e
    if cursor < hi:
        bins.append((0.0, hi - cursor))
    bins.sort()

    def primal_at(level: float) -> float:
        # dynamic + static power of the capped profile max(base, level)
        total = 0.0
        for v, ln in bins:
            z = max(v, level)
            if z > 0.0:
                total += (z ** power.alpha + power.g) * ln
        return total

    def qterm_at(level: float) -> float:
        total = 0.0
        for v, ln in bins:
            z = max(v, level)
            if z > 0.0:
                total += power.q_value(pricing.shadow(z)) * ln
        return total

    cap = tr.value / tr.volume
    dv = tr.volume / chunks
    level = bins[0][0]
    poured = 0.0
    worst = 0.0
    scale = max(1.0, tr.value, primal_at(tr.level))
    for _ in range(chunks):
        if pricing.price(level) >= cap and not tr.accepted:
            break
        new_level = _raise_level(bins, poured + dv)
        if not tr.accepted and pricing.price(new_level) > cap:
            new_level = min(new_level, pricing.level_of_price(cap))
        d_primal = primal_at(new_level) - primal_at(level)
        d_q = qterm_at(new_level) - qterm_at(level)
        chunk_vol = _water(bins, new_level) - poured
        d_price = pricing.price(new_level) * chunk_vol
        if tr.accepted:
            worst = max(worst, (d_primal - r_star * (d_q + d_price)) / scale)
        poured += chunk_vol
        level = new_level
        if chunk_vol <= 0.0:
            break
    if not tr.accepted:
        # rejection case: forfeiting the value must be covered by the factor
        total_dq = qterm_at(level) - qterm_at(bins[0][0])
        worst = max(worst, -((r_star - 1.0) * tr.value + r_star * total_dq) / scale)
    return worst


def _raise_level(bins, volume) -> float:
    covered = 0.0
    poured = 0.0
    level = bins[0][0]
    for v, ln in bins:
        if v > level:
            room = (v - level) * covered
            if poured + room >= volume:
                break
            poured += room
            level = v
        covered += ln
    return level + (volume - poured) / covered


def _water(bins, level) -> float:
    return sum((level - v) * ln for v, ln in bins if v < level)


@dataclass
class CompetitiveCertificate:
    primal: float
    dual: float
    ratio: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.primal <= self.bound * self.dual + 1e-6


def competitive_certificate(run_: EnergyValueRun) -> CompetitiveCertificate:
    """Ratio against the certified dual bound (the strongest sound check)."""
    primal, dual = run_.primal, run_.dual_certified
    if primal == 0.0 and dual == 0.0:
        return CompetitiveCertificate(0.0, 0.0, 1.0, run_.ratio_bound)
    if dual <= 0.0:
        raise ValueError(f"degenerate dual value {dual}")
    return CompetitiveCertificate(primal, dual, primal / dual, run_.ratio_bound)
