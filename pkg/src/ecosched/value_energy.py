"""Unrelated machines, maximize collected value minus discounted energy.

The scheduler runs with a speed discount: processing at speed ``z`` draws
``P((1-eps) z)``.  At each arrival the job's volume is water-filled on every
machine in parallel (price-synchronized, which decomposes into independent
per-machine fills); machines where the price cap binds first drop out, the
job is assigned to the surviving machine with the cheapest volume price, or
rejected if none survives.  Virtual fills stay in every machine's load
profile either way -- they are what the dual multipliers price.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

from .edf import execute_edf
from .model import CostBreakdown, Instance, MachineState, ProblemKind, Schedule
from .power import conjugate_gain
from .stepfn import StepFunction, pointwise_sum, upper_envelope
from .waterfill import FillBinding, fill


@dataclass(frozen=True)
class DiscountPricing:
    """Level -> marginal discounted power, with its analytic inverse."""

    alpha: float
    g: float
    eps: float

    def price(self, level: float) -> float:
        z = (1.0 - self.eps) * level
        return self.alpha * z ** (self.alpha - 1.0) if z > 0.0 else (
            1.0 if self.alpha == 1.0 else 0.0
        )

    def level_of_price(self, price: float) -> float:
        if self.alpha == 1.0:
            raise ValueError("constant price map has no inverse")
        return (price / self.alpha) ** (1.0 / (self.alpha - 1.0)) / (1.0 - self.eps)


@dataclass
class ValueEnergyRun:
    instance: Instance
    eps: float
    accepted: dict[int, int]  # job id -> machine
    lam: dict[tuple[int, int], float]  # (machine, job) -> multiplier
    gamma: dict[int, float]
    load_profiles: list[StepFunction]  # virtual, per machine
    u_profiles: dict[tuple[int, int], StepFunction]
    load_snapshots: dict[tuple[int, int], StepFunction]  # after the job's fill
    speed_profiles: list[StepFunction]  # committed, per machine
    schedule: Schedule
    breakdown: CostBreakdown
    dual_value: float  # surplus-inequality right side (see check below)
    dual_upper_bound: float  # certified bound on the unit-power optimum
    informational_only: bool

    @property
    def alg_value(self) -> float:
        return self.breakdown.total_primal

    def discounted_energy(self, machine: int) -> float:
        P = self.instance.power
        s = self.speed_profiles[machine]
        return sum(
            (((1.0 - self.eps) * v) ** P.alpha + P.g) * (e - b)
            for b, e, v in s.segments()
            if v > 0
        )

    def report_dict(self) -> dict:
        return {
            "problem": self.instance.problem.value,
            "epsilon": self.eps,
            "primal": self.alg_value,
            "dual": self.dual_value,
            "dual_upper_bound": self.dual_upper_bound,
            "ratio_bound": 1.0 / self.eps if self.eps > 0 else None,
            "accepted": {str(j): m for j, m in sorted(self.accepted.items())},
            "lambda": {f"{m},{j}": v for (m, j), v in sorted(self.lam.items())},
            "gamma": {str(j): v for j, v in sorted(self.gamma.items())},
            "collected_value": self.breakdown.collected_value,
            "energy_per_machine": [
                self.discounted_energy(i) for i in range(self.instance.machine_count)
            ],
            "informational_only": self.informational_only,
        }

    def report_json(self) -> str:
        return json.dumps(self.report_dict(), sort_keys=True, indent=2) + "\n"


def run(instance: Instance) -> ValueEnergyRun:
    if instance.problem is not ProblemKind.VALUE_MINUS_ENERGY:
        raise ValueError(f"wrong problem kind {instance.problem}")
    power = instance.power
    eps_min = power.epsilon_of()
    eps = instance.epsilon if instance.epsilon is not None else eps_min
    informational = False
    if eps < eps_min - 1e-12:
        warnings.warn(
            f"speed discount eps={eps} below the guarantee threshold {eps_min}; "
            "certificates are informational only",
            stacklevel=2,
        )
        informational = True
    pricing = DiscountPricing(power.alpha, power.g, eps)
    inverse = pricing.level_of_price if power.alpha > 1.0 else None
    m = instance.machine_count

    loads = [StepFunction.zero() for _ in range(m)]
    committed: list[list[StepFunction]] = [[] for _ in range(m)]
    accepted: dict[int, int] = {}
    lam: dict[tuple[int, int], float] = {}
    gamma: dict[int, float] = {}
    u_profiles: dict[tuple[int, int], StepFunction] = {}
    snapshots: dict[tuple[int, int], StepFunction] = {}

    for job in sorted(instance.jobs, key=lambda j: (j.release, j.id)):
        window = (job.release, job.deadline)
        survivors = []
        for i in range(m):
            vol = job.volumes[i]
            res = fill(
                loads[i], window, vol,
                price_cap=job.value / vol,
                price_of_level=pricing.price, level_of_price=inverse,
            )
            lam[(i, job.id)] = pricing.price(res.level)
            u_profiles[(i, job.id)] = res.increment
            loads[i] = loads[i] + res.increment
            snapshots[(i, job.id)] = loads[i]
            if res.binding is FillBinding.VOLUME_MET:
                survivors.append(i)
        if survivors:
            best = min(survivors, key=lambda i: job.volumes[i] * lam[(i, job.id)])
            accepted[job.id] = best
            gamma[job.id] = job.value - lam[(best, job.id)] * job.volumes[best]
            committed[best].append(u_profiles[(best, job.id)])
        else:
            gamma[job.id] = 0.0

    speeds = [pointwise_sum(committed[i]) for i in range(m)]
    schedule = _build_schedule(instance, speeds, accepted, u_profiles)
    run_ = ValueEnergyRun(
        instance=instance,
        eps=eps,
        accepted=accepted,
        lam=lam,
        gamma=gamma,
        load_profiles=loads,
        u_profiles=u_profiles,
        load_snapshots=snapshots,
        speed_profiles=speeds,
        schedule=schedule,
        breakdown=CostBreakdown(),
        dual_value=0.0,
        dual_upper_bound=0.0,
        informational_only=informational,
    )
    collected = sum(j.value for j in instance.jobs if j.id in accepted)
    energy = sum(run_.discounted_energy(i) for i in range(m))
    dyn = sum(
        sum((((1.0 - eps) * v) ** power.alpha) * (e - b) for b, e, v in s.segments())
        for s in speeds
    )
    run_.breakdown = CostBreakdown(
        dynamic_energy=dyn,
        static_energy=energy - dyn,
        collected_value=collected,
        total_primal=collected - energy,
    )
    gamma_sum = sum(gamma.values())
    lam_dot_u = sum(lam[key] * u_profiles[key].total() for key in u_profiles)
    run_.dual_value = (
        gamma_sum
        - sum(_undiscounted_power_integral(power, loads[i]) for i in range(m))
        + lam_dot_u
    )
    # Rigorous upper bound on the unit-power optimum: maximize the Lagrangian
    # directly.  Per machine and instant, the best the adversary can extract
    # against the multiplier envelope is the power conjugate of its price;
    # the admission prices make every remaining term nonpositive.
    run_.dual_upper_bound = gamma_sum
    for i in range(m):
        env = upper_envelope(
            [(j.release, j.deadline, lam[(i, j.id)]) for j in instance.jobs]
        )
        run_.dual_upper_bound += sum(
            conjugate_gain(power, price) * (e - s) for s, e, price in env.segments()
        )
    return run_


def _undiscounted_power_integral(power, profile: StepFunction) -> float:
    return sum(
        (v ** power.alpha + power.g) * (e - s) for s, e, v in profile.segments() if v > 0
    )


def _build_schedule(instance, speeds, accepted, u_profiles) -> Schedule:
    per_job = {}
    completion = {}
    timelines = {}
    for i in range(instance.machine_count):
        tuples = [
            (j.id, j.release, j.deadline, j.volumes[i])
            for j in instance.jobs
            if accepted.get(j.id) == i
        ]
        if tuples:
            completion.update(execute_edf(tuples, speeds[i]).completion)
        timelines[i] = [
            (s, e, MachineState.WORKING if v > 0 else MachineState.IDLE)
            for s, e, v in speeds[i].segments()
        ]
        for j in instance.jobs:
            if accepted.get(j.id) == i:
                per_job[j.id] = u_profiles[(i, j.id)]
    assignment = {
        j.id: accepted.get(j.id, "rejected") for j in instance.jobs
    }
    return Schedule(
        per_job_speed=per_job,
        assignment=assignment,
        state_timeline=timelines,
        completion_times=completion,
    )


# ----------------------------------------------------------------------
# runtime verification
# ----------------------------------------------------------------------


@dataclass
class FeasibilityReport:
    worst_cover_gap: float  # min over (i,j) of gamma_j + p_ij lam_ij - a_j
    worst_price_gap: float  # min over grid of P'((1-eps) u_i(t)) - lam_ij
    worst_support_eq: float  # max |lam_ij - price| on the job's own support

    @property
    def ok(self) -> bool:
        return (
            self.worst_cover_gap >= -1e-6
            and self.worst_price_gap >= -1e-6
            and self.worst_support_eq <= 1e-6
        )


def check_dual_feasibility(run_: ValueEnergyRun, grid: int = 64) -> FeasibilityReport:
    """Every job's value must be covered by gamma_j + p_ij lam_ij on every
    machine, and each multiplier must sit below the discounted marginal power
    of the machine's load at the job's fill time, with equality on its own
    fill support."""
    inst = run_.instance
    pricing = DiscountPricing(inst.power.alpha, inst.power.g, run_.eps)
    cover = price = float("inf")
    support = 0.0
    for job in inst.jobs:
        for i in range(inst.machine_count):
            lam = run_.lam[(i, job.id)]
            cover = min(
                cover, run_.gamma[job.id] + job.volumes[i] * lam - job.value
            )
            snap = run_.load_snapshots[(i, job.id)]
            r, d = job.release, job.deadline
            for k in range(grid + 1):
                t = r + (d - r) * k / grid
                t = min(t, d - (d - r) * 1e-12)
                gap = pricing.price(snap.value_at(t)) - lam
                price = min(price, gap)
            inc = run_.u_profiles[(i, job.id)]
            for s, e, v in inc.segments():
                if v <= 0:
                    continue
                mid = 0.5 * (s + e)
                support = max(
                    support, abs(pricing.price(snap.value_at(mid)) - lam)
                )
    if cover is float("inf"):
        cover = price = 0.0
    return FeasibilityReport(cover, price, support)


@dataclass
class SurplusReport:
    lhs: float
    rhs: float

    @property
    def ok(self) -> bool:
        return self.lhs >= self.rhs - 1e-6


def check_surplus_inequality(run_: ValueEnergyRun) -> SurplusReport:
    """Scaled algorithm surplus vs. the dual objective.

    lhs = (collected value - discounted energy) / eps must dominate
    rhs = sum gamma - sum_i int P(load_i) + sum lam * int u_ij,
    which is the run's dual objective; with the discount at or above the
    power function's threshold this certifies the value guarantee.
    """
    lhs = run_.alg_value / run_.eps if run_.eps > 0 else float("inf")
    return SurplusReport(lhs=lhs, rhs=run_.dual_value)


@dataclass
class ValueCertificate:
    alg_value: float
    opt_value: float
    eps: float

    @property
    def ok(self) -> bool:
        return self.alg_value >= self.eps * self.opt_value - 1e-6


def competitive_certificate(run_: ValueEnergyRun, oracle_value: float) -> ValueCertificate:
    return ValueCertificate(run_.alg_value, oracle_value, run_.eps)
