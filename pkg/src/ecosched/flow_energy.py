"""Single machine, weighted flow-time plus energy, with a sleep state.

While working the speed tracks the pending weight (``W**(1/alpha)``) unless
that would be less energy-efficient than the critical speed, in which case
the critical speed is used; the highest-density pending job runs first.
With little pending weight the machine waits: it plans a single critical-
speed block in density order and starts it exactly when the block's energy
equals the weighted flow-time it causes, re-planning on every arrival.  Idle
time is budgeted as in the deadline model: after ``A/g`` cumulative idle the
machine sleeps, waking (cost ``A``) at the planned start.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .model import CostBreakdown, Instance, MachineState, ProblemKind, Schedule
from .stepfn import StepFunction

_TOL = 1e-12


@dataclass
class PlanRecord:
    created_at: float
    start: float
    block_energy: float
    flow_at_start: float
    clamped: bool

    @property
    def balanced(self) -> bool:
        gap = abs(self.block_energy - self.flow_at_start)
        return gap <= 1e-9 * max(1.0, self.block_energy)


@dataclass
class FlowRun:
    instance: Instance
    schedule: Schedule
    speed: StepFunction
    lam: dict[int, float]
    breakdown: CostBreakdown
    weight_profile: StepFunction
    plans: list[PlanRecord]
    wake_count: int

    @property
    def primal(self) -> float:
        return self.breakdown.total_primal

    def report_dict(self) -> dict:
        return {
            "problem": self.instance.problem.value,
            "primal": self.primal,
            "F_star": self.breakdown.weighted_flowtime,
            "dynamic_energy": self.breakdown.dynamic_energy,
            "static_energy": self.breakdown.static_energy,
            "transition_energy": self.breakdown.wakeup_energy,
            "wake_count": self.wake_count,
            "lambda": {str(k): v for k, v in sorted(self.lam.items())},
            "state_timeline": self.schedule.timeline_json(0),
        }

    def report_json(self) -> str:
        return json.dumps(self.report_dict(), sort_keys=True, indent=2) + "\n"


def _weight_trigger(power, W: float) -> float:
    a = power.alpha
    return (a / (a - 1.0)) * W ** ((a - 1.0) / a)


def lambda_of_job(
    job_id: int,
    pending: list[tuple[int, float, float, float]],  # (id, remaining, weight, volume)
    power,
) -> float:
    """Multiplier frozen at a job's arrival from the pending-work snapshot.

    Pending jobs are ranked by non-increasing density (weight per remaining...
    per original volume), ties by id.  The multiplier prices the job's own
    weighted delay, the delay it inflicts on less dense work, and the
    critical-speed energy its volume may force."""
    order = sorted(pending, key=lambda it: (-(it[2] / it[3]), it[0]))
    ids = [it[0] for it in order]
    pos = ids.index(job_id)
    suffix_w = [0.0] * (len(order) + 1)
    for k in range(len(order) - 1, -1, -1):
        suffix_w[k] = suffix_w[k + 1] + order[k][2]
    a = power.alpha
    me = order[pos]
    if me[2] == 0.0:
        own = pushed = 0.0  # weightless jobs price no delay
    else:
        own = me[2] * sum(
            order[k][1] / suffix_w[k] ** (1.0 / a) for k in range(pos + 1)
        )
        pushed = suffix_w[pos + 1] * me[1] / suffix_w[pos] ** (1.0 / a)
    forced = power.idle_cost_rate() * me[1]  # 0 when g == 0 (no speed floor)
    return (own + pushed + forced) / me[3]


def run(instance: Instance) -> FlowRun:
    if instance.problem is not ProblemKind.FLOW_PLUS_ENERGY:
        raise ValueError(f"wrong problem kind {instance.problem}")
    power, A = instance.power, instance.wakeup_cost
    if power.alpha <= 1.0:
        raise ValueError("the weight-indexed speed rule needs alpha > 1")
    floor = power.critical_speed()
    bound = power.idle_cost_rate()
    budget = (A / power.g) if power.g > 0.0 else math.inf

    jobs = {j.id: j for j in instance.jobs}
    arrivals = sorted((j.release, j.id) for j in instance.jobs)
    arr_idx = 0
    remaining: dict[int, float] = {}
    t = 0.0
    mode = MachineState.SLEEP
    idle_used = 0.0
    wake_count = 0
    active_time = 0.0
    intervals: list[tuple[float, float, MachineState]] = []
    slices: dict[int, list[tuple[float, float, float]]] = {}
    completion: dict[int, float] = {}
    lam: dict[int, float] = {}
    plans: list[PlanRecord] = []
    plan_start: float | None = None

    def record(a0: float, b0: float, m: MachineState):
        nonlocal active_time
        if b0 <= a0:
            return
        if intervals and intervals[-1][2] is m and intervals[-1][1] == a0:
            intervals[-1] = (intervals[-1][0], b0, m)
        else:
            intervals.append((a0, b0, m))
        if m is not MachineState.SLEEP:
            active_time += b0 - a0

    def pending_ids() -> list[int]:
        return [j for j, rem in remaining.items() if rem > _TOL]

    def total_weight() -> float:
        return sum(jobs[j].weight for j in pending_ids())

    def next_arrival() -> float:
        return arrivals[arr_idx][0] if arr_idx < len(arrivals) else math.inf

    def absorb_arrivals():
        nonlocal arr_idx, plan_start
        added = False
        while arr_idx < len(arrivals) and arrivals[arr_idx][0] <= t + _TOL:
            _, jid = arrivals[arr_idx]
            remaining[jid] = jobs[jid].volume
            slices.setdefault(jid, [])
            snapshot = [
                (q, remaining[q], jobs[q].weight, jobs[q].volume)
                for q in pending_ids()
            ]
            lam[jid] = lambda_of_job(jid, snapshot, power)
            arr_idx += 1
            added = True
        if added:
            plan_start = None  # any previous plan is void
        return added

    def make_plan():
        """Single critical-speed block in density order; start when its
        energy equals the weighted flow-time it causes (never in the past)."""
        nonlocal plan_start
        assert floor > 0.0
        order = sorted(
            pending_ids(), key=lambda j: (-(jobs[j].weight / jobs[j].volume), j)
        )
        offsets = []
        acc = 0.0
        for j in order:
            acc += remaining[j] / floor
            offsets.append(acc)
        energy = power(floor) * acc
        w_tot = sum(jobs[j].weight for j in order)
        skew = sum(
            jobs[j].weight * (off - jobs[j].release)
            for j, off in zip(order, offsets)
        )
        start = (energy - skew) / w_tot
        clamped = start < t
        if clamped:
            start = t
        flow_at_start = w_tot * start + skew
        plans.append(PlanRecord(t, start, energy, flow_at_start, clamped))
        plan_start = start

    guard = 0
    while True:
        guard += 1
        if guard > 200_000:
            raise RuntimeError("simulation failed to make progress")
        absorb_arrivals()
        work = pending_ids()
        if not work and next_arrival() is math.inf:
            break

        if mode is MachineState.WORKING:
            if not work:
                mode = MachineState.IDLE
                plan_start = None
                continue
            W = total_weight()
            sigma = W ** (1.0 / power.alpha) if _weight_trigger(power, W) > bound else floor
            jid = min(work, key=lambda j: (-(jobs[j].weight / jobs[j].volume), j))
            t_end = min(t + remaining[jid] / sigma, next_arrival())
            done = sigma * (t_end - t)
            if t_end > t:
                slices[jid].append((t, t_end, sigma))
                record(t, t_end, MachineState.WORKING)
            if remaining[jid] - done <= _TOL * max(1.0, jobs[jid].volume):
                remaining[jid] = 0.0
                completion[jid] = t_end
            else:
                remaining[jid] -= done
            t = t_end
            continue

        # waiting states: idle and sleep share the wake policy
        if work:
            W = total_weight()
            if _weight_trigger(power, W) > bound:
                if mode is MachineState.SLEEP:
                    wake_count += 1
                    idle_used = 0.0
                mode = MachineState.WORKING
                continue
            if plan_start is None:
                make_plan()
            if plan_start <= t + _TOL:
                if mode is MachineState.SLEEP:
                    wake_count += 1
                    idle_used = 0.0
                mode = MachineState.WORKING
                continue
        t_target = plan_start if work else math.inf
        if mode is MachineState.IDLE:
            t_budget = t + (budget - idle_used) if budget is not math.inf else math.inf
            t_end = min(next_arrival(), t_budget, t_target)
            record(t, t_end, MachineState.IDLE)
            idle_used += t_end - t
            t = t_end
            if t_end == t_budget and t_budget < min(next_arrival(), t_target):
                mode = MachineState.SLEEP
        else:
            t_end = min(next_arrival(), t_target)
            record(t, t_end, MachineState.SLEEP)
            t = t_end

    # assemble outputs
    per_job = {
        jid: StepFunction.from_segments(segs) for jid, segs in slices.items()
    }
    speed_segs = sorted(seg for segs in slices.values() for seg in segs)
    speed = StepFunction.from_segments(_coalesce(speed_segs))
    schedule = Schedule(
        per_job_speed=per_job,
        assignment={jid: 0 for jid in slices},
        state_timeline={0: intervals},
        completion_times=dict(completion),
    )
    e_dyn = sum(v ** power.alpha * (b - a) for segs in slices.values() for a, b, v in segs)
    e_static = power.g * active_time
    e_wake = A * wake_count
    flow = sum(j.weight * (completion[j.id] - j.release) for j in instance.jobs)
    breakdown = CostBreakdown(
        dynamic_energy=e_dyn,
        static_energy=e_static,
        wakeup_energy=e_wake,
        weighted_flowtime=flow,
        total_primal=e_dyn + e_static + e_wake + flow,
    )
    wp = _weight_profile(instance, completion)
    return FlowRun(
        instance=instance,
        schedule=schedule,
        speed=speed,
        lam=lam,
        breakdown=breakdown,
        weight_profile=wp,
        plans=plans,
        wake_count=wake_count,
    )


def _coalesce(segs):
    out = []
    for a, b, v in segs:
        if out and out[-1][1] == a and out[-1][2] == v:
            out[-1] = (out[-1][0], b, v)
        else:
            out.append((a, b, v))
    return out


def _weight_profile(instance: Instance, completion: dict[int, float]) -> StepFunction:
    cuts = sorted(
        {j.release for j in instance.jobs} | set(completion.values())
    )
    segs = []
    for a, b in zip(cuts, cuts[1:]):
        w = sum(
            j.weight
            for j in instance.jobs
            if j.release <= a and completion[j.id] > a
        )
        segs.append((a, b, w))
    return StepFunction.from_segments(segs)


# ----------------------------------------------------------------------
# runtime verification
# ----------------------------------------------------------------------


@dataclass
class CostRelationReport:
    flow_cover_margin: float  # 2 E1 + 3 E2 - F
    dyn_cover_margin: float  # sum lam*p - E1
    mixed_margin: float  # sum lam*p - (7/8 E1 + 1/16 F - 3/16 E2)

    @property
    def ok(self) -> bool:
        return (
            self.flow_cover_margin >= -1e-6
            and self.dyn_cover_margin >= -1e-6
            and self.mixed_margin >= -1e-6
        )


def check_cost_relations(run_: FlowRun) -> CostRelationReport:
    """Aggregate inequalities tying the multipliers to the schedule cost:
    twice the dynamic plus thrice the static energy covers the flow-time,
    and the priced volumes cover the dynamic energy (hence a mixed form)."""
    bd = run_.breakdown
    e1, e2, f = bd.dynamic_energy, bd.static_energy, bd.weighted_flowtime
    lam_dot_p = sum(
        run_.lam[j.id] * j.volume for j in run_.instance.jobs
    )
    return CostRelationReport(
        flow_cover_margin=2.0 * e1 + 3.0 * e2 - f,
        dyn_cover_margin=lam_dot_p - e1,
        mixed_margin=lam_dot_p - (7.0 / 8.0 * e1 + f / 16.0 - 3.0 / 16.0 * e2),
    )


@dataclass
class DecayReport:
    worst_margin: float  # min over samples of rhs - lhs

    @property
    def ok(self) -> bool:
        return self.worst_margin >= -1e-6


def check_multiplier_decay(run_: FlowRun, grid: int = 100) -> DecayReport:
    """After its arrival a job's multiplier, discounted by its density times
    the elapsed time, must stay below the pending-weight trigger bound."""
    power = run_.instance.power
    rate = power.idle_cost_rate()
    worst = math.inf
    horizon = max(
        [run_.speed.end]
        + [c for c in run_.schedule.completion_times.values()]
        + [j.release for j in run_.instance.jobs]
    )
    for j in run_.instance.jobs:
        lam = run_.lam[j.id]
        dens = j.weight / j.volume
        t_hi = horizon if dens == 0.0 else min(horizon, j.release + lam / max(dens, 1e-12))
        ts = {j.release + (t_hi - j.release) * k / grid for k in range(grid + 1)}
        ts |= {b for b in run_.weight_profile.breakpoints if j.release <= b <= t_hi}
        for t in sorted(ts):
            W = run_.weight_profile.value_at(t)
            rhs = max(_weight_trigger(power, W) + rate if W > 0 else rate, 2.0 * rate)
            lhs = lam - dens * (t - j.release)
            worst = min(worst, rhs - lhs)
    if worst is math.inf:
        worst = 0.0
    return DecayReport(worst_margin=worst)


@dataclass
class FlowCertificate:
    primal: float
    opt_bound: float
    ratio_bound: float

    @property
    def ok(self) -> bool:
        return self.primal <= self.ratio_bound * self.opt_bound + 1e-6


def competitive_certificate(run_: FlowRun, oracle_upper: float) -> FlowCertificate:
    a = run_.instance.power.alpha
    if a <= 1.0:
        raise ValueError("ratio bound needs alpha > 1")
    return FlowCertificate(
        primal=run_.primal,
        opt_bound=oracle_upper,
        ratio_bound=max(64.0, 32.0 * a / math.log(a)),
    )
