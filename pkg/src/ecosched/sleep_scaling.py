"""Single-machine deadline scheduling with a sleep state and wake-up cost.

The planned speed at any instant is the densest prefix of remaining work,
``max over deadlines d of (remaining volume due by d) / (d - t)``.  While
working the machine runs the earliest deadline at that speed, floored at the
critical speed.  With no work it idles, and after ``A/g`` cumulative idle
time since the last wake-up it sleeps; it wakes (paying ``A``) as late as
possible, when the planned speed has risen to the critical speed.

Everything is event driven -- between job releases, completions, budget
expiries and planned wake-ups all quantities are constant -- so the recorded
schedule is exact and the multiplier checks below are meaningful at tight
tolerances.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

from .model import CostBreakdown, Instance, MachineState, ProblemKind, Schedule
from .stepfn import StepFunction


_TOL = 1e-12


@dataclass
class _SimState:
    t: float
    mode: MachineState
    idle_used: float
    remaining: dict[int, tuple[float, float]]  # id -> (volume left, deadline)


@dataclass
class SimResult:
    intervals: list[tuple[float, float, MachineState]]
    slices: dict[int, list[tuple[float, float, float]]]
    completion: dict[int, float]
    wake_count: int
    active_time: float  # working + idle

    def speed_profile(self) -> StepFunction:
        segs = [seg for per_job in self.slices.values() for seg in per_job]
        return StepFunction.from_segments(_merge_contiguous(segs))

    def dynamic_energy(self, alpha: float) -> float:
        return sum(
            v ** alpha * (b - a) for per in self.slices.values() for a, b, v in per
        )


def _merge_contiguous(segs):
    segs = sorted(segs)
    out = []
    for a, b, v in segs:
        if out and math.isclose(out[-1][1], a, abs_tol=1e-12) and out[-1][2] == v:
            out[-1] = (out[-1][0], b, v)
        else:
            out.append((a, b, v))
    return out


def _density(remaining: dict, t: float) -> float:
    """Largest remaining-volume density over deadline prefixes."""
    items = sorted(
        (dl, vol) for vol, dl in remaining.values() if vol > _TOL
    )
    best = 0.0
    cum = 0.0
    for dl, vol in items:
        cum += vol
        if dl <= t + _TOL:
            raise RuntimeError(f"deadline {dl} passed with work left at t={t}")
        best = max(best, cum / (dl - t))
    return best


def _latest_wake(remaining: dict, floor: float) -> float:
    """Latest start so that running at the floor speed meets all deadlines."""
    items = sorted((dl, vol) for vol, dl in remaining.values() if vol > _TOL)
    latest = math.inf
    cum = 0.0
    for dl, vol in items:
        cum += vol
        latest = min(latest, dl - cum / floor)
    return latest


def simulate(
    power,
    wakeup_cost: float,
    arrivals: list[tuple[float, int, float, float]],  # (release, id, volume, deadline)
    init: _SimState | None = None,
    snapshot_hook=None,
) -> SimResult:
    floor = power.critical_speed()
    budget = (wakeup_cost / power.g) if power.g > 0.0 else math.inf
    arrivals = sorted(arrivals)
    state = init or _SimState(t=0.0, mode=MachineState.SLEEP, idle_used=0.0, remaining={})
    t, mode, idle_used = state.t, state.mode, state.idle_used
    remaining = dict(state.remaining)

    intervals: list[tuple[float, float, MachineState]] = []
    slices: dict[int, list[tuple[float, float, float]]] = {jid: [] for jid in remaining}
    completion: dict[int, float] = {}
    wake_count = 0
    active_time = 0.0
    arr_idx = 0

    def record(a: float, b: float, m: MachineState):
        nonlocal active_time
        if b <= a + 0.0:
            return
        if intervals and intervals[-1][2] is m and intervals[-1][1] == a:
            intervals[-1] = (intervals[-1][0], b, m)
        else:
            intervals.append((a, b, m))
        if m is not MachineState.SLEEP:
            active_time += b - a

    def pending() -> bool:
        return any(vol > _TOL for vol, _ in remaining.values())

    def absorb_arrivals(upto: float) -> bool:
        """Insert arrivals at time == upto; returns True if any were added."""
        nonlocal arr_idx
        added = False
        while arr_idx < len(arrivals) and arrivals[arr_idx][0] <= upto + _TOL:
            rel, jid, vol, dl = arrivals[arr_idx]
            remaining[jid] = (vol, dl)
            slices.setdefault(jid, [])
            arr_idx += 1
            added = True
            if snapshot_hook is not None:
                snapshot_hook(
                    jid,
                    _SimState(
                        t=rel, mode=mode, idle_used=idle_used, remaining=dict(remaining)
                    ),
                )
        return added

    def next_arrival() -> float:
        return arrivals[arr_idx][0] if arr_idx < len(arrivals) else math.inf

    guard = 0
    while True:
        guard += 1
        if guard > 200_000:
            raise RuntimeError("simulation failed to make progress")
        absorb_arrivals(t)
        has_work = pending()
        if not has_work and next_arrival() is math.inf:
            break

        if mode is MachineState.WORKING:
            if not has_work:
                mode = MachineState.IDLE
                continue
            dens = _density(remaining, t)
            sigma = max(dens, floor)
            jid = min(
                (j for j, (vol, _) in remaining.items() if vol > _TOL),
                key=lambda j: (remaining[j][1], j),
            )
            vol, dl = remaining[jid]
            t_end = min(t + vol / sigma, next_arrival())
            done = sigma * (t_end - t)
            if t_end > t:
                slices[jid].append((t, t_end, sigma))
                record(t, t_end, MachineState.WORKING)
            if vol - done <= _TOL * max(1.0, vol):
                remaining[jid] = (0.0, dl)
                completion[jid] = t_end
                if t_end > dl + 1e-9:
                    raise RuntimeError(f"job {jid} missed deadline {dl} at {t_end}")
            else:
                remaining[jid] = (vol - done, dl)
            t = t_end
            continue

        if mode is MachineState.IDLE:
            if has_work and _density(remaining, t) >= floor - _TOL:
                mode = MachineState.WORKING
                continue
            t_budget = t + (budget - idle_used) if budget is not math.inf else math.inf
            t_wake = _latest_wake(remaining, floor) if has_work else math.inf
            t_end = min(next_arrival(), t_budget, t_wake)
            assert t_end is not math.inf
            record(t, t_end, MachineState.IDLE)
            idle_used += t_end - t
            t = t_end
            if t_end == t_wake and t_wake <= min(next_arrival(), t_budget):
                mode = MachineState.WORKING
            elif t_end == t_budget and t_budget <= next_arrival():
                mode = MachineState.SLEEP
            continue

        # sleep state: wake as late as the floor-speed plan allows
        if has_work and _density(remaining, t) >= floor - _TOL:
            wake_count += 1
            idle_used = 0.0
            mode = MachineState.WORKING
            continue
        t_wake = _latest_wake(remaining, floor) if has_work else math.inf
        t_end = min(next_arrival(), t_wake)
        record(t, t_end, MachineState.SLEEP)
        t = t_end
        if t_end == t_wake and t_wake <= next_arrival():
            wake_count += 1
            idle_used = 0.0
            mode = MachineState.WORKING

    return SimResult(
        intervals=intervals,
        slices=slices,
        completion=completion,
        wake_count=wake_count,
        active_time=active_time,
    )


# ----------------------------------------------------------------------
# public runs
# ----------------------------------------------------------------------


@dataclass
class SleepRun:
    instance: Instance
    schedule: Schedule
    speed: StepFunction
    lam: dict[int, float]
    lam_case: dict[int, int]  # 1: busy window, 2: gap in window
    beta: float
    breakdown: CostBreakdown
    dual_lower_bound: float
    wake_count: int

    @property
    def primal(self) -> float:
        return self.breakdown.total_primal

    @property
    def reserve_energy(self) -> float:
        """Static plus wake-up energy (the bound's second component)."""
        return self.breakdown.static_energy + self.breakdown.wakeup_energy

    @cached_property
    def dual_bound_certified(self) -> bool:
        return check_multiplier_bounds(self).ok

    def report_dict(self) -> dict:
        return {
            "problem": self.instance.problem.value,
            "primal": self.primal,
            "dual_lower_bound": self.dual_lower_bound,
            "dynamic_energy": self.breakdown.dynamic_energy,
            "reserve_energy": self.reserve_energy,
            "wake_count": self.wake_count,
            "beta": self.beta,
            "lambda": {str(k): v for k, v in sorted(self.lam.items())},
            "state_timeline": self.schedule.timeline_json(0),
        }

    def report_json(self) -> str:
        return json.dumps(self.report_dict(), sort_keys=True, indent=2) + "\n"


def _arrival_tuples(instance: Instance):
    return [(j.release, j.id, j.volume, j.deadline) for j in instance.jobs]


def run_oa(instance: Instance) -> Schedule:
    """No static draw, no wake cost: plain densest-prefix speed scaling."""
    if instance.power.g != 0.0 or instance.wakeup_cost != 0.0:
        raise ValueError("run_oa requires g == 0 and wake-up cost 0")
    sim = simulate(instance.power, 0.0, _arrival_tuples(instance))
    return _schedule_from(sim)


def _schedule_from(sim: SimResult) -> Schedule:
    per_job = {
        jid: StepFunction.from_segments(_merge_contiguous(segs))
        for jid, segs in sim.slices.items()
    }
    return Schedule(
        per_job_speed=per_job,
        assignment={jid: 0 for jid in sim.slices},
        state_timeline={0: sim.intervals},
        completion_times=dict(sim.completion),
    )


def oa_closed_form_speed(pending: dict[int, tuple[float, float]], t: float) -> float:
    """Independent oracle: max over deadlines of remaining volume per unit
    time.  ``pending`` maps id -> (remaining volume, deadline)."""
    best = 0.0
    items = sorted((dl, vol) for vol, dl in pending.values() if vol > 0.0)
    cum = 0.0
    for dl, vol in items:
        cum += vol
        if dl > t:
            best = max(best, cum / (dl - t))
    return best


def closed_form_gap(instance: Instance, schedule: Schedule, samples: int = 7) -> float:
    """Sup-norm gap between the executed speed and the closed-form speed,
    probed inside every constant-speed cell of the timeline."""
    speed = _aggregate_speed(schedule)
    cuts = sorted(
        set(speed.breakpoints)
        | {j.release for j in instance.jobs}
        | {j.deadline for j in instance.jobs}
    )
    jobs = {j.id: j for j in instance.jobs}
    worst = 0.0
    for a, b in zip(cuts, cuts[1:]):
        if b - a <= 1e-9:  # float-dust cell around a shared boundary
            continue
        for k in range(1, samples + 1):
            t = a + (b - a) * k / (samples + 1)
            pending = {}
            for jid, j in jobs.items():
                if j.release > t:
                    continue
                done = schedule.per_job_speed.get(jid, StepFunction.zero()).integral(
                    j.release, t
                )
                rem = j.volume - done
                if rem > 1e-9:
                    pending[jid] = (rem, j.deadline)
            worst = max(worst, abs(speed.value_at(t) - oa_closed_form_speed(pending, t)))
    return worst


def _aggregate_speed(schedule: Schedule) -> StepFunction:
    # canonical per-job profiles carry zero-valued filler across preemption
    # gaps; drop it or the pieces overlap other jobs' work
    segs = [
        (a, b, v)
        for f in schedule.per_job_speed.values()
        for a, b, v in f.segments()
        if v > 0
    ]
    return StepFunction.from_segments(_merge_contiguous(segs))


def run_soa(instance: Instance) -> SleepRun:
    if instance.problem is not ProblemKind.MIN_ENERGY_SLEEP:
        raise ValueError(f"wrong problem kind {instance.problem}")
    power, A = instance.power, instance.wakeup_cost
    snapshots: dict[int, _SimState] = {}
    sim = simulate(
        power, A, _arrival_tuples(instance),
        snapshot_hook=lambda jid, st: snapshots.setdefault(jid, st),
    )
    schedule = _schedule_from(sim)
    speed = sim.speed_profile()
    alpha = power.alpha
    e_dyn = sim.dynamic_energy(alpha)
    e_static = power.g * sim.active_time
    e_wake = A * sim.wake_count
    beta = alpha ** (1.0 - alpha)

    lam: dict[int, float] = {}
    case: dict[int, int] = {}
    for j in instance.jobs:
        busy = _busy_throughout(speed, j.release, j.deadline)
        case[j.id] = 1 if busy else 2
        ghost = simulate(power, A, [], init=snapshots[j.id])
        own = ghost.slices.get(j.id, [])
        dyn = sum(v ** alpha * (b - a) for a, b, v in own)
        if busy:
            lam[j.id] = beta * dyn / j.volume
        else:
            stat = power.g * sum(b - a for a, b, _ in own)
            lam[j.id] = (dyn + stat) / j.volume

    breakdown = CostBreakdown(
        dynamic_energy=e_dyn,
        static_energy=e_static,
        wakeup_energy=e_wake,
        total_primal=e_dyn + e_static + e_wake,
    )
    dual_lb = e_dyn / alpha ** alpha + (e_static + e_wake) / 4.0
    return SleepRun(
        instance=instance,
        schedule=schedule,
        speed=speed,
        lam=lam,
        lam_case=case,
        beta=beta,
        breakdown=breakdown,
        dual_lower_bound=dual_lb,
        wake_count=sim.wake_count,
    )


def _busy_throughout(speed: StepFunction, a: float, b: float) -> bool:
    return speed.min_on(a, min(b, speed.end) if speed.end > a else b) > 0.0 and (
        speed.end >= b - _TOL
    )


# ----------------------------------------------------------------------
# runtime verification
# ----------------------------------------------------------------------


@dataclass
class MultiplierReport:
    worst_busy_margin: float  # min over grid of beta*P'(s(t)) - lam_j (case 1)
    worst_gap_error: float  # max |lam_j - P(s_c)/s_c| relative (case 2)

    @property
    def ok(self) -> bool:
        return self.worst_busy_margin >= -1e-6 and self.worst_gap_error <= 1e-6


def check_multiplier_bounds(run_: SleepRun, grid: int = 64) -> MultiplierReport:
    """Case 1 (machine busy across the window): the multiplier must sit below
    beta * P'(speed) at every instant of the window.  Case 2 (the window has
    a gap): the multiplier must equal the critical energy rate exactly."""
    power = run_.instance.power
    busy_margin = math.inf
    gap_err = 0.0
    rate = power.idle_cost_rate()
    for j in run_.instance.jobs:
        if run_.lam_case[j.id] == 1:
            r, d = j.release, j.deadline
            for k in range(grid + 1):
                t = min(r + (d - r) * k / grid, d - (d - r) * 1e-12)
                margin = run_.beta * power.deriv(run_.speed.value_at(t)) - run_.lam[j.id]
                busy_margin = min(busy_margin, margin)
        else:
            err = abs(run_.lam[j.id] - rate) / max(1.0, rate)
            gap_err = max(gap_err, err)
    if busy_margin is math.inf:
        busy_margin = 0.0
    return MultiplierReport(worst_busy_margin=busy_margin, worst_gap_error=gap_err)


@dataclass
class SleepCertificate:
    primal: float
    bound: float
    ratio_bound: float

    @property
    def ok(self) -> bool:
        return self.primal <= self.ratio_bound * self.bound + 1e-6


def competitive_certificate(run_: SleepRun, opt_lower_bound: float) -> SleepCertificate:
    alpha = run_.instance.power.alpha
    return SleepCertificate(
        primal=run_.primal,
        bound=opt_lower_bound,
        ratio_bound=max(4.0, alpha ** alpha),
    )
