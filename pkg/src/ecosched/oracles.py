"""Exact and bounding offline baselines for desk-scale ratio measurement."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Optional

from .model import Instance, ProblemKind
from .power import PowerFunction
from .stepfn import StepFunction


class OracleKind(enum.Enum):
    EXACT = "exact"
    LOWER_BOUND = "lower_bound"
    UPPER_BOUND = "upper_bound"


@dataclass
class OracleResult:
    value: float
    kind: OracleKind
    method: str
    witness: Optional[object] = None


class OracleSizeError(ValueError):
    pass


# ----------------------------------------------------------------------
# minimum dynamic energy for deadline work (classic critical-interval method)
# ----------------------------------------------------------------------


@dataclass
class YdsWitness:
    profile: StepFunction
    blocks: list[tuple[float, float, float]]


def yds(jobs: list[tuple[int, float, float, float]], alpha: float) -> OracleResult:
    """Minimal integral of speed**alpha completing [(id, r, d, p)] on time.

    Repeatedly fixes the densest interval: candidates have release/deadline
    endpoints; the interval's free measure (time not claimed by an earlier,
    denser round) is the denominator.  Exact for convex dynamic power.
    """
    remaining = list(jobs)
    blocked: list[tuple[float, float, float]] = []  # disjoint (lo, hi, speed)

    def free_measure(a: float, b: float) -> float:
        used = sum(min(hi, b) - max(lo, a) for lo, hi, _ in blocked if min(hi, b) > max(lo, a))
        return (b - a) - used

    while remaining:
        best = None
        releases = sorted({j[1] for j in remaining})
        deadlines = sorted({j[2] for j in remaining})
        for a in releases:
            for b in deadlines:
                if b <= a:
                    continue
                vol = sum(p for _, r, d, p in remaining if r >= a and d <= b)
                if vol == 0.0:
                    continue
                free = free_measure(a, b)
                if free <= 1e-12:
                    continue  # cannot be optimal: a wider candidate is denser
                inten = vol / free
                key = (inten, -(b - a), a)
                if best is None or key > best[0]:
                    best = (key, a, b, inten)
        assert best is not None
        _, a, b, speed = best
        # claim the free sub-intervals of [a, b]
        cursor = a
        new_blocks = []
        for lo, hi, _ in sorted(blocked):
            if hi <= a or lo >= b:
                continue
            if lo > cursor:
                new_blocks.append((cursor, min(lo, b), speed))
            cursor = max(cursor, hi)
        if cursor < b:
            new_blocks.append((cursor, b, speed))
        blocked.extend(new_blocks)
        remaining = [j for j in remaining if not (j[1] >= a and j[2] <= b)]

    profile = StepFunction.from_segments(blocked)
    energy = sum(s ** alpha * (hi - lo) for lo, hi, s in blocked)
    return OracleResult(
        value=energy,
        kind=OracleKind.EXACT,
        method="critical-interval",
        witness=YdsWitness(profile=profile, blocks=sorted(blocked)),
    )


def _deadline_tuples(instance: Instance, machine: int = 0):
    return [(j.id, j.release, j.deadline, j.volumes[machine]) for j in instance.jobs]


# ----------------------------------------------------------------------
# admission problems: enumerate / branch-and-bound over completion sets
# ----------------------------------------------------------------------


@dataclass
class AdmissionWitness:
    accepted: frozenset
    profile: StepFunction


def brute_force_energy_value(instance: Instance, max_jobs: int = 12) -> OracleResult:
    """Exact optimum of energy plus forfeited value on one machine.

    Branch and bound over completion subsets; the bound uses monotonicity of
    the minimum energy in the job set.  Adversary energy is dynamic-only, so
    the oracle requires g == 0.
    """
    if len(instance.jobs) > max_jobs:
        raise OracleSizeError(f"n={len(instance.jobs)} exceeds guard {max_jobs}")
    if instance.power.g != 0.0:
        raise OracleSizeError("oracle defined for dynamic-only power (g == 0)")
    alpha = instance.power.alpha
    jobs = _deadline_tuples(instance)
    by_id = {j[0]: j for j in jobs}
    values = {j.id: j.value for j in instance.jobs}
    order = sorted(values, key=lambda jid: -values[jid])

    all_in = yds(jobs, alpha)
    best_val = min(all_in.value, sum(values.values()))
    best_set = frozenset(by_id) if all_in.value <= sum(values.values()) else frozenset()

    def descend(idx: int, accepted: list[int], lost: float):
        nonlocal best_val, best_set
        bound = (yds([by_id[j] for j in accepted], alpha).value if accepted else 0.0) + lost
        if bound >= best_val - 1e-15:
            return
        if idx == len(order):
            best_val, best_set = bound, frozenset(accepted)
            return
        jid = order[idx]
        accepted.append(jid)
        descend(idx + 1, accepted, lost)
        accepted.pop()
        descend(idx + 1, accepted, lost + values[jid])

    descend(0, [], 0.0)
    profile = (
        yds([by_id[j] for j in best_set], alpha).witness.profile
        if best_set
        else StepFunction.zero()
    )
    return OracleResult(
        value=best_val,
        kind=OracleKind.EXACT,
        method="subset-bnb",
        witness=AdmissionWitness(accepted=best_set, profile=profile),
    )


def brute_force_value_energy(
    instance: Instance, max_jobs: int = 8, max_machines: int = 2
) -> OracleResult:
    """Exact optimum of collected value minus (unit-speed, dynamic) energy for
    unrelated machines, by enumerating all reject/assign choices."""
    n, m = len(instance.jobs), instance.machine_count
    if n > max_jobs or m > max_machines:
        raise OracleSizeError(f"n={n}, m={m} exceeds guard")
    if instance.power.g != 0.0:
        raise OracleSizeError("oracle defined for dynamic-only power (g == 0)")
    alpha = instance.power.alpha
    energy_memo: dict[tuple[int, frozenset], float] = {}

    def machine_energy(machine: int, ids: frozenset) -> float:
        key = (machine, ids)
        if key not in energy_memo:
            tuples = [
                (j.id, j.release, j.deadline, j.volumes[machine])
                for j in instance.jobs
                if j.id in ids
            ]
            energy_memo[key] = yds(tuples, alpha).value if tuples else 0.0
        return energy_memo[key]

    best = 0.0
    best_assign: dict[int, int] = {}
    choices = [None] + list(range(m))
    for combo in itertools.product(choices, repeat=n):
        sets: list[set] = [set() for _ in range(m)]
        value = 0.0
        for job, pick in zip(instance.jobs, combo):
            if pick is not None:
                sets[pick].add(job.id)
                value += job.value
        value -= sum(machine_energy(i, frozenset(sets[i])) for i in range(m))
        if value > best:
            best = value
            best_assign = {
                job.id: pick for job, pick in zip(instance.jobs, combo) if pick is not None
            }
    return OracleResult(
        value=best,
        kind=OracleKind.EXACT,
        method="assignment-enumeration",
        witness=best_assign,
    )


# ----------------------------------------------------------------------
# power-down problems: bounds only
# ----------------------------------------------------------------------


def sleep_lower_bound(instance: Instance, run=None) -> OracleResult:
    """max(dynamic-only minimum energy, the run's certified dual bound)."""
    dyn = yds(_deadline_tuples(instance), instance.power.alpha).value if instance.jobs else 0.0
    value = dyn
    method = "dynamic-only"
    if run is not None and getattr(run, "dual_bound_certified", False):
        if run.dual_lower_bound > value:
            value = run.dual_lower_bound
            method = "dual-bound"
    return OracleResult(value=value, kind=OracleKind.LOWER_BOUND, method=method)


def solo_flow_optimum(weight: float, volume: float, power: PowerFunction) -> float:
    """Optimal flow-plus-energy cost of one job alone, excluding wake cost.

    The job starts at release (waiting only adds flow) and runs at constant
    speed s minimizing (w + g + s**alpha)/s, i.e. (alpha-1) s**alpha = w + g.
    """
    a = power.alpha
    if a <= 1.0:
        raise ValueError("needs alpha > 1")
    s = ((weight + power.g) / (a - 1.0)) ** (1.0 / a)
    return volume * (weight + power.g + s ** a) / s


@dataclass
class GridBracket:
    lower: OracleResult
    upper: OracleResult


@dataclass
class GridSchedule:
    slot_len: float
    choices: list[tuple[str, int, float]]  # per slot: (kind, job id, speed)
    cost: float


def grid_opt_flow_energy(
    instance: Instance,
    slots: int = 12,
    speed_levels: int = 6,
    horizon: Optional[float] = None,
) -> GridBracket:
    """Bracket the offline flow-plus-energy optimum of a tiny instance.

    Upper bound: cheapest schedule in a finite family -- per slot the machine
    sleeps, idles, or runs one job at one of ``speed_levels`` grid speeds --
    costed exactly as a continuous schedule.  Lower bound: the wake cost plus
    the best single-job relaxation (every job's flow and processing energy is
    at least its solo optimum).
    """
    n = len(instance.jobs)
    if n > 3 or slots > 16 or speed_levels > 8:
        raise OracleSizeError("grid oracle limited to n<=3, slots<=16, levels<=8")
    power, A = instance.power, instance.wakeup_cost
    if n == 0:
        zero = OracleResult(0.0, OracleKind.LOWER_BOUND, "empty")
        return GridBracket(zero, OracleResult(0.0, OracleKind.UPPER_BOUND, "empty"))

    lb_core = max(solo_flow_optimum(j.weight, j.volume, power) for j in instance.jobs)
    lower = OracleResult(A + lb_core, OracleKind.LOWER_BOUND, "solo-job relaxation")

    max_r = max(j.release for j in instance.jobs)
    total_p = sum(j.volume for j in instance.jobs)
    speeds = [max(power.critical_speed(), 1e-9)] + [
        max((sum(jj.weight for jj in instance.jobs[k:])) ** (1.0 / power.alpha), 1e-9)
        for k in range(n)
    ]
    sigma_hi = 2.0 * max(speeds)
    if horizon is None:
        horizon = max_r + total_p / max(min(speeds), 1e-9) + 1.0
    dt = horizon / slots
    unit = sigma_hi / speed_levels  # speed of one level
    # quantise volumes upward: completing more volume only strengthens the bound
    units = [max(1, math.ceil(j.volume / (unit * dt) - 1e-12)) for j in instance.jobs]
    if sum(units) > speed_levels * slots:
        raise OracleSizeError("grid too coarse to fit the workload")

    jobs = list(instance.jobs)
    rel_slot = [min(slots, math.ceil(j.release / dt - 1e-12)) for j in jobs]

    # forward DP over (remaining units per job, machine-awake flag)
    start = (tuple(units), False)
    layer: dict[tuple, tuple[float, Optional[tuple]]] = {start: (0.0, None)}
    parents: list[dict] = []
    for k in range(slots):
        t0 = k * dt
        nxt: dict[tuple, tuple[float, Optional[tuple]]] = {}
        parent: dict = {}

        def relax(state, cost, prev, move):
            if state not in nxt or cost < nxt[state][0] - 1e-15:
                nxt[state] = (cost, None)
                parent[state] = (prev, move)

        for (rem, awake), (cost, _) in layer.items():
            pending = [i for i in range(n) if rem[i] > 0]
            flow_base = sum(
                jobs[i].weight * (t0 + dt - max(jobs[i].release, t0))
                for i in pending
                if jobs[i].release < t0 + dt
            )
            # sleep (only if nothing started mid-slot needs the machine now)
            relax((rem, False), cost + flow_base, (rem, awake), ("sleep", -1, 0.0))
            # idle awake
            wake = A if not awake else 0.0
            relax(
                (rem, True),
                cost + flow_base + power.g * dt + wake,
                (rem, awake),
                ("idle", -1, 0.0),
            )
            # work on one released job at one level
            for i in pending:
                if rel_slot[i] > k:
                    continue
                for lvl in range(1, speed_levels + 1):
                    done = min(rem[i], lvl)
                    frac = done / lvl  # completing mid-slot shortens i's flow
                    flow = flow_base
                    if done == rem[i]:
                        flow -= jobs[i].weight * (dt - frac * dt) * (
                            1.0 if jobs[i].release <= t0 + frac * dt else 0.0
                        )
                    speed = lvl * unit
                    energy = (speed ** power.alpha + power.g) * frac * dt
                    energy += power.g * (dt - frac * dt)  # idle remainder of slot
                    new_rem = tuple(
                        rem[q] - done if q == i else rem[q] for q in range(n)
                    )
                    relax(
                        (new_rem, True),
                        cost + flow + energy + wake,
                        (rem, awake),
                        ("work", i, speed),
                    )
        layer = nxt
        parents.append(parent)

    finished = {
        st: cv for st, cv in layer.items() if all(u == 0 for u in st[0])
    }
    if not finished:
        raise OracleSizeError("no feasible grid schedule within the horizon")
    best_state = min(finished, key=lambda st: finished[st][0])
    best_cost = finished[best_state][0]

    choices: list[tuple[str, int, float]] = []
    state = best_state
    for k in range(slots - 1, -1, -1):
        prev, move = parents[k][state]
        choices.append(move)
        state = prev
    choices.reverse()
    upper = OracleResult(
        value=best_cost,
        kind=OracleKind.UPPER_BOUND,
        method=f"slot-dp({slots}x{speed_levels})",
        witness=GridSchedule(slot_len=dt, choices=choices, cost=best_cost),
    )
    return GridBracket(lower=lower, upper=upper)
