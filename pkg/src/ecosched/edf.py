"""Earliest-deadline-first execution of a given aggregate speed profile."""
from __future__ import annotations

from dataclasses import dataclass

from .stepfn import StepFunction


class DeadlineViolation(RuntimeError):
    pass


@dataclass
class EdfOutcome:
    per_job: dict[int, StepFunction]
    completion: dict[int, float]


def execute_edf(
    jobs: list[tuple[int, float, float, float]],
    speed: StepFunction,
    tol: float = 1e-9,
) -> EdfOutcome:
    """Run ``jobs`` = [(id, release, deadline, volume)] preemptively at the
    given aggregate speed, always serving the earliest pending deadline.

    Raises :class:`DeadlineViolation` if some job cannot finish in time, so a
    successful return doubles as a feasibility certificate for the profile.
    """
    remaining = {j[0]: j[3] for j in jobs}
    info = {j[0]: j for j in jobs}
    events = sorted({j[1] for j in jobs} | set(speed.breakpoints))
    slices: dict[int, list[tuple[float, float, float]]] = {j[0]: [] for j in jobs}
    completion: dict[int, float] = {}

    def pending_at(t: float) -> list[int]:
        return sorted(
            (
                jid
                for jid, rem in remaining.items()
                if rem > tol and info[jid][1] <= t + tol
            ),
            key=lambda jid: (info[jid][2], jid),
        )

    horizon = max([e for e in events] + [speed.end] + [j[2] for j in jobs] or [0.0])
    t = events[0] if events else 0.0
    while t < horizon - tol:
        # completion times accrue float error; snap onto a nearby event so
        # the speed lookup does not straddle a breakpoint
        for e in events:
            if abs(e - t) <= tol * max(1.0, abs(e)):
                t = e
                break
        next_event = min([e for e in events if e > t + tol], default=horizon)
        queue = pending_at(t)
        sigma = speed.value_at(t)
        if not queue or sigma <= 0.0:
            t = next_event
            continue
        jid = queue[0]
        dt_complete = remaining[jid] / sigma
        t_end = min(next_event, t + dt_complete)
        done = sigma * (t_end - t)
        slices[jid].append((t, t_end, sigma))
        remaining[jid] -= done
        if remaining[jid] <= tol * max(1.0, info[jid][3]):
            remaining[jid] = 0.0
            completion[jid] = t_end
            if t_end > info[jid][2] + tol:
                raise DeadlineViolation(
                    f"job {jid} finished at {t_end}, deadline {info[jid][2]}"
                )
        t = t_end
    unfinished = [jid for jid, rem in remaining.items() if rem > tol]
    if unfinished:
        raise DeadlineViolation(f"jobs {unfinished} never completed")
    per_job = {
        jid: StepFunction.from_segments([(a, b, v) for a, b, v in segs])
        for jid, segs in slices.items()
    }
    return EdfOutcome(per_job=per_job, completion=completion)
