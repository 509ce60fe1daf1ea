"""Domain types, instance JSON I/O and the seeded random-instance generator."""
from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from typing import Optional

from .power import PowerFunction
from .stepfn import StepFunction


class ValidationError(ValueError):
    """Raised with a field path when an instance violates an invariant."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class ProblemKind(enum.Enum):
    ENERGY_PLUS_LOST_VALUE = "energy_plus_lost_value"
    VALUE_MINUS_ENERGY = "value_minus_energy"
    MIN_ENERGY_SLEEP = "min_energy_sleep"
    FLOW_PLUS_ENERGY = "flow_plus_energy"


class MachineState(enum.Enum):
    WORKING = "working"
    IDLE = "idle"
    SLEEP = "sleep"


@dataclass(frozen=True)
class Job:
    """One unit of demand.

    ``volumes`` has one entry per machine (length 1 except for the
    unrelated-machines problem).  ``deadline`` is absent for the flow-time
    problem and mandatory otherwise.  ``value`` is the reward forfeited or
    collected by admission decisions; ``weight`` scales flow-time.
    """

    id: int
    release: float
    volumes: tuple[float, ...]
    deadline: Optional[float] = None
    value: float = 0.0
    weight: float = 0.0

    @property
    def volume(self) -> float:
        """Single-machine volume accessor."""
        if len(self.volumes) != 1:
            raise ValueError(f"job {self.id} has {len(self.volumes)} volumes")
        return self.volumes[0]

    @property
    def density(self) -> float:
        """weight per unit of (single-machine) volume."""
        return self.weight / self.volume

    def validate(self, path: str) -> None:
        if self.release < 0.0:
            raise ValidationError(f"{path}.release", "must be >= 0")
        if self.deadline is not None and not self.deadline > self.release:
            raise ValidationError(f"{path}.deadline", "must exceed release")
        if not self.volumes:
            raise ValidationError(f"{path}.volumes", "must be nonempty")
        for k, p in enumerate(self.volumes):
            if not p > 0.0:
                raise ValidationError(f"{path}.volumes[{k}]", "must be > 0")
        if self.value < 0.0:
            raise ValidationError(f"{path}.value", "must be >= 0")
        if self.weight < 0.0:
            raise ValidationError(f"{path}.weight", "must be >= 0")


@dataclass(frozen=True)
class Instance:
    problem: ProblemKind
    power: PowerFunction
    jobs: tuple[Job, ...]
    wakeup_cost: float = 0.0
    machine_count: int = 1
    epsilon: Optional[float] = None

    def validate(self) -> "Instance":
        if self.machine_count < 1:
            raise ValidationError("machines", "must be >= 1")
        if self.problem is not ProblemKind.VALUE_MINUS_ENERGY and self.machine_count != 1:
            raise ValidationError("machines", f"must be 1 for {self.problem.value}")
        if self.wakeup_cost < 0.0:
            raise ValidationError("wakeup_cost", "must be >= 0")
        if (
            self.problem
            in (ProblemKind.ENERGY_PLUS_LOST_VALUE, ProblemKind.VALUE_MINUS_ENERGY)
            and self.wakeup_cost != 0.0
        ):
            raise ValidationError("wakeup_cost", f"must be 0 for {self.problem.value}")
        if self.epsilon is not None and not 0.0 < self.epsilon < 1.0:
            raise ValidationError("epsilon", "must lie in (0, 1)")
        seen = set()
        needs_deadline = self.problem is not ProblemKind.FLOW_PLUS_ENERGY
        for i, job in enumerate(self.jobs):
            path = f"jobs[{i}] (id {job.id})"
            job.validate(path)
            if job.id in seen:
                raise ValidationError(f"{path}.id", "duplicate id")
            seen.add(job.id)
            if len(job.volumes) != self.machine_count:
                raise ValidationError(
                    f"{path}.volumes", f"needs {self.machine_count} entries"
                )
            if needs_deadline and job.deadline is None:
                raise ValidationError(f"{path}.deadline", "required for this problem")
            if not needs_deadline and job.deadline is not None:
                raise ValidationError(
                    f"{path}.deadline", "not allowed for the flow-time problem"
                )
        return self

    def jobs_by_id(self) -> dict[int, Job]:
        return {j.id: j for j in self.jobs}


@dataclass
class CostBreakdown:
    """Objective components; fields irrelevant to a problem stay 0."""

    dynamic_energy: float = 0.0
    static_energy: float = 0.0
    wakeup_energy: float = 0.0
    lost_value: float = 0.0
    collected_value: float = 0.0
    weighted_flowtime: float = 0.0
    total_primal: float = 0.0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Schedule:
    """Executed schedule: per-job speeds, assignment and machine timelines."""

    per_job_speed: dict[int, StepFunction] = field(default_factory=dict)
    assignment: dict[int, object] = field(default_factory=dict)  # machine id or "rejected"
    state_timeline: dict[int, list[tuple[float, float, MachineState]]] = field(
        default_factory=dict
    )
    completion_times: dict[int, float] = field(default_factory=dict)

    def timeline_json(self, machine: int = 0) -> list[dict]:
        return [
            {"from": a, "to": b, "state": st.value}
            for a, b, st in self.state_timeline.get(machine, [])
        ]


# ----------------------------------------------------------------------
# JSON I/O  (schema field names are a wire contract; keep exact)
# ----------------------------------------------------------------------


def load_instance(data: bytes | str) -> Instance:
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ValidationError("$", f"malformed JSON: {exc}") from exc
    return instance_from_dict(raw)


def instance_from_dict(raw: dict) -> Instance:
    try:
        problem = ProblemKind(raw["problem"])
    except (KeyError, ValueError) as exc:
        raise ValidationError("problem", f"unknown problem kind: {exc}") from exc
    pw = raw.get("power", {})
    try:
        power = PowerFunction(alpha=float(pw["alpha"]), g=float(pw.get("g", 0.0)))
    except (KeyError, TypeError) as exc:
        raise ValidationError("power", str(exc)) from exc
    jobs = []
    for i, j in enumerate(raw.get("jobs", [])):
        try:
            jobs.append(
                Job(
                    id=int(j["id"]),
                    release=float(j["release"]),
                    deadline=None if j.get("deadline") is None else float(j["deadline"]),
                    volumes=tuple(float(p) for p in j["volumes"]),
                    value=float(j.get("value", 0.0)),
                    weight=float(j.get("weight", 0.0)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"jobs[{i}]", str(exc)) from exc
    inst = Instance(
        problem=problem,
        power=power,
        jobs=tuple(jobs),
        wakeup_cost=float(raw.get("wakeup_cost", 0.0)),
        machine_count=int(raw.get("machines", 1)),
        epsilon=None if raw.get("epsilon") is None else float(raw["epsilon"]),
    )
    return inst.validate()


def instance_to_dict(inst: Instance) -> dict:
    out: dict = {
        "problem": inst.problem.value,
        "power": {"alpha": inst.power.alpha, "g": inst.power.g},
        "wakeup_cost": inst.wakeup_cost,
        "machines": inst.machine_count,
        "jobs": [],
    }
    if inst.epsilon is not None:
        out["epsilon"] = inst.epsilon
    for j in inst.jobs:
        job: dict = {"id": j.id, "release": j.release, "volumes": list(j.volumes)}
        if j.deadline is not None:
            job["deadline"] = j.deadline
        if j.value:
            job["value"] = j.value
        if j.weight:
            job["weight"] = j.weight
        out["jobs"].append(job)
    return out


def save_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), sort_keys=True, indent=2) + "\n"


# ----------------------------------------------------------------------
# seeded generator
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorParams:
    problem: ProblemKind
    n_jobs: int
    alpha: float
    g: float = 0.0
    wakeup_cost: float = 0.0
    machine_count: int = 1
    horizon: float = 20.0
    volume_range: tuple[float, float] = (0.2, 2.0)
    value_range: tuple[float, float] = (0.1, 20.0)
    weight_range: tuple[float, float] = (0.1, 5.0)
    epsilon: Optional[float] = None

    def validate(self) -> "GeneratorParams":
        if self.horizon <= 0.0:
            raise ValidationError("horizon", "must be > 0")
        for name, rng in (
            ("volume_range", self.volume_range),
            ("value_range", self.value_range),
            ("weight_range", self.weight_range),
        ):
            lo, hi = rng
            if lo > hi:
                raise ValidationError(name, "min exceeds max")
            if lo <= 0.0:
                raise ValidationError(name, "must be positive")
        return self


def generate_random(params: GeneratorParams, seed: int) -> Instance:
    """Deterministic instance draw: releases uniform on [0, horizon), window
    lengths uniform on (0, horizon], volumes/values/weights uniform in their
    ranges."""
    params.validate()
    rng = random.Random(seed)
    with_deadlines = params.problem is not ProblemKind.FLOW_PLUS_ENERGY
    uses_value = params.problem in (
        ProblemKind.ENERGY_PLUS_LOST_VALUE,
        ProblemKind.VALUE_MINUS_ENERGY,
    )
    jobs = []
    for i in range(params.n_jobs):
        release = rng.uniform(0.0, params.horizon)
        length = params.horizon - rng.uniform(0.0, params.horizon)  # in (0, horizon]
        volumes = tuple(
            rng.uniform(*params.volume_range) for _ in range(params.machine_count)
        )
        jobs.append(
            Job(
                id=i,
                release=release,
                deadline=release + length if with_deadlines else None,
                volumes=volumes,
                value=rng.uniform(*params.value_range) if uses_value else 0.0,
                weight=(
                    rng.uniform(*params.weight_range)
                    if params.problem is ProblemKind.FLOW_PLUS_ENERGY
                    else 0.0
                ),
            )
        )
    inst = Instance(
        problem=params.problem,
        power=PowerFunction(params.alpha, params.g),
        jobs=tuple(jobs),
        wakeup_cost=params.wakeup_cost,
        machine_count=params.machine_count,
        epsilon=params.epsilon,
    )
    return inst.validate()
