import json

import pytest

from ecosched.model import (
    GeneratorParams,
    Instance,
    Job,
    ProblemKind,
    ValidationError,
    generate_random,
    load_instance,
    save_instance,
)
from ecosched.power import PowerFunction

MINIMAL = {
    "problem": "energy_plus_lost_value",
    "power": {"alpha": 2, "g": 0},
    "wakeup_cost": 0,
    "machines": 1,
    "jobs": [{"id": 0, "release": 0.0, "deadline": 1.0, "volumes": [2.0], "value": 5.0}],
}


class TestLoadInstance:
    def test_minimal_single_job(self):
        inst = load_instance(json.dumps(MINIMAL))
        assert len(inst.jobs) == 1
        assert inst.jobs[0].volume == 2.0
        assert inst.power.alpha == 2.0

    def test_malformed_json(self):
        with pytest.raises(ValidationError):
            load_instance(b"{nope")

    def test_deadline_before_release_names_the_job(self):
        bad = json.loads(json.dumps(MINIMAL))
        bad["jobs"][0]["deadline"] = -1.0
        with pytest.raises(ValidationError, match=r"jobs\[0\].*deadline"):
            load_instance(json.dumps(bad))

    def test_two_machine_instance(self):
        raw = {
            "problem": "value_minus_energy",
            "power": {"alpha": 2, "g": 0},
            "wakeup_cost": 0,
            "machines": 2,
            "jobs": [
                {"id": 0, "release": 0.0, "deadline": 1.0, "volumes": [2.0, 3.0], "value": 5.0}
            ],
        }
        inst = load_instance(json.dumps(raw))
        assert inst.machine_count == 2
        assert inst.jobs[0].volumes == (2.0, 3.0)

    def test_volumes_must_match_machine_count(self):
        bad = json.loads(json.dumps(MINIMAL))
        bad["jobs"][0]["volumes"] = [1.0, 1.0]
        with pytest.raises(ValidationError, match="volumes"):
            load_instance(json.dumps(bad))

    def test_multi_machine_only_for_value_problem(self):
        bad = json.loads(json.dumps(MINIMAL))
        bad["machines"] = 2
        bad["jobs"][0]["volumes"] = [1.0, 1.0]
        with pytest.raises(ValidationError, match="machines"):
            load_instance(json.dumps(bad))

    def test_wakeup_cost_forbidden_for_admission_problems(self):
        bad = json.loads(json.dumps(MINIMAL))
        bad["wakeup_cost"] = 3.0
        with pytest.raises(ValidationError, match="wakeup_cost"):
            load_instance(json.dumps(bad))

    def test_flow_problem_rejects_deadlines(self):
        bad = {
            "problem": "flow_plus_energy",
            "power": {"alpha": 2, "g": 1},
            "wakeup_cost": 1,
            "machines": 1,
            "jobs": [{"id": 0, "release": 0.0, "deadline": 2.0, "volumes": [1.0], "weight": 1.0}],
        }
        with pytest.raises(ValidationError, match="deadline"):
            load_instance(json.dumps(bad))

    def test_deadline_required_elsewhere(self):
        bad = json.loads(json.dumps(MINIMAL))
        del bad["jobs"][0]["deadline"]
        with pytest.raises(ValidationError, match="deadline"):
            load_instance(json.dumps(bad))


def test_serialization_round_trip():
    params = GeneratorParams(
        problem=ProblemKind.MIN_ENERGY_SLEEP, n_jobs=7, alpha=2.0, g=1.5, wakeup_cost=2.0
    )
    inst = generate_random(params, 11)
    again = load_instance(save_instance(inst))
    assert again == inst


def test_density_accessor():
    j = Job(id=0, release=0.0, volumes=(2.0,), weight=3.0)
    assert j.density == 1.5


class TestGenerator:
    def test_deterministic_bytes(self):
        params = GeneratorParams(
            problem=ProblemKind.ENERGY_PLUS_LOST_VALUE, n_jobs=9, alpha=2.0
        )
        a = save_instance(generate_random(params, 123))
        b = save_instance(generate_random(params, 123))
        assert a == b

    def test_different_seed_differs(self):
        params = GeneratorParams(
            problem=ProblemKind.ENERGY_PLUS_LOST_VALUE, n_jobs=9, alpha=2.0
        )
        assert save_instance(generate_random(params, 1)) != save_instance(
            generate_random(params, 2)
        )

    def test_empty_instance_is_valid(self):
        params = GeneratorParams(problem=ProblemKind.FLOW_PLUS_ENERGY, n_jobs=0, alpha=2.0, g=1.0, wakeup_cost=1.0)
        inst = generate_random(params, 5)
        assert inst.jobs == ()

    def test_generated_instances_validate(self):
        for kind, kwargs in [
            (ProblemKind.ENERGY_PLUS_LOST_VALUE, {}),
            (ProblemKind.VALUE_MINUS_ENERGY, {"machine_count": 2}),
            (ProblemKind.MIN_ENERGY_SLEEP, {"g": 2.0, "wakeup_cost": 1.0}),
            (ProblemKind.FLOW_PLUS_ENERGY, {"g": 2.0, "wakeup_cost": 1.0}),
        ]:
            params = GeneratorParams(problem=kind, n_jobs=20, alpha=2.0, **kwargs)
            inst = generate_random(params, 7)
            inst.validate()
            for j in inst.jobs:
                assert 0.0 <= j.release <= params.horizon
                if j.deadline is not None:
                    assert j.deadline > j.release

    def test_degenerate_range_rejected(self):
        params = GeneratorParams(
            problem=ProblemKind.ENERGY_PLUS_LOST_VALUE,
            n_jobs=3,
            alpha=2.0,
            volume_range=(2.0, 1.0),
        )
        with pytest.raises(ValidationError):
            generate_random(params, 1)


def test_instance_invariants_direct():
    with pytest.raises(ValidationError, match="machines"):
        Instance(
            problem=ProblemKind.ENERGY_PLUS_LOST_VALUE,
            power=PowerFunction(2),
            jobs=(),
            machine_count=0,
        ).validate()
    with pytest.raises(ValidationError, match="duplicate"):
        Instance(
            problem=ProblemKind.ENERGY_PLUS_LOST_VALUE,
            power=PowerFunction(2),
            jobs=(
                Job(id=1, release=0.0, deadline=1.0, volumes=(1.0,)),
                Job(id=1, release=0.0, deadline=2.0, volumes=(1.0,)),
            ),
        ).validate()
