import itertools

import pytest

from ecosched import oracles
from ecosched.edf import execute_edf
from ecosched.model import GeneratorParams, Instance, Job, ProblemKind, generate_random
from ecosched.power import PowerFunction


class TestYds:
    def test_single_job(self):
        assert oracles.yds([(0, 0.0, 1.0, 2.0)], 2.0).value == pytest.approx(4.0)

    def test_nested_pair_runs_flat(self):
        res = oracles.yds([(0, 0.0, 1.0, 1.0), (1, 0.0, 2.0, 1.0)], 2.0)
        assert res.value == pytest.approx(2.0)
        assert list(res.witness.profile.segments()) == [(0.0, 2.0, 1.0)]

    def test_disjoint_jobs_are_separable(self):
        jobs = [(0, 0.0, 2.0, 1.0), (1, 5.0, 6.0, 3.0)]
        expect = (1.0 / 2.0) ** 2 * 2.0 + 3.0 ** 2 * 1.0
        assert oracles.yds(jobs, 2.0).value == pytest.approx(expect)

    def test_matches_discretized_convex_program(self):
        # cross-check against a fine-grained waterfilling-free LP-ish search:
        # equal time slots, convex cost, volume constraints solved greedily
        jobs = [(0, 0.0, 1.0, 1.0), (1, 0.0, 2.0, 1.0), (2, 0.5, 1.5, 0.4)]
        exact = oracles.yds(jobs, 2.0).value
        approx = _discretized_min_energy(jobs, alpha=2.0, slots=400)
        assert exact <= approx + 1e-6
        assert exact == pytest.approx(approx, rel=2e-2)

    def test_witness_is_deadline_feasible(self):
        for seed in range(1, 11):
            params = GeneratorParams(
                problem=ProblemKind.MIN_ENERGY_SLEEP, n_jobs=7, alpha=2.0, horizon=10.0
            )
            inst = generate_random(params, seed)
            tuples = [(j.id, j.release, j.deadline, j.volume) for j in inst.jobs]
            res = oracles.yds(tuples, 2.0)
            execute_edf(tuples, res.witness.profile)  # raises on violation
            recost = sum(
                s ** 2.0 * (hi - lo) for lo, hi, s in res.witness.blocks
            )
            assert recost == pytest.approx(res.value, abs=1e-9)


def _discretized_min_energy(jobs, alpha, slots):
    """Greedy marginal-cost filling on a uniform time grid (independent of
    the critical-interval recursion)."""
    t_lo = min(j[1] for j in jobs)
    t_hi = max(j[2] for j in jobs)
    dt = (t_hi - t_lo) / slots
    load = [0.0] * slots
    chunks = 2000
    for jid, r, d, p in sorted(jobs, key=lambda j: j[2]):
        lo = int((r - t_lo) / dt + 1e-9)
        hi = int((d - t_lo) / dt - 1e-9) + 1
        for _ in range(chunks):
            k = min(range(lo, hi), key=lambda i: load[i])
            load[k] += p / chunks / dt
    return sum(v ** alpha * dt for v in load)


class TestAdmissionOracle:
    def base(self, jobs):
        return Instance(
            problem=ProblemKind.ENERGY_PLUS_LOST_VALUE,
            power=PowerFunction(2.0, 0.0),
            jobs=tuple(jobs),
        ).validate()

    def test_rejecting_cheap_job(self):
        inst = self.base([Job(id=0, release=0, deadline=1, volumes=(2.0,), value=1.0)])
        assert oracles.brute_force_energy_value(inst).value == pytest.approx(1.0)

    def test_accepting_valuable_job(self):
        inst = self.base([Job(id=0, release=0, deadline=1, volumes=(2.0,), value=99.0)])
        res = oracles.brute_force_energy_value(inst)
        assert res.value == pytest.approx(4.0)
        assert res.witness.accepted == {0}

    def test_empty(self):
        assert oracles.brute_force_energy_value(self.base([])).value == 0.0

    def test_matches_exhaustive_enumeration(self):
        params = GeneratorParams(
            problem=ProblemKind.ENERGY_PLUS_LOST_VALUE,
            n_jobs=7,
            alpha=2.0,
            horizon=8.0,
            value_range=(0.1, 6.0),
        )
        for seed in (1, 2, 3):
            inst = generate_random(params, seed)
            fast = oracles.brute_force_energy_value(inst).value
            jobs = {j.id: j for j in inst.jobs}
            best = float("inf")
            ids = sorted(jobs)
            for mask in itertools.product([0, 1], repeat=len(ids)):
                acc = [jobs[i] for i, keep in zip(ids, mask) if keep]
                tuples = [(j.id, j.release, j.deadline, j.volume) for j in acc]
                cost = oracles.yds(tuples, 2.0).value if tuples else 0.0
                cost += sum(jobs[i].value for i, keep in zip(ids, mask) if not keep)
                best = min(best, cost)
            assert fast == pytest.approx(best, abs=1e-9)

    def test_size_guard(self):
        params = GeneratorParams(
            problem=ProblemKind.ENERGY_PLUS_LOST_VALUE, n_jobs=13, alpha=2.0
        )
        with pytest.raises(oracles.OracleSizeError):
            oracles.brute_force_energy_value(generate_random(params, 1))


class TestAssignmentOracle:
    def test_empty(self):
        inst = Instance(
            problem=ProblemKind.VALUE_MINUS_ENERGY,
            power=PowerFunction(2.0, 0.0),
            jobs=(),
        ).validate()
        assert oracles.brute_force_value_energy(inst).value == 0.0

    def test_single_job_max_of_reject_accept(self):
        inst = Instance(
            problem=ProblemKind.VALUE_MINUS_ENERGY,
            power=PowerFunction(2.0, 0.0),
            jobs=(Job(id=0, release=0, deadline=1, volumes=(2.0,), value=3.0),),
        ).validate()
        assert oracles.brute_force_value_energy(inst).value == 0.0  # energy 4 > 3
        inst2 = Instance(
            problem=ProblemKind.VALUE_MINUS_ENERGY,
            power=PowerFunction(2.0, 0.0),
            jobs=(Job(id=0, release=0, deadline=1, volumes=(2.0,), value=9.0),),
        ).validate()
        assert oracles.brute_force_value_energy(inst2).value == pytest.approx(5.0)

    def test_splitting_beats_stacking(self):
        inst = Instance(
            problem=ProblemKind.VALUE_MINUS_ENERGY,
            power=PowerFunction(2.0, 0.0),
            machine_count=2,
            jobs=(
                Job(id=0, release=0, deadline=1, volumes=(1.0, 1.0), value=10.0),
                Job(id=1, release=0, deadline=1, volumes=(1.0, 1.0), value=10.0),
            ),
        ).validate()
        res = oracles.brute_force_value_energy(inst)
        assert res.value == pytest.approx(18.0)
        assert set(res.witness.values()) == {0, 1}

    def test_monotone_in_jobs(self):
        params = GeneratorParams(
            problem=ProblemKind.VALUE_MINUS_ENERGY,
            n_jobs=5,
            alpha=2.0,
            machine_count=2,
            horizon=6.0,
        )
        inst = generate_random(params, 4)
        prev = oracles.brute_force_value_energy(
            Instance(
                problem=inst.problem,
                power=inst.power,
                machine_count=2,
                jobs=inst.jobs[:-1],
            ).validate()
        ).value
        full = oracles.brute_force_value_energy(inst).value
        assert full >= prev - 1e-9


class TestSleepLowerBound:
    def test_reduces_to_dynamic_minimum(self):
        inst = Instance(
            problem=ProblemKind.MIN_ENERGY_SLEEP,
            power=PowerFunction(2.0, 0.0),
            jobs=(Job(id=0, release=0, deadline=1, volumes=(2.0,)),),
        ).validate()
        assert oracles.sleep_lower_bound(inst).value == pytest.approx(4.0)

    def test_empty(self):
        inst = Instance(
            problem=ProblemKind.MIN_ENERGY_SLEEP, power=PowerFunction(2.0, 1.0),
            wakeup_cost=1.0, jobs=(),
        ).validate()
        assert oracles.sleep_lower_bound(inst).value == 0.0

    def test_uses_certified_dual_when_larger(self):
        from ecosched import sleep_scaling

        inst = Instance(
            problem=ProblemKind.MIN_ENERGY_SLEEP,
            power=PowerFunction(2.0, 4.0),
            wakeup_cost=1.0,
            jobs=(Job(id=0, release=0, deadline=10, volumes=(2.0,)),),
        ).validate()
        run = sleep_scaling.run_soa(inst)
        lb = oracles.sleep_lower_bound(inst, run)
        assert lb.value == pytest.approx(max(run.dual_lower_bound, 4.0 / 25.0))


class TestGridOracle:
    def flow_instance(self, jobs, g=1.0, wake=1.0):
        return Instance(
            problem=ProblemKind.FLOW_PLUS_ENERGY,
            power=PowerFunction(2.0, g),
            wakeup_cost=wake,
            jobs=tuple(jobs),
        ).validate()

    def test_single_job_brackets_the_calculus_optimum(self):
        inst = self.flow_instance([Job(id=0, release=0.0, volumes=(1.0,), weight=2.0)])
        br = oracles.grid_opt_flow_energy(inst, slots=12, speed_levels=6)
        calc = 1.0 + oracles.solo_flow_optimum(2.0, 1.0, PowerFunction(2.0, 1.0))
        assert br.lower.value <= calc + 1e-9
        assert br.upper.value >= calc - 1e-9
        assert br.upper.value <= 1.3 * calc  # within grid resolution

    def test_empty(self):
        br = oracles.grid_opt_flow_energy(self.flow_instance([]))
        assert br.lower.value == br.upper.value == 0.0

    def test_doubling_slots_never_raises_the_upper_bound(self):
        inst = self.flow_instance(
            [
                Job(id=0, release=0.0, volumes=(1.0,), weight=2.0),
                Job(id=1, release=0.5, volumes=(0.5,), weight=1.0),
            ]
        )
        coarse = oracles.grid_opt_flow_energy(inst, slots=6, speed_levels=6, horizon=8.0)
        fine = oracles.grid_opt_flow_energy(inst, slots=12, speed_levels=6, horizon=8.0)
        assert fine.upper.value <= coarse.upper.value + 1e-9

    def test_size_guard(self):
        jobs = [Job(id=k, release=0.0, volumes=(1.0,), weight=1.0) for k in range(4)]
        with pytest.raises(oracles.OracleSizeError):
            oracles.grid_opt_flow_energy(self.flow_instance(jobs))
