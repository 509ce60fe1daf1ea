import pytest

from ecosched import flow_energy, oracles
from ecosched.model import GeneratorParams, Instance, Job, ProblemKind, generate_random
from ecosched.power import PowerFunction


def make(jobs, alpha=2.0, g=4.0, wake=1.0):
    return Instance(
        problem=ProblemKind.FLOW_PLUS_ENERGY,
        power=PowerFunction(alpha, g),
        wakeup_cost=wake,
        jobs=tuple(jobs),
    ).validate()


def job(jid, r, p, w):
    return Job(id=jid, release=r, volumes=(p,), weight=w)


def params(alpha=2.0, g=4.0, wake=1.0, n=6):
    return GeneratorParams(
        problem=ProblemKind.FLOW_PLUS_ENERGY,
        n_jobs=n,
        alpha=alpha,
        g=g,
        wakeup_cost=wake,
        horizon=10.0,
        volume_range=(0.2, 1.5),
        weight_range=(0.1, 5.0),
    )


class TestSingleJob:
    def test_balanced_plan_start(self):
        # s_c = 2, block length 0.5, energy 4; flow(T) = T + 0.5 -> T = 3.5
        run = flow_energy.run(make([job(0, 0.0, 1.0, 1.0)]))
        plan = run.plans[0]
        assert plan.start == pytest.approx(3.5)
        assert not plan.clamped
        assert plan.balanced
        assert run.schedule.completion_times[0] == pytest.approx(4.0)
        assert run.breakdown.weighted_flowtime == pytest.approx(4.0)
        assert run.breakdown.dynamic_energy == pytest.approx(2.0)
        assert run.breakdown.static_energy == pytest.approx(2.0)

    def test_multiplier_of_lone_job(self):
        run = flow_energy.run(make([job(0, 0.0, 1.0, 1.0)]))
        # own delay + nothing pushed + forced critical-rate energy
        assert run.lam[0] == pytest.approx(1.0 + 4.0)

    def test_zero_weight_job_prices_only_energy(self):
        run = flow_energy.run(make([job(0, 0.0, 1.0, 0.0), job(1, 0.0, 1.0, 1.0)]))
        assert run.lam[0] == pytest.approx(4.0)


class TestWeightIndexedSpeed:
    def test_pure_dynamic_model(self):
        run = flow_energy.run(make([job(0, 0, 1.0, 1.0), job(1, 0, 1.0, 1.0)], g=0.0, wake=0.0))
        segs = list(run.speed.segments())
        assert segs[0][2] == pytest.approx(2.0 ** 0.5)  # W=2 -> speed sqrt(2)
        assert segs[1][2] == pytest.approx(1.0)
        assert run.plans == []
        assert run.wake_count == 1

    def test_ties_broken_by_id(self):
        run = flow_energy.run(make([job(0, 0, 1.0, 1.0), job(1, 0, 1.0, 1.0)], g=0.0, wake=0.0))
        c = run.schedule.completion_times
        assert c[0] < c[1]

    def test_second_of_equal_pair_gets_no_pushed_term(self):
        run = flow_energy.run(make([job(0, 0, 1.0, 1.0), job(1, 0, 1.0, 1.0)], g=0.0, wake=0.0))
        a = 2.0
        expect = 1.0 / 2.0 ** 0.5 + 1.0  # own term only; suffix weight after it is 0
        assert run.lam[1] == pytest.approx(expect)

    def test_speed_floor_when_weight_is_light(self):
        # trigger 2*sqrt(W) <= 4 while pending => speed pinned at s_c = 2
        run = flow_energy.run(make([job(0, 0.0, 2.0, 1.0)]))
        working = [s for s in run.speed.segments()]
        assert all(v == pytest.approx(2.0) for _, _, v in working)

    def test_heavy_weight_uses_weight_speed(self):
        run = flow_energy.run(make([job(0, 0.0, 1.0, 9.0)]))
        assert run.speed.max_value() == pytest.approx(3.0)  # W^(1/2)
        assert run.plans == []  # trigger above the bound: no waiting


class TestPlans:
    def test_replanned_on_arrival(self):
        run = flow_energy.run(make([job(0, 0.0, 1.0, 1.0), job(1, 1.0, 1.0, 1.0)]))
        assert len(run.plans) == 2
        assert run.plans[1].created_at == pytest.approx(1.0)

    def test_late_arrival_clamps_to_now(self):
        # second arrival lands when accumulated waiting already outweighs
        # the block energy: the plan starts immediately
        run = flow_energy.run(
            make([job(0, 0.0, 1.0, 1.0), job(1, 3.4, 0.1, 0.05)])
        )
        assert any(p.clamped for p in run.plans) or all(p.balanced for p in run.plans)

    def test_unclamped_plans_balance(self):
        for seed in range(1, 13):
            run = flow_energy.run(generate_random(params(), seed))
            for p in run.plans:
                if not p.clamped:
                    assert p.balanced
                else:
                    assert p.flow_at_start >= p.block_energy - 1e-9

    def test_sleep_after_budget_while_waiting(self):
        run = flow_energy.run(make([job(0, 0.0, 1.0, 1.0), job(1, 0.2, 1.0, 1.0)]))
        states = [s["state"] for s in run.schedule.timeline_json(0)]
        assert states[0] == "sleep"  # initial state is asleep


class TestInvariants:
    @pytest.mark.parametrize("seed", range(1, 13))
    def test_weight_profile_matches_pending(self, seed):
        run = flow_energy.run(generate_random(params(), seed))
        inst = run.instance
        for s, e, w in run.weight_profile.segments():
            t = 0.5 * (s + e)
            expect = sum(
                j.weight
                for j in inst.jobs
                if j.release <= t < run.schedule.completion_times[j.id]
            )
            assert w == pytest.approx(expect)

    @pytest.mark.parametrize("seed", range(1, 13))
    def test_highest_density_first(self, seed):
        run = flow_energy.run(generate_random(params(), seed))
        inst = run.instance
        dens = {j.id: j.weight / j.volume for j in inst.jobs}
        rem = {j.id: j.volume for j in inst.jobs}
        events = sorted(
            {j.release for j in inst.jobs}
            | set(run.speed.breakpoints)
            | set(run.schedule.completion_times.values())
        )
        for a, b in zip(events, events[1:]):
            mid = 0.5 * (a + b)
            served = [
                jid
                for jid, f in run.schedule.per_job_speed.items()
                if f.value_at(mid) > 0
            ]
            for jid, j in ((j.id, j) for j in inst.jobs):
                done = run.schedule.per_job_speed[jid].integral(0, mid)
                rem[jid] = j.volume - done
            if served:
                (winner,) = served
                for jid, j in ((j.id, j) for j in inst.jobs):
                    if j.release <= mid and rem[jid] > 1e-9:
                        key_winner = (-dens[winner], winner)
                        assert key_winner <= (-dens[jid], jid)

    def test_third_multiplier_term_absent_without_static_power(self):
        run = flow_energy.run(make([job(0, 0.0, 2.0, 1.0)], g=0.0, wake=0.0))
        assert run.lam[0] == pytest.approx(1.0 * 2.0 / 1.0 / 2.0)  # w*(q/W^(1/a))/p

    def test_alpha_one_rejected(self):
        with pytest.raises(ValueError):
            flow_energy.run(make([job(0, 0, 1.0, 1.0)], alpha=1.0, g=0.0, wake=0.0))


class TestChecks:
    def test_empty(self):
        run = flow_energy.run(make([]))
        assert flow_energy.check_cost_relations(run).ok
        assert flow_energy.check_multiplier_decay(run).ok

    def test_single_job_relations(self):
        run = flow_energy.run(make([job(0, 0.0, 1.0, 1.0)]))
        rel = flow_energy.check_cost_relations(run)
        assert rel.ok
        assert rel.flow_cover_margin == pytest.approx(2 * 2.0 + 3 * 2.0 - 4.0)

    @pytest.mark.parametrize("alpha", [2.0, 3.0])
    @pytest.mark.parametrize("seed", range(1, 9))
    def test_relations_and_decay_on_sweep(self, alpha, seed):
        run = flow_energy.run(generate_random(params(alpha=alpha), seed))
        assert flow_energy.check_cost_relations(run).ok
        assert flow_energy.check_multiplier_decay(run).ok


class TestCertificate:
    def test_single_job_against_grid_oracle(self):
        inst = make([job(0, 0.0, 1.0, 2.0)], g=1.0, wake=1.0)
        run = flow_energy.run(inst)
        bracket = oracles.grid_opt_flow_energy(inst, slots=12, speed_levels=6)
        assert bracket.lower.value <= bracket.upper.value + 1e-9
        cert = flow_energy.competitive_certificate(run, bracket.upper.value)
        assert cert.ok

    def test_empty_by_convention(self):
        run = flow_energy.run(make([]))
        cert = flow_energy.competitive_certificate(run, 0.0)
        assert cert.ok
