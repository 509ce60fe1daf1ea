"""Bound certificates and cross-problem batch reporting.

A certificate packages a run's objective value, its dual (or oracle) bound,
the claimed worst-case ratio for the problem, and the raw margins of every
runtime check.  The verdict is CERTIFIED only when all gating checks pass
and the ratio inequality holds; margins are stored raw so tolerances can be
revisited without re-running anything.
"""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from typing import Optional

from . import energy_value, flow_energy, sleep_scaling, value_energy
from .model import Instance, ProblemKind
from .oracles import OracleResult
from .stepfn import feq


class Verdict(enum.Enum):
    CERTIFIED = "certified"
    INFORMATIONAL_ONLY = "informational_only"
    FAILED = "failed"


def claimed_bound(problem: ProblemKind, alpha: float, epsilon: Optional[float] = None) -> float:
    """Worst-case performance ratio guaranteed for each problem."""
    if problem is ProblemKind.ENERGY_PLUS_LOST_VALUE:
        return alpha ** alpha
    if problem is ProblemKind.VALUE_MINUS_ENERGY:
        if epsilon is None or epsilon <= 0.0:
            raise ValueError("value-minus-energy bound needs epsilon > 0")
        return 1.0 / epsilon
    if problem is ProblemKind.MIN_ENERGY_SLEEP:
        return max(4.0, alpha ** alpha)
    if problem is ProblemKind.FLOW_PLUS_ENERGY:
        if alpha <= 1.0:
            raise ValueError("flow-plus-energy bound needs alpha > 1")
        return max(64.0, 32.0 * alpha / math.log(alpha))
    raise ValueError(problem)


@dataclass
class Certificate:
    problem: ProblemKind
    primal: float
    dual_or_bound: float
    claimed_ratio: float
    observed_ratio: float
    lemma_checks: dict[str, float] = field(default_factory=dict)
    verdict: Verdict = Verdict.FAILED
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "problem": self.problem.value,
            "primal": self.primal,
            "dual_or_bound": self.dual_or_bound,
            "claimed_ratio": self.claimed_ratio,
            "observed_ratio": self.observed_ratio,
            "lemma_checks": dict(sorted(self.lemma_checks.items())),
            "verdict": self.verdict.value,
            "notes": list(self.notes),
        }


def _ratio_ok(problem: ProblemKind, primal, bound, claimed) -> tuple[float, bool]:
    """Observed ratio and whether it satisfies the claim, oriented per
    problem (the value problem maximizes, the rest minimize)."""
    if problem is ProblemKind.VALUE_MINUS_ENERGY:
        # claim: primal >= bound / claimed  (bound overestimates the optimum)
        if primal <= 0.0 and bound <= 1e-9:
            return 1.0, True
        ratio = bound / primal if primal > 0.0 else math.inf
        return ratio, primal >= bound / claimed - 1e-6
    if primal == 0.0 and bound == 0.0:
        return 1.0, True
    ratio = primal / bound if bound > 0.0 else math.inf
    return ratio, primal <= claimed * bound + 1e-6


def certify(run, oracle: Optional[OracleResult] = None) -> Certificate:
    """Assemble a certificate from a finished run, re-running its checks."""
    if isinstance(run, energy_value.EnergyValueRun):
        return _certify_energy_value(run, oracle)
    if isinstance(run, value_energy.ValueEnergyRun):
        return _certify_value_energy(run, oracle)
    if isinstance(run, sleep_scaling.SleepRun):
        return _certify_sleep(run, oracle)
    if isinstance(run, flow_energy.FlowRun):
        return _certify_flow(run, oracle)
    raise TypeError(f"unknown run type {type(run)!r}")


def _finish(cert: Certificate, gates_ok: bool, informational: bool) -> Certificate:
    _, ok = _ratio_ok(
        cert.problem, cert.primal, cert.dual_or_bound, cert.claimed_ratio
    )
    if not gates_ok:
        cert.verdict = Verdict.FAILED
    elif informational:
        cert.verdict = Verdict.INFORMATIONAL_ONLY
    elif ok:
        cert.verdict = Verdict.CERTIFIED
    else:
        cert.verdict = Verdict.FAILED
        cert.notes.append("ratio_claim violated")
    return cert


def _certify_energy_value(run, oracle) -> Certificate:
    inst = run.instance
    claimed = claimed_bound(inst.problem, inst.power.alpha)
    induction = energy_value.check_induction_step(run, chunks=200)
    bound = run.dual_certified
    cert = Certificate(
        problem=inst.problem,
        primal=run.primal,
        dual_or_bound=bound,
        claimed_ratio=claimed,
        observed_ratio=_ratio_ok(inst.problem, run.primal, bound, claimed)[0],
        lemma_checks={"induction_max_violation": induction.max_violation},
    )
    gates = induction.ok
    if not gates:
        cert.notes.append("induction_step violated")
    informational = inst.power.g > 0.0
    if informational:
        cert.notes.append("static power present: guarantee stated for pure power")
        gates = True  # report-only in that regime
    if oracle is not None:
        cert.lemma_checks["dual_below_oracle"] = oracle.value - bound
        if bound > oracle.value + 1e-6:
            gates = False
            cert.notes.append("weak_duality violated against exact oracle")
    return _finish(cert, gates, informational)


def _certify_value_energy(run, oracle) -> Certificate:
    inst = run.instance
    claimed = claimed_bound(inst.problem, inst.power.alpha, run.eps)
    feas = value_energy.check_dual_feasibility(run)
    surplus = value_energy.check_surplus_inequality(run)
    bound = oracle.value if oracle is not None else run.dual_upper_bound
    cert = Certificate(
        problem=inst.problem,
        primal=run.alg_value,
        dual_or_bound=bound,
        claimed_ratio=claimed,
        observed_ratio=_ratio_ok(inst.problem, run.alg_value, bound, claimed)[0],
        lemma_checks={
            "dual_feasibility_cover": feas.worst_cover_gap,
            "dual_feasibility_price": feas.worst_price_gap,
            "dual_feasibility_support": -feas.worst_support_eq,
            "surplus_margin": surplus.lhs - surplus.rhs,
        },
    )
    gates = feas.ok and surplus.ok
    if not feas.ok:
        cert.notes.append("dual_feasibility violated")
    if not surplus.ok:
        cert.notes.append("surplus_inequality violated")
    if oracle is not None and run.dual_upper_bound < oracle.value - 1e-6:
        gates = False
        cert.notes.append("weak_duality violated: dual bound below exact optimum")
    informational = run.informational_only
    if informational:
        cert.notes.append("speed discount below guarantee threshold")
        gates = True
    return _finish(cert, gates, informational)


def _certify_sleep(run, oracle) -> Certificate:
    inst = run.instance
    claimed = claimed_bound(inst.problem, inst.power.alpha)
    mult = sleep_scaling.check_multiplier_bounds(run)
    bound = oracle.value if oracle is not None else run.dual_lower_bound
    cert = Certificate(
        problem=inst.problem,
        primal=run.primal,
        dual_or_bound=bound,
        claimed_ratio=claimed,
        observed_ratio=_ratio_ok(inst.problem, run.primal, bound, claimed)[0],
        lemma_checks={
            "multiplier_busy_margin": mult.worst_busy_margin,
            "multiplier_gap_error": -mult.worst_gap_error,
        },
    )
    gates = mult.ok
    if not gates:
        cert.notes.append("multiplier_bounds violated")
    return _finish(cert, gates, informational=False)


def _certify_flow(run, oracle) -> Certificate:
    inst = run.instance
    claimed = claimed_bound(inst.problem, inst.power.alpha)
    rel = flow_energy.check_cost_relations(run)
    decay = flow_energy.check_multiplier_decay(run)
    plan_gap = max(
        (
            abs(p.block_energy - p.flow_at_start) / max(1.0, p.block_energy)
            for p in run.plans
            if not p.clamped
        ),
        default=0.0,
    )
    bound = oracle.value if oracle is not None else None
    cert = Certificate(
        problem=inst.problem,
        primal=run.primal,
        dual_or_bound=bound if bound is not None else 0.0,
        claimed_ratio=claimed,
        observed_ratio=0.0,
        lemma_checks={
            "flow_cover_margin": rel.flow_cover_margin,
            "dyn_cover_margin": rel.dyn_cover_margin,
            "mixed_margin": rel.mixed_margin,
            "decay_margin": decay.worst_margin,
            "plan_balance_gap": -plan_gap,
        },
    )
    gates = rel.ok and decay.ok and plan_gap <= 1e-9
    if not gates:
        cert.notes.append("cost_relations/decay/plan_balance violated")
    informational = bound is None
    if informational:
        cert.notes.append("no offline bound available at this size")
        if bound is None:
            cert.dual_or_bound = 0.0
    else:
        cert.observed_ratio = _ratio_ok(inst.problem, run.primal, bound, claimed)[0]
    return _finish(cert, gates, informational)


def verify_report_consistency(report: dict, fresh: dict) -> list[str]:
    """Compare a stored run report against a deterministic re-run; returns
    the names of fields that disagree (a tampered or stale report)."""
    bad = []
    for key in ("primal", "dual", "lambda", "gamma", "F_star", "dual_lower_bound"):
        if key not in report and key not in fresh:
            continue
        a, b = report.get(key), fresh.get(key)
        if isinstance(a, dict) and isinstance(b, dict):
            if set(a) != set(b) or any(not feq(float(a[k]), float(b[k]), 1e-7) for k in a):
                bad.append(key)
        elif a is None or b is None:
            if a != b:
                bad.append(key)
        elif not feq(float(a), float(b), 1e-7):
            bad.append(key)
    return bad


# ----------------------------------------------------------------------
# batch CSV
# ----------------------------------------------------------------------


CSV_COLUMNS = "seed,n,alpha,g,A,epsilon,problem,primal,bound,ratio,verdict"


@dataclass(frozen=True)
class RowMeta:
    seed: int
    n: int
    alpha: float
    g: float
    A: float
    epsilon: Optional[float]
    problem: str

    def config_key(self):
        return (self.problem, self.alpha, self.g, self.A, self.epsilon or 0.0, self.n)


def batch_report(rows: list[tuple[RowMeta, Certificate]]) -> str:
    """CSV with one line per certificate plus a max-ratio summary line per
    configuration; rows are ordered by (configuration, seed)."""
    out = io.StringIO()
    out.write(CSV_COLUMNS + "\n")
    rows = sorted(rows, key=lambda rc: (rc[0].config_key(), rc[0].seed))
    by_config: dict = {}
    for meta, cert in rows:
        by_config.setdefault(meta.config_key(), []).append((meta, cert))
    for key in sorted(by_config):
        worst = -math.inf
        for meta, cert in by_config[key]:
            out.write(
                f"{meta.seed},{meta.n},{_num(meta.alpha)},{_num(meta.g)},{_num(meta.A)},"
                f"{_num(meta.epsilon) if meta.epsilon is not None else ''},{meta.problem},"
                f"{_num(cert.primal)},{_num(cert.dual_or_bound)},{_num(cert.observed_ratio)},"
                f"{cert.verdict.value}\n"
            )
            worst = max(worst, cert.observed_ratio)
        meta = by_config[key][0][0]
        out.write(
            f"max,{meta.n},{_num(meta.alpha)},{_num(meta.g)},{_num(meta.A)},"
            f"{_num(meta.epsilon) if meta.epsilon is not None else ''},{meta.problem},"
            f",,{_num(worst)},summary\n"
        )
    return out.getvalue()


def _num(x: float) -> str:
    return format(float(x), ".12g")
