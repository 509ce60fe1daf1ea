"""Command-line driver: generate, run, certify, sweep, report."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import certify as certify_mod
from . import energy_value, flow_energy, oracles, sleep_scaling, value_energy
from .certify import Certificate, RowMeta, Verdict, batch_report, claimed_bound
from .model import (
    GeneratorParams,
    Instance,
    ProblemKind,
    ValidationError,
    generate_random,
    instance_from_dict,
    instance_to_dict,
    save_instance,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CERT_FAILED = 2
EXIT_IO = 3

ALGOS = ("ev", "ve", "oa", "soa", "flow")

_ALGO_FOR_PROBLEM = {
    ProblemKind.ENERGY_PLUS_LOST_VALUE: "ev",
    ProblemKind.VALUE_MINUS_ENERGY: "ve",
    ProblemKind.MIN_ENERGY_SLEEP: "soa",
    ProblemKind.FLOW_PLUS_ENERGY: "flow",
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecosched")
    sub = p.add_subparsers(required=True)

    g = sub.add_parser("generate", help="write a random instance JSON")
    g.add_argument("--problem", required=True, choices=[k.value for k in ProblemKind])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--alpha", type=float, required=True)
    g.add_argument("--g", type=float, default=0.0)
    g.add_argument("--wake", type=float, default=0.0)
    g.add_argument("--machines", type=int, default=1)
    g.add_argument("--horizon", type=float, default=20.0)
    g.add_argument("--epsilon", type=float, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_generate)

    r = sub.add_parser("run", help="run an algorithm on an instance")
    r.add_argument("--algo", required=True, choices=ALGOS)
    r.add_argument("--instance", required=True)
    r.add_argument("--epsilon", type=float, default=None)
    r.add_argument("--out", required=True)
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("certify", help="certify a run report")
    c.add_argument("--run", required=True)
    c.add_argument("--oracle", choices=("auto", "none"), default="auto")
    c.add_argument("--out", default=None)
    c.set_defaults(func=_cmd_certify)

    s = sub.add_parser("sweep", help="generate/run/certify a seeded grid to CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=_cmd_sweep)

    t = sub.add_parser("report", help="summarize a sweep CSV (renders figures)")
    t.add_argument("--csv", required=True)
    t.add_argument("--no-figures", action="store_true")
    t.set_defaults(func=_cmd_report)
    return p


def _cmd_generate(args) -> int:
    params = GeneratorParams(
        problem=ProblemKind(args.problem),
        n_jobs=args.n,
        alpha=args.alpha,
        g=args.g,
        wakeup_cost=args.wake,
        machine_count=args.machines,
        horizon=args.horizon,
        epsilon=args.epsilon,
    )
    inst = generate_random(params, args.seed)
    with open(args.out, "w") as fh:
        fh.write(save_instance(inst))
    print(f"wrote {args.out} (seed {args.seed}, {len(inst.jobs)} jobs)")
    return EXIT_OK


def _execute(algo: str, inst: Instance) -> dict:
    """Run an algorithm and return its self-contained report dict."""
    if algo == "ev":
        run = energy_value.run(inst)
        report = run.report_dict()
        report["checks"] = {
            "induction_max_violation": energy_value.check_induction_step(run).max_violation
        }
    elif algo == "ve":
        run = value_energy.run(inst)
        report = run.report_dict()
        feas = value_energy.check_dual_feasibility(run)
        surplus = value_energy.check_surplus_inequality(run)
        report["checks"] = {
            "cover_gap": feas.worst_cover_gap,
            "price_gap": feas.worst_price_gap,
            "support_eq": feas.worst_support_eq,
            "surplus_margin": surplus.lhs - surplus.rhs,
        }
    elif algo == "oa":
        schedule = sleep_scaling.run_oa(inst)
        report = {
            "problem": inst.problem.value,
            "state_timeline": schedule.timeline_json(0),
            "completion_times": {str(k): v for k, v in sorted(schedule.completion_times.items())},
            "checks": {"closed_form_gap": sleep_scaling.closed_form_gap(inst, schedule)},
        }
    elif algo == "soa":
        run = sleep_scaling.run_soa(inst)
        report = run.report_dict()
        mult = sleep_scaling.check_multiplier_bounds(run)
        report["checks"] = {
            "busy_margin": mult.worst_busy_margin,
            "gap_error": mult.worst_gap_error,
        }
    elif algo == "flow":
        run = flow_energy.run(inst)
        report = run.report_dict()
        rel = flow_energy.check_cost_relations(run)
        decay = flow_energy.check_multiplier_decay(run)
        report["checks"] = {
            "flow_cover_margin": rel.flow_cover_margin,
            "dyn_cover_margin": rel.dyn_cover_margin,
            "mixed_margin": rel.mixed_margin,
            "decay_margin": decay.worst_margin,
        }
    else:
        raise ValidationError("algo", f"unknown algorithm {algo}")
    report["algo"] = algo
    report["instance"] = instance_to_dict(inst)
    return report


def _cmd_run(args) -> int:
    with open(args.instance) as fh:
        inst = instance_from_dict(json.load(fh))
    if args.epsilon is not None:
        inst = Instance(
            problem=inst.problem,
            power=inst.power,
            jobs=inst.jobs,
            wakeup_cost=inst.wakeup_cost,
            machine_count=inst.machine_count,
            epsilon=args.epsilon,
        ).validate()
    report = _execute(args.algo, inst)
    with open(args.out, "w") as fh:
        fh.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    print(f"wrote {args.out}")
    return EXIT_OK


def _auto_oracle(inst: Instance, run) -> oracles.OracleResult | None:
    try:
        if inst.problem is ProblemKind.ENERGY_PLUS_LOST_VALUE and inst.power.g == 0.0:
            return oracles.brute_force_energy_value(inst)
        if inst.problem is ProblemKind.VALUE_MINUS_ENERGY and inst.power.g == 0.0:
            return oracles.brute_force_value_energy(inst)
        if inst.problem is ProblemKind.MIN_ENERGY_SLEEP:
            return oracles.sleep_lower_bound(inst, run)
        if inst.problem is ProblemKind.FLOW_PLUS_ENERGY and len(inst.jobs) <= 3:
            return oracles.grid_opt_flow_energy(inst).upper
    except oracles.OracleSizeError:
        return None
    return None


def _certify_report(report: dict, use_oracle: bool) -> Certificate:
    inst = instance_from_dict(report["instance"])
    algo = report.get("algo") or _ALGO_FOR_PROBLEM[inst.problem].value
    fresh = _execute(algo, inst)
    bad = certify_mod.verify_report_consistency(report, fresh)
    run = _run_object(algo, inst)
    oracle = _auto_oracle(inst, run) if use_oracle else (
        oracles.sleep_lower_bound(inst, run)
        if inst.problem is ProblemKind.MIN_ENERGY_SLEEP
        else None
    )
    if algo == "oa":
        gap = fresh["checks"]["closed_form_gap"]
        cert = Certificate(
            problem=inst.problem,
            primal=0.0,
            dual_or_bound=0.0,
            claimed_ratio=claimed_bound(ProblemKind.MIN_ENERGY_SLEEP, inst.power.alpha),
            observed_ratio=1.0,
            lemma_checks={"closed_form_gap": -gap},
            verdict=Verdict.CERTIFIED if gap <= 1e-6 else Verdict.FAILED,
        )
    else:
        cert = certify_mod.certify(run, oracle)
    if bad:
        cert.verdict = Verdict.FAILED
        cert.notes.append(f"report inconsistent with re-run: {', '.join(sorted(bad))}")
    return cert


def _run_object(algo: str, inst: Instance):
    if algo == "ev":
        return energy_value.run(inst)
    if algo == "ve":
        return value_energy.run(inst)
    if algo in ("soa", "oa"):
        if algo == "oa":
            return None
        return sleep_scaling.run_soa(inst)
    return flow_energy.run(inst)


def _cmd_certify(args) -> int:
    with open(args.run) as fh:
        report = json.load(fh)
    cert = _certify_report(report, use_oracle=args.oracle == "auto")
    text = json.dumps(cert.as_dict(), sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(f"verdict: {cert.verdict.value}")
    if cert.notes:
        for note in cert.notes:
            print(f"  note: {note}")
    return EXIT_OK if cert.verdict is not Verdict.FAILED else EXIT_CERT_FAILED


def _sweep_cell(problem, alpha, g, A, eps, n, seed, ranges) -> tuple[RowMeta, Certificate]:
    params = GeneratorParams(
        problem=problem,
        n_jobs=n,
        alpha=alpha,
        g=g,
        wakeup_cost=A,
        machine_count=ranges.get("machines", 1),
        horizon=ranges.get("horizon", 20.0),
        volume_range=tuple(ranges.get("volume_range", (0.2, 2.0))),
        value_range=tuple(ranges.get("value_range", (0.1, 20.0))),
        weight_range=tuple(ranges.get("weight_range", (0.1, 5.0))),
        epsilon=eps,
    )
    inst = generate_random(params, seed)
    algo = _ALGO_FOR_PROBLEM[problem]
    run = _run_object(algo, inst)
    oracle = _auto_oracle(inst, run)
    cert = certify_mod.certify(run, oracle)
    meta = RowMeta(
        seed=seed, n=n, alpha=alpha, g=g, A=A, epsilon=eps, problem=problem.value
    )
    return meta, cert


def _cmd_sweep(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    problem = ProblemKind(cfg["problem"])
    alphas = cfg.get("alpha", [2.0])
    gs = cfg.get("g", [0.0])
    As = cfg.get("A", [0.0])
    epss = cfg.get("epsilon", [None])
    ns = cfg.get("n", [8])
    lo, hi = cfg.get("seeds", [1, 10])
    out_path = cfg.get("output", "sweep.csv")
    if not (alphas and gs and As and ns and epss):
        raise ValidationError("config", "parameter lists must be nonempty")
    if hi < lo:
        raise ValidationError("seeds", "range reversed")
    cells = [
        (problem, a, g, A, e, n, seed, cfg)
        for a in alphas
        for g in gs
        for A in As
        for e in epss
        for n in ns
        for seed in range(lo, hi + 1)
    ]
    threads = int(os.environ.get("ECOSCHED_THREADS", "1"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda c: _sweep_cell(*c), cells))
    else:
        rows = [_sweep_cell(*c) for c in cells]
    text = batch_report(rows)
    with open(out_path, "w") as fh:
        fh.write(text)
    print(f"wrote {out_path} ({len(rows)} runs)")
    worst_failed = any(c.verdict is Verdict.FAILED for _, c in rows)
    if not args.no_figures:
        _render_csv_figures(out_path)
    return EXIT_CERT_FAILED if worst_failed else EXIT_OK


def _parse_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return [row for row in csv.DictReader(fh) if row["verdict"] != "summary"]


def _render_csv_figures(path: str):
    from .figures import render_report_figures

    files = render_report_figures(_parse_csv(path), path)
    for f in files:
        print(f"wrote {f}")


def _cmd_report(args) -> int:
    rows = _parse_csv(args.csv)
    if not rows:
        print("empty report")
        return EXIT_OK
    by_cfg: dict[tuple, list[dict]] = {}
    for r in rows:
        key = (r["problem"], r["alpha"], r["g"], r["A"], r["epsilon"], r["n"])
        by_cfg.setdefault(key, []).append(r)
    header = f"{'problem':<24}{'alpha':>6}{'g':>6}{'A':>6}{'eps':>8}{'n':>4}{'runs':>6}{'max ratio':>12}{'verdicts':>22}"
    print(header)
    print("-" * len(header))
    for key in sorted(by_cfg):
        group = by_cfg[key]
        ratios = [float(r["ratio"]) for r in group if r["ratio"]]
        verdicts = {}
        for r in group:
            verdicts[r["verdict"]] = verdicts.get(r["verdict"], 0) + 1
        vstr = ",".join(f"{k}:{v}" for k, v in sorted(verdicts.items()))
        print(
            f"{key[0]:<24}{key[1]:>6}{key[2]:>6}{key[3]:>6}{key[4] or '-':>8}{key[5]:>4}"
            f"{len(group):>6}{max(ratios) if ratios else 0.0:>12.6g}{vstr:>22}"
        )
    if not args.no_figures:
        _render_csv_figures(args.csv)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
