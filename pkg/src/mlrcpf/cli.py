"""Command-line entry point: ``mlrcpf {solve,evaluate,sweep,gen-case-study,oracle}``.

Every command takes ``--seed``; stage seeds are derived from it by name so a
stage can be rerun on its own and reproduce the same draws.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from .casestudy import generate_case_study
from .model import Plan, PlanningInstance
from .optimizer import (
    InfeasiblePlanError,
    SearchSpaceTooLarge,
    SolverConfig,
    baseline_deterministic,
    baseline_robust,
    brute_force_optimize,
    evaluate,
    local_search_optimize,
    sensitivity_sweep,
)
from .render import render_map
from .serialize import (
    DocumentError,
    export_plan,
    format_metrics,
    load_document,
    load_plan,
    metrics_document,
    save_instance,
    save_metrics,
    save_scenarios,
)
from .spatial import build_adjacency
from .temporal import simulate
from .uncertainty import ScenarioSet, ScenarioSpec, generate_scenarios

log = logging.getLogger("mlrcpf")

MODES = ("proposed", "baseline-det", "baseline-rob")


def derive_seed(seed: int, name: str) -> int:
    """Stable 63-bit sub-seed for a named stage."""
    digest = hashlib.sha256(f"{seed}/{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _scenarios(instance: PlanningInstance, spec: ScenarioSpec | None, count: int | None, seed: int) -> ScenarioSet:
    spec = spec or ScenarioSpec()
    if count is not None:
        spec = ScenarioSpec(count, spec.yield_radius, spec.price_radius, spec.cost_radius,
                            spec.demand_growth_range, spec.unit_noise, spec.correlation)
    return generate_scenarios(instance, spec, derive_seed(seed, "scenarios"))


def _config(args) -> SolverConfig:
    return SolverConfig(
        seed=derive_seed(args.seed, "solver"),
        max_iterations=args.iterations,
        restarts=args.restarts,
        rho=args.rho,
    )


def _write_plan_outputs(out: Path, plan: Plan, instance: PlanningInstance, metrics, maps: str, extra: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    trajectory = simulate(plan, instance, build_adjacency(instance.units))
    export_plan(plan, trajectory, instance, out / "plan.csv")
    save_metrics(metrics, out / "metrics.json", **extra)
    if maps != "none":
        periods = instance.periods if maps == "all" else sorted({1, instance.horizon})
        map_dir = out / "maps"
        map_dir.mkdir(exist_ok=True)
        for t in periods:
            render_map(plan, instance, t, map_dir / f"period-{t:02d}.svg")


def cmd_solve(args) -> int:
    instance, spec = load_document(args.instance)
    scenarios = _scenarios(instance, spec, args.scenarios, args.seed)
    config = _config(args)
    log.info("solving %s with %d scenarios, rho=%g", args.mode, len(scenarios), args.rho)
    result_log = None
    if args.mode == "proposed":
        result = local_search_optimize(instance, scenarios, config)
        plan, result_log = result.plan, result.log_lines()
    elif args.mode == "baseline-det":
        plan = baseline_deterministic(instance, config)
    else:
        plan = baseline_robust(instance, scenarios, config)
    metrics = evaluate(plan, instance, scenarios, args.rho)
    out = Path(args.out)
    _write_plan_outputs(out, plan, instance, metrics, args.maps, {"mode": args.mode, "seed": args.seed})
    save_scenarios(scenarios, out / "scenarios.json")
    if result_log is not None:
        (out / "search_log.csv").write_text("\n".join(result_log) + "\n", encoding="utf-8")
    print(f"{args.mode} on {instance.name}")
    print(format_metrics(metrics))
    print(f"written to {out}")
    return 0


def cmd_evaluate(args) -> int:
    instance, spec = load_document(args.instance)
    plan = load_plan(args.plan, instance)
    scenarios = _scenarios(instance, spec, args.scenarios, args.seed)
    metrics = evaluate(plan, instance, scenarios, args.rho)
    doc = metrics_document(metrics)
    if args.out:
        save_metrics(metrics, args.out)
        print(format_metrics(metrics))
    else:
        print(json.dumps(doc, indent=2))
    return 0


def cmd_sweep(args) -> int:
    instance, spec = load_document(args.instance)
    scenarios = _scenarios(instance, spec, args.scenarios, args.seed)
    try:
        grid = [float(x) for x in args.rho_grid.split(",") if x.strip()]
    except ValueError:
        raise SystemExit(f"error: --rho-grid must be comma-separated numbers, got {args.rho_grid!r}") from None
    config = _config(args)
    if args.plan:
        plan = load_plan(args.plan, instance)
    else:
        plan = local_search_optimize(instance, scenarios, config).plan
    curve = sensitivity_sweep(instance, scenarios, plan, grid, resolve=args.resolve, config=config)
    lines = ["rho,worst_case_profit"] + [f"{rho!r},{value!r}" for rho, value in curve]
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    for rho, value in curve:
        print(f"rho={rho:<8g} worst-case {value / 1e4:14.2f} x10^4 CNY")
    if not args.out:
        print("\n".join(lines))
    return 0


def cmd_gen_case_study(args) -> int:
    instance = generate_case_study(derive_seed(args.seed, "case-study"))
    save_instance(instance, args.out, ScenarioSpec())
    print(f"wrote {len(instance.units)} units, {len(instance.crops)} crops, {instance.horizon} periods to {args.out}")
    return 0


def cmd_oracle(args) -> int:
    instance, spec = load_document(args.instance)
    scenarios = _scenarios(instance, spec, args.scenarios, args.seed)
    plan, metrics = brute_force_optimize(instance, scenarios, args.rho, max_candidates=args.max_candidates)
    out = Path(args.out)
    _write_plan_outputs(out, plan, instance, metrics, args.maps, {"mode": "oracle", "seed": args.seed})
    print(f"exact optimum on {instance.name}")
    print(format_metrics(metrics))
    print(f"written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlrcpf", description="Robust multi-period crop planning.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, rho=True, scenarios=True):
        p.add_argument("--instance", required=True, help="instance JSON document")
        p.add_argument("--seed", type=int, default=0)
        if scenarios:
            p.add_argument("--scenarios", type=int, default=None,
                           help="scenario count (default: document value or 200)")
        if rho:
            p.add_argument("--rho", type=float, default=0.05, help="Wasserstein radius")

    def solver(p):
        p.add_argument("--iterations", type=int, default=20000)
        p.add_argument("--restarts", type=int, default=1)

    p = sub.add_parser("solve", help="optimise a plan and write plan, metrics and maps")
    common(p)
    solver(p)
    p.add_argument("--mode", choices=MODES, default="proposed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--maps", choices=("all", "ends", "none"), default="all")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="score an existing plan")
    common(p)
    p.add_argument("--plan", required=True, help="plan CSV")
    p.add_argument("--out", help="metrics JSON path (default: print JSON)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="worst-case profit across robustness radii")
    common(p)
    solver(p)
    p.add_argument("--rho-grid", default="0,0.05,0.1,0.2")
    p.add_argument("--plan", help="fixed plan CSV (default: solve at --rho first)")
    p.add_argument("--resolve", action="store_true", help="re-optimise at each radius")
    p.add_argument("--out", help="curve CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-case-study", help="write the synthetic 54-unit case study")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_case_study)

    p = sub.add_parser("oracle", help="exact brute-force optimum for tiny instances")
    common(p)
    p.add_argument("--max-candidates", type=int, default=10**7)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--maps", choices=("all", "ends", "none"), default="none")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: no such file", file=sys.stderr)
    except DocumentError as exc:
        print(f"error: invalid document {exc}", file=sys.stderr)
    except (InfeasiblePlanError, SearchSpaceTooLarge, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
