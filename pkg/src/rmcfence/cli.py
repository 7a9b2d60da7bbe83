"""Command-line driver.

Subcommands: compile (optimize placements, emit JSON or annotated
source), check (validate a plan against its source), explain (show the
closed constraints, weights, and cost breakdown), oracle (cross-check
the optimizer against exhaustive search and the greedy baseline).

Exit codes: 0 success/valid, 1 invalid input, 2 path explosion,
3 budget exhausted, 4 invalid plan / oracle mismatch.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import arch, constraints, emit, encode, graph, ir, solver, verify
from .deps import DepAnalysis

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PATHS = 2
EXIT_BUDGET = 3
EXIT_INVALID = 4


def _add_common(p):
    p.add_argument("file", help="IR source file")
    p.add_argument("--arch", default="armv8", choices=list(arch.PROFILE_NAMES))
    p.add_argument("--costs", help="cost override file (key = integer lines)")
    p.add_argument("--no-data-deps", action="store_true", help="never rely on data dependencies")
    p.add_argument("--no-ctrl-deps", action="store_true", help="never rely on control dependencies")
    p.add_argument(
        "--synth-deps", action="store_true", help="allow synthesizing new control dependencies"
    )
    p.add_argument("--max-paths", type=int, default=graph.DEFAULT_MAX_PATHS)
    p.add_argument("--loop-factor", type=int, default=None, help="per-loop-level weight multiplier")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="rmcfence", description="memory-barrier placement optimizer"
    )
    sub = ap.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("compile", help="compute a minimal placement plan")
    _add_common(c)
    c.add_argument("--budget-ms", type=int, default=None)
    c.add_argument("--format", choices=("json", "annotated"), default="json")
    c.add_argument("--out", help="write output here instead of stdout")

    k = sub.add_parser("check", help="validate a placement plan")
    _add_common(k)
    k.add_argument("plan", help="plan JSON produced by compile")

    e = sub.add_parser("explain", help="show constraints, weights, and cost breakdown")
    _add_common(e)
    e.add_argument("--budget-ms", type=int, default=None)
    e.add_argument("--dump-problem", action="store_true", help="also print the raw formula")

    o = sub.add_parser("oracle", help="cross-check optimizer vs exhaustive search")
    _add_common(o)
    o.add_argument("--max-vars", type=int, default=16, help="exhaustive-search variable limit")
    return ap


def _load_inputs(args):
    """Parse + validate + per-function analysis structures."""
    with open(args.file, encoding="utf-8") as fh:
        text = fh.read()
    funcs = ir.parse(text)
    diags = []
    for f in funcs:
        diags.extend(ir.validate(f))
    if diags:
        raise ir.ParseError(diags)

    profile = arch.builtin_profile(args.arch)
    cost_path = args.costs or os.environ.get("RMCFENCE_COSTS") or None
    costs, warnings = arch.load_costs(profile, path=cost_path)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.loop_factor is not None:
        if args.loop_factor < 1:
            raise arch.CostConfigError("--loop-factor must be >= 1")
        costs = replace(costs, loop_factor=args.loop_factor)

    options = encode.EncodeOptions(
        data_deps=not args.no_data_deps,
        ctrl_deps=not args.no_ctrl_deps,
        synth_deps=args.synth_deps,
        max_paths=args.max_paths,
    )

    units = []
    for f in sorted(funcs, key=lambda f: f.name):
        cfg = ir.normalize(f)
        edges, boundaries = constraints.resolve(f, cfg)
        closed = constraints.close(edges, cfg.actions)
        units.append((f, cfg, closed, boundaries))
    return units, profile, costs, options


def _encode_unit(unit, profile, costs, options):
    f, cfg, closed, boundaries = unit
    deps = DepAnalysis(cfg)
    return encode.build(cfg, closed, boundaries, deps, profile, costs, options)


def cmd_compile(args):
    units, profile, costs, options = _load_inputs(args)
    plans, cfgs = [], {}
    budget_note = None
    for unit in units:
        problem = _encode_unit(unit, profile, costs, options)
        cfgs[unit[0].name] = unit[1]
        try:
            asg = solver.solve_min(problem, args.budget_ms)
        except solver.BudgetExceeded as exc:
            if exc.incumbent is None:
                print(f"error: budget exhausted on {unit[0].name} with no plan", file=sys.stderr)
                return EXIT_BUDGET
            budget_note = unit[0].name
            asg = replace(exc.incumbent, optimal=False)
        plans.append(emit.to_plan(problem, unit[1], asg))

    if args.format == "json":
        text = emit.plans_to_json(plans)
    else:
        text = "".join(
            emit.annotate(cfgs[p.function].func, cfgs[p.function], p)
            for p in sorted(plans, key=lambda p: p.function)
        )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if budget_note is not None:
        print(f"warning: budget exhausted on {budget_note}; plan may be suboptimal",
              file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_check(args):
    units, profile, _costs, _options = _load_inputs(args)
    with open(args.plan, encoding="utf-8") as fh:
        plans = {p.function: p for p in emit.plans_from_json(fh.read())}
    violations = []
    for f, cfg, closed, boundaries in units:
        plan = plans.get(f.name)
        if plan is None:
            violations.append(f"no plan for function {f.name}")
            continue
        if plan.arch != profile.name:
            print(
                f"error: plan for {f.name} targets {plan.arch}, not {profile.name}",
                file=sys.stderr,
            )
            return EXIT_INPUT
        violations.extend(
            verify.check_plan(cfg, closed, boundaries, profile, plan, args.max_paths)
        )
    if violations:
        for v in violations:
            print(v)
        return EXIT_INVALID
    print("OK")
    return EXIT_OK


def _expr_str(expr):
    tag = expr[0]
    if tag == "const":
        return "true" if expr[1] else "false"
    if tag == "out":
        return str(expr[1])
    if tag == "def":
        return expr[1]
    sep = " | " if tag == "or" else " & "
    return "(" + sep.join(_expr_str(p) for p in expr[1]) + ")"


def cmd_explain(args):
    units, profile, costs, options = _load_inputs(args)
    out = []
    for unit in units:
        f, cfg, closed, boundaries = unit
        out.append(f"function {f.name} ({profile.name})")
        out.append("  constraints:")
        for e in closed:
            scope = f" here({e.bind})" if e.bind else ""
            mark = "" if e.origin == "declared" else "  [derived]"
            out.append(f"    {e.kind} {e.src} -> {e.dst}{scope}{mark}")
        for bc in boundaries:
            out.append(f"    {bc.direction}({bc.kind}) {bc.action}")
        out.append("  edges:")
        for ce in graph.annotated_edges(cfg, costs.loop_factor):
            tag = " pseudo" if ce.pseudo else ""
            out.append(f"    {ce.src} -> {ce.dst}{tag}  depth={ce.depth} weight={ce.weight}")
        problem = _encode_unit(unit, profile, costs, options)
        if args.dump_problem:
            out.append("  outputs:")
            for v in problem.outputs:
                out.append(f"    {v}")
            out.append("  definitions:")
            for name in sorted(problem.defs):
                out.append(f"    {name} = {_expr_str(problem.defs[name])}")
            out.append("  assertions:")
            for label, expr in problem.asserts:
                out.append(f"    {label}: {_expr_str(expr)}")
        asg = solver.solve_min(problem, getattr(args, "budget_ms", None))
        out.append(f"  plan (cost {asg.cost}, {asg.decisions} search nodes):")
        for w, group in problem.cost_terms:
            hit = sorted(group & asg.true_vars)
            if hit:
                out.append(f"    {hit[0]}  cost {w}")
        if not asg.true_vars:
            out.append("    (nothing to insert)")
    print("\n".join(out))
    return EXIT_OK


def cmd_oracle(args):
    units, profile, costs, options = _load_inputs(args)
    ok = True
    for unit in units:
        f, cfg, closed, boundaries = unit
        problem = _encode_unit(unit, profile, costs, options)
        asg = solver.solve_min(problem)
        gp = verify.greedy(cfg, closed, boundaries, profile, costs)
        line = f"{f.name}: solver={asg.cost} greedy={gp.cost}"
        try:
            ref = verify.brute_min(problem, args.max_vars)
            line += f" exhaustive={ref.cost}"
            if ref.cost != asg.cost:
                line += "  MISMATCH"
                ok = False
        except verify.CapExceeded:
            line += " exhaustive=skipped"
        print(line)
    return EXIT_OK if ok else EXIT_INVALID


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {
        "compile": cmd_compile,
        "check": cmd_check,
        "explain": cmd_explain,
        "oracle": cmd_oracle,
    }[args.cmd]
    try:
        return handler(args)
    except (ir.ParseError, constraints.ConstraintError) as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return EXIT_INPUT
    except (arch.CostConfigError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except graph.PathExplosion as exc:
        print(f"error: {exc} (raise --max-paths?)", file=sys.stderr)
        return EXIT_PATHS


if __name__ == "__main__":
    sys.exit(main())
