"""Command-line front end: solve, check and oracle reports plus bundled fixtures."""

from __future__ import annotations

import argparse
import sys
from typing import List

import numpy as np

from .ambiguity import RRect, SaRect, SrRect, SRect, FiniteKernelSet, Singleton, sa_product_probe
from .cost import check_common_worst_cost, diagnose_cost, solve_primal_cost
from .exceptions import CostAggregationError, EnumerationCapError, NumericalError, ValidationError
from .fixtures import FIXTURES, fixture_names, run_golden
from .instance_file import load, render_json
from .risk import build_avar_ambiguity, solve_nested_risk
from .robust import GAP_TOL, check_common_worst_kernel, check_convex_marginal, diagnose, solve_primal
from .soc import build_soc_ambiguity, soc_rectangularity_probe, solve_soc_noise_space
from .static import OracleConfig, check_equivalence, enlargement_invariance

EXIT_OK = 0
EXIT_GOLDEN = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_CAP = 4

EPILOG = """exit codes:
  0  success
  1  a bundled fixture failed its golden check (examples run)
  2  unreadable or invalid input file (the message names the field)
  3  numerical failure in the LP engine
  4  an enumeration cap was exceeded (raise --max-enum or shrink the grids)
"""


# ---------------------------------------------------------------------------
# Rendering helpers


def _num(x):
    x = float(x)
    return 0.0 if x == 0 else x


def _value_table(instance, values):
    return [{name: _num(values[t][s]) for s, name in enumerate(instance.states[t])}
            for t in range(len(values))]


def _policy_table(instance, policy):
    if policy is None:
        return None
    return [{name: {a: _num(p) for a, p in zip(instance.actions[t][s], policy[t][s])}
             for s, name in enumerate(instance.states[t])} for t in range(len(policy))]


def _kernel_problem(problem):
    """The (instance, kernel model) pair a file describes, or None for cost-only files."""
    if problem.ambiguity is not None:
        return problem.instance, problem.ambiguity, "kernel"
    if problem.avar is not None:
        return problem.instance, build_avar_ambiguity(problem.avar, problem.instance), "avar"
    if problem.soc is not None:
        inst, model = build_soc_ambiguity(problem.soc)
        return inst, model, "soc"
    return None


# ---------------------------------------------------------------------------
# solve


def _solve_kernel(instance, model, mode, tol):
    rep = diagnose(instance, model)
    s1 = instance.initial_state
    out = {"initial_state": instance.states[0][s1]}
    if mode in ("primal", "both"):
        out["primal"] = {"values": _value_table(instance, rep.primal_values),
                         "policy": _policy_table(instance, rep.controller_policy),
                         "deterministic_policy": _policy_table(instance, rep.deterministic_policy)}
    if mode in ("dual", "both"):
        out["dual"] = {"values": _value_table(instance, rep.dual_values)}
    if mode == "both":
        out["gap"] = _num(rep.gap)
        out["strong_duality"] = bool(rep.gap <= tol)
    out["common_worst_kernel"] = rep.common_worst.status
    out["convex_marginal"] = [{name: bool(rep.convex_marginal[t][s]) for s, name in enumerate(instance.states[t])}
                              for t in range(instance.horizon)]
    out["saddle_point"] = [{name: bool(rep.per_state_saddle[t][s]) for s, name in enumerate(instance.states[t])}
                           for t in range(instance.horizon)]
    out["implications"] = [{"if": i.premise, "then": i.conclusion, "premise": i.premise_holds,
                            "conclusion": i.conclusion_holds, "ok": i.ok} for i in rep.implications]
    return out


def _solve_cost(problem, mode, tol):
    inst = problem.instance
    rep = diagnose_cost(inst, problem.kernel, problem.cost_ambiguity)
    out = {"initial_state": inst.states[0][inst.initial_state]}
    if mode in ("primal", "both"):
        out["primal"] = {"values": _value_table(inst, rep.primal_values), "policy": _policy_table(inst, rep.policy),
                         "regularized_values": _value_table(inst, rep.regularized_values)}
    if mode in ("dual", "both"):
        out["dual"] = {"values": _value_table(inst, rep.dual_values)}
    if mode == "both":
        out["gap"] = _num(rep.gap)
        out["strong_duality"] = bool(rep.gap <= tol)
    out["common_worst_cost"] = rep.common_worst.status
    out["implications"] = {k: bool(v) for k, v in rep.implications.items()}
    return out


def solve_report(problem, mode="both", tol=GAP_TOL):
    """Report dictionary for ``solve``; sections appear for every part the file defines."""
    report = {}
    if problem.ambiguity is not None:
        report["kernel_ambiguity"] = _solve_kernel(problem.instance, problem.ambiguity, mode, tol)
    if problem.cost_ambiguity is not None:
        report["cost_ambiguity"] = _solve_cost(problem, mode, tol)
    if problem.avar is not None:
        inst = problem.instance
        values, policy = solve_nested_risk(inst, problem.avar)
        section = {"alpha": problem.avar.alpha, "values": _value_table(inst, values),
                   "policy": _policy_table(inst, policy)}
        section["robust_recursion"] = _solve_kernel(inst, build_avar_ambiguity(problem.avar, inst), mode, tol)
        report["avar"] = section
    if problem.soc is not None:
        try:
            inst, model = build_soc_ambiguity(problem.soc)
            report["soc"] = _solve_kernel(inst, model, mode, tol)
        except CostAggregationError as exc:
            skel = problem.instance
            direct = solve_soc_noise_space(problem.soc)
            section = {"note": f"solved over noise laws: {exc}"}
            if mode in ("primal", "both"):
                section["primal"] = {"values": _value_table(skel, direct.primal_values),
                                     "policy": _policy_table(skel, direct.policy)}
            if mode in ("dual", "both"):
                section["dual"] = {"values": _value_table(skel, direct.dual_values)}
            if mode == "both":
                s1 = skel.initial_state
                gap = float(direct.primal_values[0][s1] - direct.dual_values[0][s1])
                section["gap"] = _num(gap)
                section["strong_duality"] = bool(gap <= tol)
            report["soc"] = section
    return report


def _fmt(x):
    return f"{x:.6g}"


def _table_lines(report, indent="", symbol="V"):
    lines = []
    for key, val in report.items():
        if key.endswith("values") and isinstance(val, list):
            prefix = {"values": symbol, "regularized_values": "V_reg"}.get(key, key)
            for t, layer in enumerate(val):
                lines.append(f"{indent}{prefix}_{t + 1}: " + "  ".join(f"{s}={_fmt(v)}" for s, v in layer.items()))
        elif key.endswith("policy") and isinstance(val, list):
            for t, layer in enumerate(val):
                for s, dist in layer.items():
                    lines.append(f"{indent}{key.replace('_', ' ')} ({t + 1}, {s}): " +
                                 "  ".join(f"{a}={_fmt(p)}" for a, p in dist.items()))
        elif key == "implications":
            items = val if isinstance(val, list) else [{"if": k, "ok": v} for k, v in val.items()]
            for i in items:
                head = f"{i['if']} => {i['then']}" if "then" in i else i["if"]
                lines.append(f"{indent}implication {head}: {'ok' if i['ok'] else 'VIOLATED'}")
        elif isinstance(val, list):
            for t, layer in enumerate(val):
                cells = "  ".join(f"{s}={v}" for s, v in layer.items())
                lines.append(f"{indent}{key} stage {t + 1}: {cells}")
        elif isinstance(val, dict):
            lines.append(f"{indent}[{key}]")
            lines += _table_lines(val, indent + "  ", "Q" if key == "dual" else "V")
        elif isinstance(val, float):
            lines.append(f"{indent}{key}: {_fmt(val)}")
        else:
            lines.append(f"{indent}{key}: {val}")
    return lines


def _emit(report, fmt):
    if fmt == "json":
        print(render_json(report))
    else:
        print("\n".join(_table_lines(report)))


# ---------------------------------------------------------------------------
# check


def _structure_line(stage, t):
    if isinstance(stage, SaRect):
        return f"stage {t + 1}: (s,a)-rectangular: structural"
    if isinstance(stage, SRect):
        return f"stage {t + 1}: s-rectangular: structural"
    if isinstance(stage, RRect):
        return f"stage {t + 1}: r-rectangular: structural"
    if isinstance(stage, SrRect):
        return f"stage {t + 1}: sr-rectangular blend (beta={_fmt(stage.beta)}): structural"
    if isinstance(stage, Singleton):
        return f"stage {t + 1}: single kernel"
    if isinstance(stage, FiniteKernelSet):
        form = "convex hull of" if stage.hull else "finite set of"
        return f"stage {t + 1}: {form} {len(stage.kernels)} kernels"
    return f"stage {t + 1}: {type(stage).__name__}"


def check_lines(problem) -> List[str]:
    lines = []
    found = _kernel_problem(problem)
    if found is not None:
        inst, model, _ = found
        lines += [_structure_line(st, t) for t, st in enumerate(model)]
        # The verdict needs the next-stage values the controller faces.
        verdict = check_common_worst_kernel(inst, model, solve_primal(inst, model).values)
        head = {"global": "HOLDS (one kernel for all states)", "statewise": "HOLDS state by state only",
                "fails": "FAILS"}[verdict.status]
        lines.append(f"common worst-case kernel: {head}")
        for t, st in enumerate(verdict.stages):
            if st.witness is not None:
                for s, block in enumerate(st.witness):
                    rows = ", ".join(f"{a} -> [{', '.join(_fmt(x) for x in r)}]"
                                     for a, r in zip(inst.actions[t][s], np.asarray(block)))
                    lines.append(f"  witness at {inst.label(t, s)}: {rows}")
            for s in st.failing_states:
                lines.append(f"  no common worst case at {inst.label(t, s)}")
        for t in range(inst.horizon):
            for s in range(inst.n_states(t)):
                v = check_convex_marginal(inst, model, t, s)
                tag = "TRUE" if v.convex else "FALSE"
                extra = "" if v.exact else " (sampled)"
                lines.append(f"convex marginal: {tag} at {inst.label(t, s)}{extra}")
                if not isinstance(model[t], (SaRect, Singleton)):
                    try:
                        probe = sa_product_probe(model, inst, t, s)
                        lines.append(f"per-action product at {inst.label(t, s)}: "
                                     f"{'TRUE' if probe.is_product else 'FALSE'}")
                    except EnumerationCapError as exc:
                        lines.append(f"per-action product at {inst.label(t, s)}: skipped ({exc})")
    if problem.soc is not None:
        rep = soc_rectangularity_probe(problem.soc)
        label = {"not_rectangular": "NOT s-rectangular", "rectangular": "rectangular (single noise law)",
                 "inconclusive": "inconclusive"}[rep.status]
        lines.append(f"noise-induced set: {label}")
        if rep.witness is not None:
            skel = problem.soc.skeleton
            for s, block in enumerate(rep.witness):
                rows = ", ".join(f"{a} -> [{', '.join(_fmt(x) for x in r)}]"
                                 for a, r in zip(skel.actions[rep.stage][s], block))
                lines.append(f"  stitched kernel at {skel.label(rep.stage, s)}: {rows}")
            lines.append(f"  L1 distance to the induced set: {_fmt(rep.lp_distance)}")
        lines += [f"  note: {n}" for n in rep.notes]
    if problem.cost_ambiguity is not None:
        inst = problem.instance
        lines += [_structure_line(st, t).replace("kernel", "cost table") for t, st in enumerate(problem.cost_ambiguity)]
        values = solve_primal_cost(inst, problem.kernel, problem.cost_ambiguity).values
        verdict = check_common_worst_cost(inst, problem.kernel, problem.cost_ambiguity, values)
        lines.append(f"common worst-case cost: {verdict.status.upper()}")
    return lines


# ---------------------------------------------------------------------------
# oracle


def oracle_report(problem, config: OracleConfig):
    found = _kernel_problem(problem)
    if found is None:
        raise ValidationError("oracle needs a kernel ambiguity section ('ambiguity', 'avar' or 'soc')")
    inst, model, _ = found
    eq = check_equivalence(inst, model, config)
    en = enlargement_invariance(inst, model)
    return {
        "game_primal": _num(eq.game_primal),
        "static_primal": _num(eq.static_primal),
        "game_dual": _num(eq.game_dual),
        "static_dual_lower_bound": _num(eq.static_dual_lb),
        "tolerance": _num(eq.tolerance),
        "certified": eq.certified,
        "certification": eq.certification,
        "verdicts": {k: v for k, v in eq.verdicts.items()},
        "enlargement": {"max_primal_diff": _num(en.max_primal_diff), "max_dual_diff": _num(en.max_dual_diff),
                        "invariant": en.invariant},
        "passed": bool(eq.passed and en.invariant),
    }


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="drmdp", description="Distributionally robust finite-horizon MDP solver.",
                                     epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the game recursions and report values, policies and verdicts",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("path")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--primal", dest="mode", action="store_const", const="primal")
    mode.add_argument("--dual", dest="mode", action="store_const", const="dual")
    mode.add_argument("--both", dest="mode", action="store_const", const="both")
    p.set_defaults(mode="both")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.add_argument("--tol", type=float, default=GAP_TOL, help="gap below which strong duality is reported")

    p = sub.add_parser("check", help="structural verdicts and witnesses",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("path")

    p = sub.add_parser("oracle", help="compare game values with brute-force static oracles",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("path")
    p.add_argument("--policy-grid", type=int, default=None, help="policy simplex grid resolution")
    p.add_argument("--kernel-grid", type=int, default=None, help="kernel convex-weight grid resolution")
    p.add_argument("--max-enum", type=int, default=None, help="cap on enumerated combinations")
    p.add_argument("--format", choices=("json", "table"), default="json")

    p = sub.add_parser("examples", help="list or run the bundled fixtures",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("action", choices=("list", "run"))
    p.add_argument("name", nargs="?", help="fixture name or 'all'")
    return parser


def _oracle_config(problem, args):
    base = problem.oracle or OracleConfig()
    return OracleConfig(
        args.policy_grid if args.policy_grid is not None else base.policy_grid_resolution,
        args.kernel_grid if args.kernel_grid is not None else base.kernel_grid_resolution,
        args.max_enum if args.max_enum is not None else base.max_enumeration,
    )


def _run_examples(args):
    if args.action == "list":
        for name in fixture_names():
            print(f"{name}  {FIXTURES[name].summary}")
        return EXIT_OK
    if not args.name:
        print("error: 'examples run' needs a fixture name or 'all'", file=sys.stderr)
        return EXIT_INVALID
    names = fixture_names() if args.name == "all" else [args.name]
    if args.name != "all" and args.name not in FIXTURES:
        print(f"error: unknown fixture {args.name!r}; available: {', '.join(fixture_names())}", file=sys.stderr)
        return EXIT_INVALID
    all_ok = True
    for name in names:
        checks = run_golden(name)
        ok = all(c[1] for c in checks)
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        for label, passed, detail in checks:
            print(f"  {'ok ' if passed else 'BAD'} {label}" + (f"  ({detail})" if detail else ""))
    return EXIT_OK if all_ok else EXIT_GOLDEN


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "examples":
            return _run_examples(args)
        problem = load(args.path)
        if args.command == "solve":
            _emit(solve_report(problem, args.mode, args.tol), args.format)
        elif args.command == "check":
            print("\n".join(check_lines(problem)))
        else:
            _emit(oracle_report(problem, _oracle_config(problem, args)), args.format)
        return EXIT_OK
    except EnumerationCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
