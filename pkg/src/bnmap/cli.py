"""Command-line front end: ``bnmap <command> ...``; results go to stdout as JSON.

Exit codes: 0 success, 2 validation error, 3 resource-guard refusal.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .bp import BpConfig, bp_init, bp_log_evidence, bp_marginal, bp_retracted_marginal, bp_run
from .errors import BnetError, BPInconsistentError, GuardExceeded, InstantiationError, InvalidOrderError, WidthCapExceeded
from .exact import (
    elimination_tree,
    exact_map,
    exact_mpe,
    min_fill_order,
    probability_of_evidence,
    random_linear_extension,
    sum_first_reorder,
)
from .experiments import (
    QualityParams,
    ScatterParams,
    params_dict,
    run_improvement,
    run_quality,
    run_scatter,
    to_csv,
)
from .generators import (
    GenConfig,
    emajsat_network,
    format_dimacs,
    maxsat_polytree,
    parse_dimacs,
    parse_expr,
    random_kcnf,
    random_map_problem,
    random_network,
    random_polytree,
)
from .network import Network, read_network, serialize_network
from .problem import format_problem, parse_problem
from .search import SearchConfig, hill_climb, hill_climb_restarts

EXIT_VALIDATION = 2
EXIT_GUARD = 3


class UsageError(Exception):
    pass


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {str(k): _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, np.generic):
        return _json_value(v.item())
    return v


def emit(report: dict) -> None:
    sys.stdout.write(json.dumps(_json_value(report), indent=2, sort_keys=False) + "\n")


def _score_fields(log_p: float) -> dict:
    return {"log_probability": log_p, "probability": math.exp(log_p) if log_p > -math.inf else 0.0}


def _log(p: float) -> float:
    return math.log(p) if p > 0 else -math.inf


def _load_network(path: str) -> Network:
    if not os.path.exists(path):
        raise FileNotFoundError(f"network file not found: {path}")
    return read_network(path)


def _load_problem(args, net: Network):
    map_vars, evidence, threshold = [], {}, None
    if getattr(args, "problem", None):
        if not os.path.exists(args.problem):
            raise FileNotFoundError(f"problem file not found: {args.problem}")
        prob = parse_problem(Path(args.problem).read_text(encoding="utf-8"), net)
        map_vars, evidence, threshold = prob.map_vars, prob.evidence, prob.threshold
    if getattr(args, "map", None):
        map_vars = sorted({net.index(n.strip()) for n in args.map.split(",") if n.strip()})
    if getattr(args, "evidence", None):
        evidence = net.parse_assignment(args.evidence)
    if set(map_vars) & set(evidence):
        raise InstantiationError("MAP variables overlap the evidence")
    return map_vars, evidence, threshold


def _bp_config(args) -> BpConfig:
    return BpConfig(args.max_iters, args.tol, args.damping)


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}


# -- commands -----------------------------------------------------------------


def cmd_solve(args) -> dict:
    net = _load_network(args.network)
    map_vars, e, _ = _load_problem(args, net)
    if not map_vars:
        raise UsageError("solve needs MAP variables (--map or --problem)")
    cfg = SearchConfig(args.pf, args.iters, args.seed, args.init, args.scorer,
                       _bp_config(args), args.width_cap)
    start = time.perf_counter()
    if args.restarts > 1:
        result = hill_climb_restarts(net, e, map_vars, cfg, args.restarts, args.jobs)
    else:
        result = hill_climb(net, e, map_vars, cfg)
    record = {
        "network": net.name,
        "map": [net.variables[v].name for v in map_vars],
        "evidence": net.named(e),
        "scorer": args.scorer,
        "best": net.named(result.best),
        **_score_fields(result.best_score),
        "init": net.named(result.init),
        "init_log_probability": result.init_score,
        "scorer_calls": result.scorer_calls,
        "all_converged": all(t.converged for t in result.trace),
    }
    if args.verify:
        try:
            record["exact_log_probability"] = _log(
                probability_of_evidence(net, {**e, **result.best}, width_cap=args.width_cap))
        except WidthCapExceeded:
            record["exact_log_probability"] = None
    if args.trace:
        record["trace"] = [
            {"iteration": t.iteration, "log_score": t.score, "move": t.move,
             "variable": net.variables[t.variable].name,
             "state": net.variables[t.variable].states[t.state], "converged": t.converged}
            for t in result.trace
        ]
    if args.timing:
        record["wall_time"] = time.perf_counter() - start
    return {"command": "solve", "args": _echo(args), "records": [record]}


def cmd_exact(args) -> dict:
    net = _load_network(args.network)
    map_vars, e, threshold = _load_problem(args, net)
    start = time.perf_counter()
    record: dict = {"network": net.name, "query": args.query, "evidence": net.named(e)}
    if args.query == "pe":
        order = min_fill_order(net, e)
        p = probability_of_evidence(net, e, width_cap=args.width_cap)
        record.update(_score_fields(_log(p)))
        record["width"] = elimination_tree(net, e, order).width
    else:
        if args.query == "mpe":
            x, p = exact_mpe(net, e, width_cap=args.width_cap)
            order = min_fill_order(net, e, [v for v in range(len(net)) if v not in e])
        else:
            if not map_vars:
                raise UsageError("map query needs MAP variables (--map or --problem)")
            x, p = exact_map(net, e, map_vars, width_cap=args.width_cap)
            order = min_fill_order(net, e, map_vars)
            record["map"] = [net.variables[v].name for v in map_vars]
        record["assignment"] = net.named(x)
        record.update(_score_fields(_log(p)))
        record["width"] = elimination_tree(net, e, order).width
        if threshold is not None:
            record["threshold"] = str(threshold)
            record["exceeds_threshold"] = Fraction(p) > threshold
    if args.timing:
        record["wall_time"] = time.perf_counter() - start
    return {"command": "exact", "args": _echo(args), "records": [record]}


def cmd_marginals(args) -> dict:
    net = _load_network(args.network)
    _, e, _ = _load_problem(args, net)
    state = bp_run(bp_init(net, e), _bp_config(args))
    variables = {}
    for v in net.variables:
        entry = {"marginal": dict(zip(v.states, bp_marginal(state, v.id).tolist()))}
        if args.retracted:
            entry["retracted"] = dict(zip(v.states, bp_retracted_marginal(state, v.id).tolist()))
        variables[v.name] = entry
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        log_e = bp_log_evidence(state)
    record = {"network": net.name, "evidence": net.named(e), "converged": state.converged,
              "iterations": state.iteration, "max_delta": state.max_delta,
              "log_evidence_estimate": log_e, "variables": variables}
    return {"command": "marginals", "args": _echo(args), "records": [record]}


def _write(path: Path, text: str) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return str(path)


def cmd_generate(args) -> dict:
    out = Path(args.out)
    files = []
    threshold = None
    if args.kind in ("random", "polytree"):
        cfg = GenConfig(args.vars, args.bias, args.max_parents, args.seed,
                        num_roots=args.roots, min_states=args.min_states,
                        max_states=args.max_states, max_width=args.max_width)
        net = random_network(cfg) if args.kind == "random" else random_polytree(cfg)
        map_vars, e = random_map_problem(net, args.n_map, args.n_ev, args.seed)
    elif args.kind == "maxsat":
        if args.cnf:
            if not os.path.exists(args.cnf):
                raise FileNotFoundError(f"CNF file not found: {args.cnf}")
            cnf = parse_dimacs(Path(args.cnf).read_text(encoding="utf-8"))
        else:
            cnf = random_kcnf(args.vars, args.clauses, 3, args.seed)
            files.append(_write(out.with_suffix(".cnf"), format_dimacs(cnf)))
        net, map_vars, e = maxsat_polytree(cnf)
    else:
        if not args.formula:
            raise UsageError("emajsat needs --formula")
        phi = parse_expr(args.formula)
        net, map_vars, e, threshold = emajsat_network(phi, args.k)
    files.insert(0, _write(out.with_suffix(".bn"), serialize_network(net)))
    files.insert(1, _write(out.with_suffix(".problem"), format_problem(net, map_vars, e, threshold)))
    record = {"kind": args.kind, "files": files, "variables": len(net),
              "map": [net.variables[v].name for v in map_vars], "evidence": net.named(e)}
    if threshold is not None:
        record["threshold"] = str(threshold)
    return {"command": "generate", "args": _echo(args), "records": [record]}


def cmd_width(args) -> dict:
    net = _load_network(args.network)
    map_vars, e, _ = _load_problem(args, net)
    constrained = min_fill_order(net, e, map_vars)
    unconstrained = min_fill_order(net, e)
    c_tree = elimination_tree(net, e, constrained)
    rng = np.random.default_rng(args.seed)
    # an interleaved order with the same elimination tree, then reorder it back
    interleaved = random_linear_extension(c_tree, rng)
    i_tree = elimination_tree(net, e, interleaved)
    reordered = sum_first_reorder(interleaved, i_tree)
    record = {
        "network": net.name,
        "map": [net.variables[v].name for v in map_vars],
        "evidence": net.named(e),
        "constrained_width": c_tree.width,
        "unconstrained_width": elimination_tree(net, e, unconstrained).width,
        "constrained_order": [f"{m.value}:{net.variables[v].name}" for v, m in constrained],
        "reorder_check": {
            "interleaved_order": [f"{m.value}:{net.variables[v].name}" for v, m in interleaved],
            "interleaved_width": i_tree.width,
            "reordered_width": elimination_tree(net, e, reordered).width,
            "widths_equal": i_tree.width == elimination_tree(net, e, reordered).width,
        },
    }
    return {"command": "width", "args": _echo(args), "records": [record]}


def cmd_experiment(args) -> dict:
    out = Path(args.out)
    files = []
    if args.suite == "table1":
        p = QualityParams(args.seed, args.instances, args.vars, args.n_map, args.n_ev, args.bias,
                          args.max_parents, args.max_width, args.pf, args.iters, args.scorer,
                          args.width_cap)
        rows, table1, table2 = run_quality(p, args.jobs)
        files.append(_write(out / "table1_instances.csv", to_csv(rows)))
        files.append(_write(out / "table1.csv", to_csv(table1)))
        files.append(_write(out / "table2.csv", to_csv(table2)))
        summary = {"params": params_dict(p), "table1": table1, "improvement": table2}
    elif args.suite == "improvement":
        if not args.network:
            raise UsageError("the improvement suite needs --network")
        net = _load_network(args.network)
        rows, stats = run_improvement(net, args.instances, args.seed, args.n_map, args.n_ev,
                                      args.pf, args.iters, args.scorer, args.width_cap, args.jobs)
        files.append(_write(out / "improvement_instances.csv", to_csv(rows)))
        files.append(_write(out / "improvement.csv", to_csv(stats)))
        summary = {"network": net.name, "improvement": stats}
    else:
        p = ScatterParams(args.seed, args.instances, bias=args.bias, max_parents=args.max_parents)
        rows, stats = run_scatter(p, args.jobs)
        files.append(_write(out / "figure4_scatter.csv", to_csv(rows)))
        summary = {"params": params_dict(p), **stats}
    return {"command": "experiment", "args": _echo(args), "suite": args.suite,
            "files": files, "summary": summary}


# -- parser ---------------------------------------------------------------------


def _add_problem_flags(p: argparse.ArgumentParser, with_map: bool = True) -> None:
    p.add_argument("--network", required=True, help="BNET file")
    p.add_argument("--problem", help="sidecar .problem file (map/evidence/threshold)")
    if with_map:
        p.add_argument("--map", help="comma-separated MAP variables (overrides --problem)")
    p.add_argument("--evidence", help='evidence "Var=state,Var2=state2" (overrides --problem)')


def _add_bp_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-iters", type=int, default=1000, help="BP sweep cap")
    p.add_argument("--tol", type=float, default=1e-8, help="BP convergence tolerance")
    p.add_argument("--damping", type=float, default=0.0)


def _width_cap_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width-cap", type=int, default=None,
                   help="refuse exact work above this width (default BNMAP_WIDTH_CAP or 25)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bnmap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="approximate MAP by stochastic hill climbing")
    _add_problem_flags(p)
    _add_bp_flags(p)
    _width_cap_flag(p)
    p.add_argument("--init", choices=("mpe", "ml", "random"), default="ml")
    p.add_argument("--scorer", choices=("bp", "exact"), default="bp")
    p.add_argument("--pf", type=float, default=0.3, help="random-move probability")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--verify", action="store_true", help="also rescore the result exactly")
    p.add_argument("--trace", action="store_true", help="include the per-iteration trace")
    p.add_argument("--timing", action="store_true", help="include wall time (not reproducible)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("exact", help="exact Pr(e), MPE or MAP by variable elimination")
    p.add_argument("query", choices=("pe", "mpe", "map"))
    _add_problem_flags(p)
    _width_cap_flag(p)
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("marginals", help="BP posterior (and retracted) marginals")
    _add_problem_flags(p, with_map=False)
    _add_bp_flags(p)
    p.add_argument("--retracted", action="store_true")
    p.set_defaults(func=cmd_marginals)

    p = sub.add_parser("generate", help="write a benchmark or reduction network")
    p.add_argument("kind", choices=("random", "polytree", "maxsat", "emajsat"))
    p.add_argument("--out", required=True, help="output prefix (writes PREFIX.bn, PREFIX.problem)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vars", type=int, default=20)
    p.add_argument("--clauses", type=int, default=10)
    p.add_argument("--cnf", help="DIMACS file for maxsat")
    p.add_argument("--formula", help="prefix formula for emajsat, e.g. '(and x1 (not x2))'")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--bias", type=float, default=0.25)
    p.add_argument("--max-parents", type=int, default=4)
    p.add_argument("--roots", type=int, default=None)
    p.add_argument("--min-states", type=int, default=2)
    p.add_argument("--max-states", type=int, default=2)
    p.add_argument("--max-width", type=int, default=None)
    p.add_argument("--n-map", type=int, default=0)
    p.add_argument("--n-ev", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("width", help="constrained vs unconstrained min-fill widths")
    _add_problem_flags(p)
    p.add_argument("--seed", type=int, default=0, help="seed for the interleaved-order check")
    p.set_defaults(func=cmd_width)

    p = sub.add_parser("experiment", help="seeded experiment suites writing CSV")
    p.add_argument("--suite", choices=("table1", "improvement", "figure4"), required=True)
    p.add_argument("--out", default="results")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=25)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--network", help="BNET file for the improvement suite")
    p.add_argument("--vars", type=int, default=20)
    p.add_argument("--n-map", type=int, default=8)
    p.add_argument("--n-ev", type=int, default=4)
    p.add_argument("--bias", type=float, default=0.25)
    p.add_argument("--max-parents", type=int, default=3)
    p.add_argument("--max-width", type=int, default=None)
    p.add_argument("--pf", type=float, default=0.3)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--scorer", choices=("bp", "exact"), default="bp")
    _width_cap_flag(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        emit(args.func(args))
    except (WidthCapExceeded, GuardExceeded) as err:
        print(f"bnmap: resource guard: {err}", file=sys.stderr)
        return EXIT_GUARD
    except FileNotFoundError as err:
        print(f"bnmap: missing file: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except BnetError as err:
        print(f"bnmap: invalid network/problem: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InstantiationError, InvalidOrderError, UsageError, BPInconsistentError, ValueError) as err:
        print(f"bnmap: error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
