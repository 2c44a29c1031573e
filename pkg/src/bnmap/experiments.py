"""Seeded experiment batches: solution-quality tables and retracted-marginal scatter data.

Every instance derives its own seed from (suite seed, instance index, attempt)
so a batch is reproducible regardless of how instances are spread over jobs.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .bp import BpConfig, bp_init, bp_log_evidence, bp_retracted_marginal, bp_run
from .errors import WidthCapExceeded
from .exact import exact_map, exact_marginal, probability_of_evidence
from .generators import GenConfig, random_map_problem, random_network
from .network import Network, is_polytree
from .search import SearchConfig, hill_climb, init_ml, init_mpe

METHODS = ("MPE", "MPE-Hill", "MPE-SHill", "ML", "ML-Hill", "ML-SHill")
EXACT_TOL = 1e-9


def derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0] >> 1)


def _log(p: float) -> float:
    return math.log(p) if p > 0 else -math.inf


def _map(jobs: int, fn: Callable, items: Sequence):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- solution quality of initializations and searches --------------------------


@dataclass(frozen=True)
class QualityParams:
    seed: int = 0
    instances: int = 25
    num_vars: int = 20
    n_map: int = 8
    n_ev: int = 4
    bias: float = 0.25
    max_parents: int = 3
    max_width: int | None = None
    p_f: float = 0.3
    iterations: int = 100
    scorer: str = "bp"
    width_cap: int | None = None


def quality_instance(p: QualityParams, index: int) -> tuple[Network, list[int], dict[int, int], int]:
    """Random network with `n_map` roots used as MAP variables and leaf evidence."""
    for attempt in range(1000):
        s = derive_seed(p.seed, index, attempt)
        net = random_network(GenConfig(p.num_vars, p.bias, p.max_parents, s,
                                       num_roots=p.n_map, max_width=p.max_width))
        try:
            map_vars, evidence = random_map_problem(net, p.n_map, p.n_ev, s)
        except ValueError:
            continue
        return net, map_vars, evidence, s
    raise RuntimeError("could not generate a problem instance")


def _quality_row(args: tuple[QualityParams, int]) -> list[dict]:
    p, index = args
    net, map_vars, e, s = quality_instance(p, index)
    bp_cfg = BpConfig()

    def true_log(x):
        try:
            return _log(probability_of_evidence(net, {**e, **x}, width_cap=p.width_cap))
        except WidthCapExceeded:
            return None

    try:
        _, map_p = exact_map(net, e, map_vars, width_cap=p.width_cap)
        map_log = _log(map_p)
    except WidthCapExceeded:
        map_log = None

    found = {}
    inits = {"MPE": init_mpe(net, e, map_vars, bp_cfg), "ML": init_ml(net, e, map_vars, bp_cfg)}
    for name, x in inits.items():
        found[name] = (x, None)
        for suffix, p_f in (("Hill", 0.0), ("SHill", p.p_f)):
            cfg = SearchConfig(p_f=p_f, iterations=p.iterations, seed=s, init=name.lower(),
                               scorer=p.scorer, bp=bp_cfg, width_cap=p.width_cap)
            r = hill_climb(net, e, map_vars, cfg, init=x)
            found[f"{name}-{suffix}"] = (r.best, r)

    rows = []
    for method in METHODS:
        x, r = found[method]
        lg = true_log(x)
        init_lg = true_log(inits[method.split("-")[0]])
        solved = None
        if map_log is not None and lg is not None:
            solved = abs(lg - map_log) <= EXACT_TOL * max(1.0, abs(map_log))
        rows.append({
            "instance": index,
            "seed": s,
            "method": method,
            "assignment": net.format_assignment(x),
            "log_prob": lg,
            "map_log_prob": map_log,
            "solved_exactly": solved,
            "log_ratio_to_map": None if map_log is None or lg is None else lg - map_log,
            "log_ratio_to_init": None if lg is None or init_lg is None else lg - init_lg,
            "search_score": None if r is None else r.best_score,
        })
    return rows


def run_quality(p: QualityParams, jobs: int = 1) -> tuple[list[dict], list[dict], list[dict]]:
    """Returns (per-instance rows, solved-exactly summary, improvement-ratio summary)."""
    rows = [r for batch in _map(jobs, _quality_row, [(p, i) for i in range(p.instances)]) for r in batch]
    table1 = []
    for method in METHODS:
        mine = [r for r in rows if r["method"] == method and r["solved_exactly"] is not None]
        ratios = [r["log_ratio_to_map"] for r in mine]
        table1.append({
            "method": method,
            "solvable": len(mine),
            "solved_exactly": sum(r["solved_exactly"] for r in mine),
            "worst_ratio": math.exp(min(ratios)) if ratios else None,
        })
    table2 = []
    for method in METHODS:
        if "-" not in method:
            continue
        logs = [r["log_ratio_to_init"] for r in rows if r["method"] == method and r["log_ratio_to_init"] is not None]
        ratios = np.exp(np.array(logs)) if logs else np.array([])
        table2.append({
            "method": method,
            "count": len(logs),
            "min": float(ratios.min()) if logs else None,
            "median": float(np.median(ratios)) if logs else None,
            "mean": float(ratios.mean()) if logs else None,
            "max": float(ratios.max()) if logs else None,
        })
    return rows, table1, table2


# -- improvement statistics on a supplied network ------------------------------


def _improvement_row(args) -> list[dict]:
    net, index, seed, n_map, n_ev, p_f, iterations, scorer, width_cap = args
    s = derive_seed(seed, index)
    rng = np.random.default_rng(s)
    perm = [int(v) for v in rng.permutation(len(net))]
    map_vars = sorted(perm[:n_map])
    e = {v: int(rng.integers(net.variables[v].card)) for v in sorted(perm[n_map:n_map + n_ev])}
    bp_cfg = BpConfig()

    def score(x):
        try:
            return _log(probability_of_evidence(net, {**e, **x}, width_cap=width_cap)), "exact"
        except WidthCapExceeded:
            state = bp_run(bp_init(net, {**e, **x}), bp_cfg)
            return bp_log_evidence(state), "bp"

    rows = []
    for name, x in (("MPE", init_mpe(net, e, map_vars, bp_cfg)), ("ML", init_ml(net, e, map_vars, bp_cfg))):
        base, _ = score(x)
        for suffix, pf in (("Hill", 0.0), ("SHill", p_f)):
            cfg = SearchConfig(p_f=pf, iterations=iterations, seed=s, scorer=scorer,
                               bp=bp_cfg, width_cap=width_cap)
            r = hill_climb(net, e, map_vars, cfg, init=x)
            lg, source = score(r.best)
            rows.append({"instance": index, "method": f"{name}-{suffix}",
                         "log_ratio_to_init": lg - base, "score_source": source})
    return rows


def run_improvement(net: Network, instances: int, seed: int, n_map: int, n_ev: int,
                    p_f: float = 0.3, iterations: int = 100, scorer: str = "bp",
                    width_cap: int | None = None, jobs: int = 1):
    if n_map + n_ev > len(net):
        raise ValueError("n_map + n_ev exceeds the number of variables")
    args = [(net, i, seed, n_map, n_ev, p_f, iterations, scorer, width_cap) for i in range(instances)]
    rows = [r for batch in _map(jobs, _improvement_row, args) for r in batch]
    summary = []
    for method in ("MPE-Hill", "MPE-SHill", "ML-Hill", "ML-SHill"):
        ratios = np.exp([r["log_ratio_to_init"] for r in rows if r["method"] == method])
        summary.append({"method": method, "count": len(ratios), "min": float(ratios.min()),
                        "median": float(np.median(ratios)), "mean": float(ratios.mean()),
                        "max": float(ratios.max())})
    return rows, summary


# -- exact vs approximate retracted marginals ----------------------------------


@dataclass(frozen=True)
class ScatterParams:
    seed: int = 0
    instances: int = 20
    min_vars: int = 10
    max_vars: int = 14
    bias: float = 0.25
    max_parents: int = 3
    n_root_ev: int = 2
    n_leaf_ev: int = 3


def scatter_instance(p: ScatterParams, index: int):
    """A loopy network on which BP converges, with evidence on roots and leaves."""
    for attempt in range(1000):
        s = derive_seed(p.seed, index, attempt)
        rng = np.random.default_rng(s)
        n = int(rng.integers(p.min_vars, p.max_vars + 1))
        net = random_network(GenConfig(n, p.bias, p.max_parents, s, num_roots=max(2, n // 4)))
        if is_polytree(net):
            continue
        roots = net.roots()
        leaves = [v for v in net.leaves() if v not in roots]
        if len(roots) < p.n_root_ev or len(leaves) < p.n_leaf_ev:
            continue
        ev_vars = sorted(int(v) for v in rng.choice(roots, p.n_root_ev, replace=False))
        ev_vars += sorted(int(v) for v in rng.choice(leaves, p.n_leaf_ev, replace=False))
        e = {v: int(rng.integers(net.variables[v].card)) for v in ev_vars}
        state = bp_run(bp_init(net, e), BpConfig())
        if not state.converged or state.inconsistent:
            continue
        return net, e, state, s
    raise RuntimeError("no converging loopy instance found")


def _scatter_rows(args) -> list[dict]:
    p, index = args
    net, e, state, s = scatter_instance(p, index)
    rows = []
    for v in range(len(net)):
        exact = exact_marginal(net, e, v)
        approx = bp_retracted_marginal(state, v)
        for x in range(net.variables[v].card):
            rows.append({"instance": index, "seed": s, "variable": net.variables[v].name,
                         "state": net.variables[v].states[x], "observed": v in e,
                         "exact": float(exact[x]), "approx": float(approx[x])})
    return rows


def run_scatter(p: ScatterParams, jobs: int = 1) -> tuple[list[dict], dict]:
    rows = [r for batch in _map(jobs, _scatter_rows, [(p, i) for i in range(p.instances)]) for r in batch]
    exact = np.array([r["exact"] for r in rows])
    approx = np.array([r["approx"] for r in rows])
    summary = {
        "points": len(rows),
        "correlation": float(np.corrcoef(exact, approx)[0, 1]),
        "max_abs_error": float(np.max(np.abs(exact - approx))),
        "mean_abs_error": float(np.mean(np.abs(exact - approx))),
    }
    return rows, summary


# -- output helpers -------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(rows[0].keys())
    for r in rows:
        writer.writerow(_cell(v) for v in r.values())
    return buf.getvalue()


def params_dict(p) -> dict:
    return asdict(p)
