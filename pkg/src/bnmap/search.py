"""Stochastic hill climbing over MAP instantiations.

Each iteration scores the current instantiation s (with evidence s, e),
records it if it beats the best so far, then either flips a random variable
(probability p_f) or moves to the neighbour with the largest improvement
ratio Pr(x, s - X, e) / Pr(s, e), falling back to a random flip when no
neighbour improves.

Two scorers are available. BP scores s by the Bethe estimate of ln Pr(s, e)
and gets every neighbour's ratio from one run via retracted marginals. EXACT
scores s and each neighbour by variable elimination.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np

from .bp import (
    BpConfig,
    BpState,
    bp_init,
    bp_log_evidence,
    bp_marginal,
    bp_max_product_mpe,
    bp_retracted_marginal,
    bp_run,
)
from .errors import BPInconsistentError, InstantiationError, WidthCapExceeded
from .exact import default_width_cap, eliminate, min_fill_order, order_width
from .network import Instantiation, Network

Init = Literal["mpe", "ml", "random"]
ScorerKind = Literal["bp", "exact"]


@dataclass(frozen=True)
class SearchConfig:
    p_f: float = 0.3
    iterations: int = 100
    seed: int = 0
    init: Init = "ml"
    scorer: ScorerKind = "bp"
    bp: BpConfig = BpConfig()
    width_cap: int | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 <= self.p_f <= 1.0:
            raise ValueError("p_f must lie in [0, 1]")
        if self.init not in ("mpe", "ml", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.scorer not in ("bp", "exact"):
            raise ValueError(f"unknown scorer {self.scorer!r}")


@dataclass(frozen=True)
class TraceStep:
    iteration: int
    score: float  # ln Pr(s, e) estimate of the state scored this iteration
    move: Literal["greedy", "random", "stuck"]  # stuck: no improving neighbour
    variable: int
    state: int
    converged: bool = True


@dataclass
class SearchResult:
    best: Instantiation
    best_score: float
    init: Instantiation
    init_score: float
    trace: list[TraceStep] = field(default_factory=list)
    scorer_calls: int = 0


# -- initializations ----------------------------------------------------------


def _check_map_vars(net: Network, e: Mapping[int, int], map_vars: Sequence[int]) -> list[int]:
    map_vars = sorted(set(int(v) for v in map_vars))
    if not map_vars:
        raise InstantiationError("need at least one MAP variable")
    net.validate({v: 0 for v in map_vars})
    if set(map_vars) & set(e):
        raise InstantiationError("MAP variables overlap the evidence")
    return map_vars


def init_mpe(net: Network, e: Mapping[int, int], map_vars: Sequence[int], cfg: BpConfig = BpConfig()) -> Instantiation:
    mpe = bp_max_product_mpe(net, e, cfg)
    return {v: mpe[v] for v in sorted(map_vars)}


def init_ml(net: Network, e: Mapping[int, int], map_vars: Sequence[int], cfg: BpConfig = BpConfig()) -> Instantiation:
    state = bp_run(bp_init(net, e), cfg)
    return {v: int(np.argmax(bp_marginal(state, v))) for v in sorted(map_vars)}


def init_random(net: Network, map_vars: Sequence[int], rng: np.random.Generator) -> Instantiation:
    return {v: int(rng.integers(net.variables[v].card)) for v in sorted(map_vars)}


# -- improvement ratios -------------------------------------------------------


def improvement(state: BpState, s: Mapping[int, int], var: int, x: int) -> float:
    """Ratio Pr'(x | s - var, e) / Pr'(s(var) | s - var, e) from retracted marginals.

    +inf when only the numerator is positive; nan when both are zero.
    """
    if var not in s:
        raise InstantiationError(f"variable {var} is not a MAP variable of s")
    if x == s[var]:
        return 1.0
    r = bp_retracted_marginal(state, var)
    num, den = r[x], r[s[var]]
    if den == 0:
        return math.inf if num > 0 else math.nan
    if num == 0:
        return 0.0
    return math.exp(math.log(num) - math.log(den))


def _ratio_from_logs(new: float, old: float) -> float:
    if old == -math.inf:
        return math.inf if new > -math.inf else math.nan
    return math.exp(new - old)


class ExactScorer:
    """Scores by variable elimination with one fixed order, memoized per instantiation."""

    def __init__(self, net: Network, e: Mapping[int, int], map_vars: Sequence[int], width_cap: int | None = None):
        self.net, self.e, self.map_vars = net, dict(e), list(map_vars)
        clamped = {**self.e, **{v: 0 for v in self.map_vars}}
        self.order = min_fill_order(net, clamped)
        cap = default_width_cap() if width_cap is None else width_cap
        width = order_width(net, clamped, self.order)
        if width > cap:
            raise WidthCapExceeded(width, cap)
        self.cache: dict[tuple[int, ...], float] = {}
        self.calls = 0
        self.converged = True

    def score(self, s: Mapping[int, int]) -> float:
        key = tuple(s[v] for v in self.map_vars)
        if key not in self.cache:
            self.calls += 1
            p = eliminate(self.net, {**self.e, **s}, self.order).value
            self.cache[key] = math.log(p) if p > 0 else -math.inf
        return self.cache[key]

    def ratios(self, s: Mapping[int, int]) -> dict[tuple[int, int], float]:
        base = self.score(s)
        out = {}
        for v in self.map_vars:
            for x in range(self.net.variables[v].card):
                if x != s[v]:
                    out[(v, x)] = _ratio_from_logs(self.score({**s, v: x}), base)
        return out


class BpScorer:
    """Scores with the Bethe estimate; warm-starts BP from the previous messages."""

    def __init__(self, net: Network, e: Mapping[int, int], map_vars: Sequence[int], cfg: BpConfig):
        self.net, self.e, self.map_vars, self.cfg = net, dict(e), list(map_vars), cfg
        self.state: BpState | None = None
        self.calls = 0
        self.converged = True

    def score(self, s: Mapping[int, int]) -> float:
        evidence = {**self.e, **s}
        if self.state is None or self.state.inconsistent:
            self.state = bp_init(self.net, evidence)
        else:
            self.state = self.state.with_evidence(evidence)
        self.calls += 1
        bp_run(self.state, self.cfg)
        self.converged = self.state.converged
        if self.state.inconsistent:
            return -math.inf
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return bp_log_evidence(self.state)

    def ratios(self, s: Mapping[int, int]) -> dict[tuple[int, int], float]:
        out = {}
        for v in self.map_vars:
            for x in range(self.net.variables[v].card):
                if x != s[v]:
                    try:
                        out[(v, x)] = improvement(self.state, s, v, x)
                    except BPInconsistentError:
                        out[(v, x)] = math.nan
        return out


# -- the search ---------------------------------------------------------------


def _random_flip(net: Network, s: Instantiation, map_vars: list[int], rng: np.random.Generator) -> tuple[int, int]:
    var = map_vars[int(rng.integers(len(map_vars)))]
    others = [x for x in range(net.variables[var].card) if x != s[var]]
    return var, others[int(rng.integers(len(others)))]


def _initial(net, e, map_vars, cfg: SearchConfig, rng) -> Instantiation:
    if cfg.init == "mpe":
        return init_mpe(net, e, map_vars, cfg.bp)
    if cfg.init == "ml":
        return init_ml(net, e, map_vars, cfg.bp)
    return init_random(net, map_vars, rng)


def hill_climb(
    net: Network,
    e: Mapping[int, int],
    map_vars: Sequence[int],
    cfg: SearchConfig = SearchConfig(),
    init: Mapping[int, int] | None = None,
) -> SearchResult:
    """Approximate MAP by stochastic hill climbing; returns the best visited state."""
    e = net.validate(e)
    map_vars = _check_map_vars(net, e, map_vars)
    rng = np.random.default_rng(cfg.seed)
    if cfg.scorer == "exact":
        scorer = ExactScorer(net, e, map_vars, cfg.width_cap)
    else:
        scorer = BpScorer(net, e, map_vars, cfg.bp)

    try:
        s = dict(init) if init is not None else _initial(net, e, map_vars, cfg, rng)
    except BPInconsistentError:
        s = init_random(net, map_vars, rng)
    s = net.validate(s)
    if sorted(s) != map_vars:
        raise InstantiationError("initial instantiation must assign exactly the MAP variables")
    score = scorer.score(s)
    restarts = 0
    while cfg.scorer == "bp" and score == -math.inf:
        if restarts == 3:
            raise BPInconsistentError("BP is inconsistent at the initial state after 3 restarts")
        restarts += 1
        s = init_random(net, map_vars, rng)
        score = scorer.score(s)

    result = SearchResult(best=dict(s), best_score=score, init=dict(s), init_score=score)
    for it in range(cfg.iterations):
        if it > 0:
            score = scorer.score(s)
        if score > result.best_score:
            result.best, result.best_score = dict(s), score
        converged = scorer.converged
        if rng.random() < cfg.p_f:
            move = "random"
            var, x = _random_flip(net, s, map_vars, rng)
        else:
            best_key, best_ratio = None, 1.0
            for key, ratio in sorted(scorer.ratios(s).items()):
                if ratio > best_ratio:  # nan never compares greater
                    best_key, best_ratio = key, ratio
            if best_key is None:
                move = "stuck"
                var, x = _random_flip(net, s, map_vars, rng)
            else:
                move = "greedy"
                var, x = best_key
        result.trace.append(TraceStep(it, score, move, var, x, converged))
        s[var] = x
    result.scorer_calls = scorer.calls
    return result


def hill_climb_restarts(
    net: Network,
    e: Mapping[int, int],
    map_vars: Sequence[int],
    cfg: SearchConfig,
    restarts: int,
    jobs: int = 1,
) -> SearchResult:
    """Independent searches on split seed streams; best result wins (earliest on ties)."""
    seeds = [int(ss.generate_state(1, np.uint64)[0] >> 1)
             for ss in np.random.SeedSequence(cfg.seed).spawn(restarts)]
    cfgs = [SearchConfig(cfg.p_f, cfg.iterations, sd, cfg.init if i == 0 else "random",
                         cfg.scorer, cfg.bp, cfg.width_cap) for i, sd in enumerate(seeds)]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(lambda c: hill_climb(net, e, map_vars, c), cfgs))
    best = results[0]
    for r in results[1:]:
        if r.best_score > best.best_score:
            best = r
    return best
