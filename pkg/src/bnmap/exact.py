"""Exact inference by variable elimination, and elimination-order analysis.

Evidence is applied by slicing CPTs before elimination, so evidence variables
never appear in an order. An order tags each variable SUM or MAX; it is a
valid MAP order when no MAX step multiplies a potential that still mentions
an uneliminated SUM variable.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import GuardExceeded, InstantiationError, InvalidOrderError, WidthCapExceeded
from .network import Instantiation, Network, all_instantiations, joint_probability
from .potential import Potential, max_out, multiply_all, sum_out

DEFAULT_WIDTH_CAP = 25
BRUTE_FORCE_GUARD = 2**20


class Mode(str, enum.Enum):
    SUM = "sum"
    MAX = "max"


@dataclass(frozen=True)
class EliminationOrder:
    steps: tuple[tuple[int, Mode], ...]

    def __post_init__(self):
        steps = tuple((int(v), Mode(m)) for v, m in self.steps)
        object.__setattr__(self, "steps", steps)
        vs = [v for v, _ in steps]
        if len(set(vs)) != len(vs):
            raise InvalidOrderError("variable eliminated twice")

    @classmethod
    def sum_then_max(cls, sum_vars: Iterable[int], max_vars: Iterable[int]) -> EliminationOrder:
        return cls(tuple((v, Mode.SUM) for v in sum_vars) + tuple((v, Mode.MAX) for v in max_vars))

    @property
    def variables(self) -> list[int]:
        return [v for v, _ in self.steps]

    @property
    def max_vars(self) -> list[int]:
        return [v for v, m in self.steps if m is Mode.MAX]

    @property
    def sum_vars(self) -> list[int]:
        return [v for v, m in self.steps if m is Mode.SUM]

    def mode(self, var: int) -> Mode:
        return dict(self.steps)[var]

    def is_sum_first(self) -> bool:
        modes = [m for _, m in self.steps]
        return Mode.SUM not in modes[modes.index(Mode.MAX):] if Mode.MAX in modes else True

    def __iter__(self):
        return iter(self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def __str__(self) -> str:
        return " ".join(f"{m.value}:{v}" for v, m in self.steps)


@dataclass(frozen=True)
class EliminationTree:
    """Tree over eliminated variables.

    ``parent[v]`` is the variable whose elimination consumes the potential
    produced by eliminating ``v`` (None if that potential is a constant).
    ``scope_size[v]`` counts the variables of the product formed at ``v``.
    """

    order: EliminationOrder
    parent: dict[int, int | None]
    scope_size: dict[int, int]

    @property
    def width(self) -> int:
        return max(self.scope_size.values(), default=0)

    def children(self, var: int) -> list[int]:
        return [v for v, p in self.parent.items() if p == var]

    def consistent_with(self, order: EliminationOrder) -> bool:
        pos = {v: i for i, v in enumerate(order.variables)}
        if set(pos) != set(self.parent):
            return False
        return all(p is None or pos[v] < pos[p] for v, p in self.parent.items())


@dataclass
class EliminationResult:
    value: float
    argmax: Instantiation | None
    width: int


def default_width_cap() -> int:
    env = os.environ.get("BNMAP_WIDTH_CAP")
    return int(env) if env else DEFAULT_WIDTH_CAP


def _reduced_cpts(net: Network, e: Mapping[int, int]) -> list[Potential]:
    return [cpt.reduce(e) for cpt in net.cpts]


def _check_coverage(net: Network, e: Mapping[int, int], order: EliminationOrder) -> None:
    want = set(range(len(net))) - set(e)
    got = set(order.variables)
    if got & set(e):
        raise InvalidOrderError("order contains evidence variables")
    if got != want:
        missing = sorted(want - got)
        raise InvalidOrderError(f"order does not cover variables {missing}")


def _simulate(net: Network, e: Mapping[int, int], order: EliminationOrder):
    """Symbolic elimination: product scopes, tree parents, first invalid MAX step."""
    pending = [frozenset(p.scope) for p in _reduced_cpts(net, e)]
    pending = [(s, None) for s in pending]  # (scope, producing variable)
    pos = {v: i for i, v in enumerate(order.variables)}
    modes = dict(order.steps)
    parent: dict[int, int | None] = {}
    sizes: dict[int, int] = {}
    invalid_at = None
    for var, mode in order:
        used = [(s, src) for s, src in pending if var in s]
        pending = [(s, src) for s, src in pending if var not in s]
        scope = frozenset({var}).union(*(s for s, _ in used))
        sizes[var] = len(scope)
        for _, src in used:
            if src is not None:
                parent[src] = var
        rest = scope - {var}
        if mode is Mode.MAX and invalid_at is None:
            if any(modes.get(u) is Mode.SUM for u in rest):
                invalid_at = var
        if rest:
            pending.append((rest, var))
        else:
            parent[var] = None
    for v in order.variables:
        parent.setdefault(v, None)
    # The producing variable's parent is the first later step mentioning it.
    assert all(p is None or pos[p] > pos[v] for v, p in parent.items())
    return parent, sizes, invalid_at


def is_valid_map_order(net: Network, e: Mapping[int, int], order: EliminationOrder) -> bool:
    e = net.validate(e)
    _check_coverage(net, e, order)
    return _simulate(net, e, order)[2] is None


def elimination_tree(net: Network, e: Mapping[int, int], order: EliminationOrder) -> EliminationTree:
    e = net.validate(e)
    _check_coverage(net, e, order)
    parent, sizes, _ = _simulate(net, e, order)
    return EliminationTree(order, parent, sizes)


def order_width(net: Network, e: Mapping[int, int], order: EliminationOrder) -> int:
    return elimination_tree(net, e, order).width


def eliminate(net: Network, e: Mapping[int, int], order: EliminationOrder) -> EliminationResult:
    """Run variable elimination along `order` with evidence `e`.

    The value is the sum/max (per step mode) of the joint restricted to `e`.
    When the order has MAX steps the maximizing assignment is recovered by
    traceback through the recorded argmax tables.
    """
    e = net.validate(e)
    _check_coverage(net, e, order)
    if _simulate(net, e, order)[2] is not None:
        raise InvalidOrderError("MAX step would maximize a potential mentioning a SUM variable")
    potentials = _reduced_cpts(net, e)
    width = 0
    traceback: list[tuple[int, tuple[int, ...], np.ndarray]] = []
    for var, mode in order:
        used = [p for p in potentials if var in p.scope]
        potentials = [p for p in potentials if var not in p.scope]
        product = multiply_all(used) if used else Potential((var,), np.ones(net.variables[var].card))
        width = max(width, len(product.scope))
        if mode is Mode.SUM:
            potentials.append(sum_out(product, var))
        else:
            reduced, arg = max_out(product, var)
            traceback.append((var, reduced.scope, arg))
            potentials.append(reduced)
    value = float(multiply_all(potentials).values)

    argmax = None
    if traceback:
        argmax = {}
        for var, scope, arg in reversed(traceback):
            argmax[var] = int(arg[tuple(argmax[u] for u in scope)])
        argmax = dict(sorted(argmax.items()))
    return EliminationResult(value, argmax, width)


# -- orders ---------------------------------------------------------------------


def _interaction_graph(net: Network, e: Mapping[int, int]) -> dict[int, set[int]]:
    graph = {v: set() for v in range(len(net)) if v not in e}
    for cpt in net.cpts:
        scope = [v for v in cpt.scope if v not in e]
        for a in scope:
            graph[a].update(u for u in scope if u != a)
    return graph


def _fill_in(graph: dict[int, set[int]], v: int) -> int:
    nbrs = sorted(graph[v])
    return sum(
        1 for i, a in enumerate(nbrs) for b in nbrs[i + 1 :] if b not in graph[a]
    )


def min_fill_order(
    net: Network, e: Mapping[int, int], map_vars: Iterable[int] = ()
) -> EliminationOrder:
    """Greedy min-fill over the moral graph; non-MAP variables go first.

    Ties break toward the lowest variable id.
    """
    e = net.validate(e)
    map_set = set(map_vars)
    if map_set & set(e):
        raise InstantiationError("MAP variables overlap the evidence")
    graph = _interaction_graph(net, e)
    phases = (sorted(set(graph) - map_set), sorted(map_set))
    steps = []
    for phase, mode in zip(phases, (Mode.SUM, Mode.MAX)):
        remaining = set(phase)
        while remaining:
            v = min(remaining, key=lambda u: (_fill_in(graph, u), u))
            remaining.discard(v)
            nbrs = graph.pop(v)
            for a in nbrs:
                graph[a].discard(v)
                graph[a].update(nbrs - {a})
            steps.append((v, mode))
    return EliminationOrder(tuple(steps))


def sum_first_reorder(order: EliminationOrder, tree: EliminationTree) -> EliminationOrder:
    """Move every SUM step ahead of every MAX step without changing the tree.

    Keeps the relative order within each group, which respects the tree's
    partial order because no SUM variable can be the parent of a MAX variable
    in a valid order.
    """
    modes = dict(order.steps)
    if set(modes) != set(tree.parent):
        raise InvalidOrderError("tree does not belong to this order")
    for v, p in tree.parent.items():
        if p is not None and modes[v] is Mode.MAX and modes[p] is Mode.SUM:
            raise InvalidOrderError(f"invalid order: MAX variable {v} has SUM parent {p}")
    return EliminationOrder.sum_then_max(order.sum_vars, order.max_vars)


def random_linear_extension(tree: EliminationTree, rng: np.random.Generator) -> EliminationOrder:
    """A uniformly chosen-at-each-step topological order of the tree (children first)."""
    modes = dict(tree.order.steps)
    remaining_children = {v: len(tree.children(v)) for v in tree.parent}
    ready = sorted(v for v, k in remaining_children.items() if k == 0)
    steps = []
    while ready:
        v = ready.pop(int(rng.integers(len(ready))))
        steps.append((v, modes[v]))
        p = tree.parent[v]
        if p is not None:
            remaining_children[p] -= 1
            if remaining_children[p] == 0:
                ready.append(p)
                ready.sort()
    return EliminationOrder(tuple(steps))


# -- queries --------------------------------------------------------------------


def _guarded_order(net, e, map_vars, width_cap) -> EliminationOrder:
    order = min_fill_order(net, e, map_vars)
    cap = default_width_cap() if width_cap is None else width_cap
    width = order_width(net, e, order)
    if width > cap:
        raise WidthCapExceeded(width, cap)
    return order


def probability_of_evidence(
    net: Network, e: Mapping[int, int], *, width_cap: int | None = None,
    order: EliminationOrder | None = None,
) -> float:
    e = net.validate(e)
    if order is None:
        order = _guarded_order(net, e, (), width_cap)
    return eliminate(net, e, order).value


def exact_map(
    net: Network, e: Mapping[int, int], map_vars: Iterable[int], *, width_cap: int | None = None
) -> tuple[Instantiation, float]:
    """Maximize Pr(x, e) over instantiations x of `map_vars`."""
    e = net.validate(e)
    map_vars = sorted(set(map_vars))
    order = _guarded_order(net, e, map_vars, width_cap)
    result = eliminate(net, e, order)
    return (result.argmax or {}), result.value


def exact_mpe(
    net: Network, e: Mapping[int, int], *, width_cap: int | None = None
) -> tuple[Instantiation, float]:
    e = net.validate(e)
    return exact_map(net, e, [v for v in range(len(net)) if v not in e], width_cap=width_cap)


def exact_marginal(
    net: Network, e: Mapping[int, int], var: int, *, width_cap: int | None = None
) -> np.ndarray:
    """Posterior Pr(var | e); for an evidence variable, Pr(var | e - var)."""
    e = net.validate(e)
    e = {v: s for v, s in e.items() if v != var}
    order = _guarded_order(net, e, [var], width_cap)
    potentials = _reduced_cpts(net, e)
    for v, _ in order.steps[:-1]:
        used = [p for p in potentials if v in p.scope]
        potentials = [p for p in potentials if v not in p.scope]
        if used:
            potentials.append(sum_out(multiply_all(used), v))
    table = np.ones(net.variables[var].card)
    for p in potentials:
        table = table * (p.values if p.scope == (var,) else float(p.values))
    total = table.sum()
    if total <= 0:
        raise ZeroDivisionError("evidence has probability zero")
    return table / total


def brute_force_map(
    net: Network, e: Mapping[int, int], map_vars: Iterable[int]
) -> tuple[Instantiation, float]:
    """Enumerate every MAP instantiation, summing the joint over completions.

    Ties go to the lexicographically smallest assignment (by variable id).
    """
    e = net.validate(e)
    map_vars = sorted(set(map_vars))
    if set(map_vars) & set(e):
        raise InstantiationError("MAP variables overlap the evidence")
    size = math.prod(net.variables[v].card for v in map_vars)
    if size > BRUTE_FORCE_GUARD:
        raise GuardExceeded(f"{size} MAP instantiations exceed the guard {BRUTE_FORCE_GUARD}")
    others = [v for v in range(len(net)) if v not in e and v not in map_vars]
    best, best_score = None, -1.0
    for x in all_instantiations(net, map_vars):
        score = 0.0
        for rest in all_instantiations(net, others):
            score += joint_probability(net, {**e, **x, **rest})
        if score > best_score:
            best, best_score = x, score
    return best, best_score
