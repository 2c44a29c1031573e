"""Reduction networks with known MAP values, and random benchmark instances."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .network import Instantiation, Network, Variable, make_network
from .potential import Potential

BOOL = ("F", "T")


# -- CNF ------------------------------------------------------------------------


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        clauses = tuple(tuple(int(l) for l in c) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        for c in clauses:
            if not c:
                raise ValueError("empty clause")
            for lit in c:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise ValueError(f"literal {lit} out of range 1..{self.num_vars}")

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def satisfied(self, clause: Sequence[int], x: Sequence[bool]) -> bool:
        return any(x[abs(l) - 1] == (l > 0) for l in clause)

    def count_satisfied(self, x: Sequence[bool]) -> int:
        return sum(self.satisfied(c, x) for c in self.clauses)


def brute_force_maxsat(cnf: CnfFormula) -> tuple[int, tuple[bool, ...]]:
    """Maximum number of simultaneously satisfiable clauses, by enumeration."""
    best, best_x = -1, None
    for x in itertools.product((False, True), repeat=cnf.num_vars):
        k = cnf.count_satisfied(x)
        if k > best:
            best, best_x = k, x
    return best, best_x


def parse_dimacs(text: str) -> CnfFormula:
    num_vars = num_clauses = None
    literals: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"line {lineno}: bad problem line {line!r}")
            num_vars, num_clauses = int(parts[2]), int(parts[3])
            continue
        if num_vars is None:
            raise ValueError(f"line {lineno}: clause before 'p cnf' line")
        try:
            literals.extend(int(t) for t in line.split())
        except ValueError:
            raise ValueError(f"line {lineno}: bad literal in {line!r}") from None
    if num_vars is None:
        raise ValueError("missing 'p cnf' line")
    clauses, current = [], []
    for lit in literals:
        if lit == 0:
            clauses.append(tuple(current))
            current = []
        else:
            current.append(lit)
    if current:
        clauses.append(tuple(current))
    if len(clauses) != num_clauses:
        raise ValueError(f"header declares {num_clauses} clauses, found {len(clauses)}")
    return CnfFormula(num_vars, tuple(clauses))


def format_dimacs(cnf: CnfFormula) -> str:
    lines = [f"p cnf {cnf.num_vars} {cnf.num_clauses}"]
    lines += [" ".join(map(str, c)) + " 0" for c in cnf.clauses]
    return "\n".join(lines) + "\n"


def random_kcnf(num_vars: int, num_clauses: int, k: int = 3, seed: int = 0) -> CnfFormula:
    """Clauses of k distinct variables (fewer if num_vars < k) with random signs."""
    rng = np.random.default_rng(seed)
    width = min(k, num_vars)
    clauses = []
    for _ in range(num_clauses):
        vs = rng.choice(num_vars, size=width, replace=False) + 1
        signs = rng.integers(0, 2, size=width) * 2 - 1
        clauses.append(tuple(int(v * s) for v, s in zip(vs, signs)))
    return CnfFormula(num_vars, tuple(clauses))


def maxsat_polytree(cnf: CnfFormula) -> tuple[Network, list[int], Instantiation]:
    """Polytree whose MAP over X_1..X_n given S_n = 0 scores (#satisfied)/(m 2^n).

    S_0 picks a clause uniformly; S_i records whether x_1..x_i satisfy it
    (state 0) or, if not, which clause is still pending (state c).
    """
    n, m = cnf.num_vars, cnf.num_clauses
    if n < 1 or m < 1:
        raise ValueError("need at least one variable and one clause")
    clause_states = tuple(str(c) for c in range(1, m + 1))
    s_states = ("0",) + clause_states
    specs = [("S0", clause_states, (), np.full(m, 1.0 / m))]
    for i in range(1, n + 1):
        specs.append((f"X{i}", BOOL, (), [0.5, 0.5]))
        prev_card = m if i == 1 else m + 1
        table = np.zeros((2, prev_card, m + 1))
        for xv in (0, 1):
            for ps in range(prev_card):
                # clause pending in the previous S, or 0 for already satisfied
                j = ps + 1 if i == 1 else ps
                if j == 0:
                    table[xv, ps, 0] = 1.0
                elif any(abs(l) == i and (l > 0) == bool(xv) for l in cnf.clauses[j - 1]):
                    table[xv, ps, 0] = 1.0
                else:
                    table[xv, ps, j] = 1.0
        specs.append((f"S{i}", s_states, (f"X{i}", f"S{i - 1}"), table))
    net = make_network(specs, name="maxsat")
    map_vars = [net.index(f"X{i}") for i in range(1, n + 1)]
    evidence = {net.index(f"S{n}"): 0}
    return net, map_vars, evidence


# -- Boolean formulas ---------------------------------------------------------


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Not:
    arg: "BooleanExpr"


@dataclass(frozen=True)
class And:
    args: tuple["BooleanExpr", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["BooleanExpr", ...]


BooleanExpr = Union[Var, Not, And, Or]


def evaluate(phi: BooleanExpr, x: Sequence[bool]) -> bool:
    if isinstance(phi, Var):
        return x[phi.index - 1]
    if isinstance(phi, Not):
        return not evaluate(phi.arg, x)
    if isinstance(phi, And):
        return all(evaluate(a, x) for a in phi.args)
    if isinstance(phi, Or):
        return any(evaluate(a, x) for a in phi.args)
    raise TypeError(f"not a Boolean expression: {phi!r}")


def num_vars(phi: BooleanExpr) -> int:
    if isinstance(phi, Var):
        return phi.index
    if isinstance(phi, Not):
        return num_vars(phi.arg)
    return max(num_vars(a) for a in phi.args)


def parse_expr(text: str) -> BooleanExpr:
    """Parse prefix notation such as ``(and (not (or x1 x2)) (not x3))``."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def parse():
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError("unexpected end of formula")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            if pos >= len(tokens):
                raise ValueError("unexpected end of formula")
            op = tokens[pos].lower()
            pos += 1
            args = []
            while pos < len(tokens) and tokens[pos] != ")":
                args.append(parse())
            if pos >= len(tokens):
                raise ValueError("missing ')'")
            pos += 1
            if op == "not":
                if len(args) != 1:
                    raise ValueError("'not' takes exactly one operand")
                return Not(args[0])
            if op in ("and", "or"):
                if len(args) < 2:
                    raise ValueError(f"'{op}' needs at least two operands")
                return (And if op == "and" else Or)(tuple(args))
            if op == "var" and len(args) == 1 and isinstance(args[0], Var):
                return args[0]
            raise ValueError(f"unknown operator {op!r}")
        if tok == ")":
            raise ValueError("unexpected ')'")
        if tok[:1] in ("x", "X") and tok[1:].isdigit() and int(tok[1:]) >= 1:
            return Var(int(tok[1:]))
        if tok.isdigit() and int(tok) >= 1:
            return Var(int(tok))
        raise ValueError(f"bad token {tok!r}")

    phi = parse()
    if pos != len(tokens):
        raise ValueError("trailing tokens after formula")
    return phi


def format_expr(phi: BooleanExpr) -> str:
    if isinstance(phi, Var):
        return f"x{phi.index}"
    if isinstance(phi, Not):
        return f"(not {format_expr(phi.arg)})"
    op = "and" if isinstance(phi, And) else "or"
    return f"({op} " + " ".join(format_expr(a) for a in phi.args) + ")"


def emajsat_network(
    phi: BooleanExpr, k: int, n: int | None = None
) -> tuple[Network, list[int], Instantiation, Fraction]:
    """Network simulating `phi`, with MAP over x_1..x_k given v_phi = T.

    Pr(x, v_phi = T) equals the satisfying fraction of completions over 2^k,
    so the E-MAJSAT answer is "yes" iff the MAP score exceeds the returned
    threshold 1/2^(k+1).
    """
    n = num_vars(phi) if n is None else n
    if num_vars(phi) > n:
        raise ValueError("formula mentions variables beyond n")
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    specs: list = [(f"x{i}", BOOL, (), [0.5, 0.5]) for i in range(1, n + 1)]
    counters = {"not": 0, "and": 0, "or": 0}

    def add_gate(kind: str, operands: list[str], fn):
        counters[kind] += 1
        name = f"{kind}{counters[kind]}"
        parents = list(dict.fromkeys(operands))
        table = np.zeros((2,) * len(parents) + (2,))
        for vals in itertools.product((0, 1), repeat=len(parents)):
            env = dict(zip(parents, vals))
            out = fn([bool(env[o]) for o in operands])
            table[vals + (int(out),)] = 1.0
        specs.append((name, BOOL, tuple(parents), table))
        return name

    def build(node) -> str:
        if isinstance(node, Var):
            return f"x{node.index}"
        if isinstance(node, Not):
            return add_gate("not", [build(node.arg)], lambda v: not v[0])
        if isinstance(node, And):
            return add_gate("and", [build(a) for a in node.args], all)
        if isinstance(node, Or):
            return add_gate("or", [build(a) for a in node.args], any)
        raise TypeError(f"malformed expression node {node!r}")

    top = build(phi)
    if isinstance(phi, Var):
        # v_phi must be distinct from the MAP roots
        specs.append(("phi", BOOL, (top,), [[1.0, 0.0], [0.0, 1.0]]))
        top = "phi"
    net = make_network(specs, name="emajsat")
    map_vars = [net.index(f"x{i}") for i in range(1, k + 1)]
    evidence = {net.index(top): 1}
    return net, map_vars, evidence, Fraction(1, 2 ** (k + 1))


# -- random benchmark networks ------------------------------------------------


@dataclass(frozen=True)
class GenConfig:
    num_vars: int
    bias: float = 0.25
    max_parents: int = 4
    seed: int = 0
    num_roots: int | None = None
    min_states: int = 2
    max_states: int = 2
    max_width: int | None = None

    def __post_init__(self):
        if self.max_parents < 1:
            raise ValueError("max_parents must be >= 1")
        if not self.bias > 0:
            raise ValueError("bias must be positive")
        if not 2 <= self.min_states <= self.max_states:
            raise ValueError("need 2 <= min_states <= max_states")
        if self.num_vars < 1:
            raise ValueError("num_vars must be >= 1")


def _dirichlet_rows(rng: np.random.Generator, shape: tuple[int, ...], card: int, bias: float) -> np.ndarray:
    rows = rng.dirichlet(np.full(card, bias), size=int(np.prod(shape, dtype=int)))
    # keep every row an exact-enough probability vector after underflow
    rows = rows / rows.sum(axis=1, keepdims=True)
    return rows.reshape(shape + (card,))


def _build(rng: np.random.Generator, cfg: GenConfig, parent_sets: list[tuple[int, ...]]) -> Network:
    cards = rng.integers(cfg.min_states, cfg.max_states + 1, size=cfg.num_vars)
    variables, cpts = [], []
    for i, ps in enumerate(parent_sets):
        card = int(cards[i])
        variables.append(Variable(i, f"V{i}", tuple(f"s{j}" for j in range(card))))
        shape = tuple(int(cards[p]) for p in ps)
        cpts.append(Potential(ps + (i,), _dirichlet_rows(rng, shape, card, cfg.bias)))
    return Network(tuple(variables), tuple(parent_sets), tuple(cpts), name=f"random{cfg.seed}")


def random_network(cfg: GenConfig) -> Network:
    """Random DAG over topologically numbered nodes with Dirichlet(bias) CPT rows.

    The first `num_roots` nodes (default num_vars // 4, at least 1) are roots;
    every later node draws 1..max_parents parents uniformly from its
    predecessors. With `max_width` set, draws whose unconstrained min-fill
    width exceeds it are rejected and redrawn from the same stream.
    """
    from .exact import min_fill_order, order_width

    rng = np.random.default_rng(cfg.seed)
    roots = cfg.num_roots if cfg.num_roots is not None else max(1, cfg.num_vars // 4)
    roots = min(max(roots, 1), cfg.num_vars)
    for _ in range(1000):
        parent_sets = []
        for i in range(cfg.num_vars):
            if i < roots:
                parent_sets.append(())
                continue
            k = int(rng.integers(1, min(cfg.max_parents, i) + 1))
            parent_sets.append(tuple(sorted(int(p) for p in rng.choice(i, size=k, replace=False))))
        net = _build(rng, cfg, parent_sets)
        if cfg.max_width is None or order_width(net, {}, min_fill_order(net, {})) <= cfg.max_width:
            return net
    raise RuntimeError(f"no network within width {cfg.max_width} after 1000 draws")


def random_polytree(cfg: GenConfig) -> Network:
    """Random polytree: each node joins 1..max_parents distinct earlier components.

    Parents of node i are drawn from distinct connected components of the
    nodes before it, so the skeleton never closes a cycle. Roughly one node
    in four (or `num_roots`) starts a new component.
    """
    rng = np.random.default_rng(cfg.seed)
    comp = list(range(cfg.num_vars))
    parent_sets: list[tuple[int, ...]] = []
    roots = cfg.num_roots if cfg.num_roots is not None else max(1, cfg.num_vars // 4)
    for i in range(cfg.num_vars):
        if i < roots:
            parent_sets.append(())
            continue
        comps: dict[int, list[int]] = {}
        for j in range(i):
            comps.setdefault(comp[j], []).append(j)
        keys = sorted(comps)
        k = int(rng.integers(1, min(cfg.max_parents, len(keys)) + 1))
        chosen = rng.choice(len(keys), size=k, replace=False)
        ps = tuple(sorted(int(rng.choice(comps[keys[c]])) for c in chosen))
        merged = {comp[p] for p in ps}
        for j in range(i):
            if comp[j] in merged:
                comp[j] = i
        comp[i] = i
        parent_sets.append(ps)
    return _build(rng, cfg, parent_sets)


def random_map_problem(
    net: Network, n_map: int, n_ev: int, seed: int
) -> tuple[list[int], Instantiation]:
    """MAP variables drawn among roots, evidence as uniform states on distinct leaves."""
    rng = np.random.default_rng(seed)
    roots = net.roots()
    if n_map > len(roots):
        raise ValueError(f"need {n_map} roots, network has {len(roots)}")
    map_vars = sorted(int(v) for v in rng.choice(roots, size=n_map, replace=False)) if n_map else []
    leaves = [v for v in net.leaves() if v not in map_vars]
    if n_ev > len(leaves):
        raise ValueError(f"need {n_ev} non-MAP leaves, network has {len(leaves)}")
    ev_vars = sorted(int(v) for v in rng.choice(leaves, size=n_ev, replace=False)) if n_ev else []
    evidence = {v: int(rng.integers(net.variables[v].card)) for v in ev_vars}
    return map_vars, evidence
