"""Discrete Bayesian networks and the BNET text format.

BNET grammar (``#`` starts a comment)::

    network <name>
    variable <name> states <s1> <s2> ...
    cpt <child> given <p1> ... <pk> {
      row <p1-state> ... <pk-state> : <v_0> ... <v_{c-1}>
    }

Root variables use ``cpt <child> {`` and rows of the form ``row : v_0 ...``.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BnetError, InstantiationError
from .potential import Potential

ROW_SUM_TOL = 1e-9

_NAME_RE = re.compile(r"^[A-Za-z0-9_.+\-]+$")

# A (partial) assignment: variable id -> state index.
Instantiation = dict[int, int]


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    states: tuple[str, ...]

    @property
    def card(self) -> int:
        return len(self.states)


@dataclass(frozen=True, eq=False)
class Network:
    variables: tuple[Variable, ...]
    parents: tuple[tuple[int, ...], ...]
    cpts: tuple[Potential, ...]
    name: str = "net"
    _by_name: dict = field(init=False, repr=False, compare=False)
    _children: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        variables = tuple(self.variables)
        parents = tuple(tuple(int(u) for u in ps) for ps in self.parents)
        cpts = tuple(self.cpts)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "cpts", cpts)
        n = len(variables)
        if len(parents) != n or len(cpts) != n:
            raise BnetError("need exactly one parent list and one CPT per variable")
        by_name = {}
        for i, var in enumerate(variables):
            if var.id != i:
                raise BnetError(f"variable {var.name!r} has id {var.id}, expected {i}")
            if var.name in by_name:
                raise BnetError(f"duplicate variable name {var.name!r}")
            if len(set(var.states)) != len(var.states) or not var.states:
                raise BnetError(f"variable {var.name!r} has empty or duplicate states")
            by_name[var.name] = i
        object.__setattr__(self, "_by_name", by_name)
        children = [[] for _ in range(n)]
        for child, ps in enumerate(parents):
            if len(set(ps)) != len(ps):
                raise BnetError(f"duplicate parent of {variables[child].name!r}")
            for u in ps:
                if not 0 <= u < n or u == child:
                    raise BnetError(f"bad parent {u} of {variables[child].name!r}")
                children[u].append(child)
        object.__setattr__(self, "_children", tuple(tuple(c) for c in children))
        for i, cpt in enumerate(cpts):
            name = variables[i].name
            if cpt.scope != parents[i] + (i,):
                raise BnetError(f"CPT scope of {name!r} must be (parents..., child)")
            expected = tuple(variables[v].card for v in cpt.scope)
            if cpt.values.shape != expected:
                raise BnetError(f"CPT of {name!r} has shape {cpt.values.shape}, expected {expected}")
            sums = cpt.values.sum(axis=-1)
            bad = np.abs(sums - 1.0) > ROW_SUM_TOL
            if np.any(bad):
                row = tuple(int(k) for k in np.argwhere(bad)[0]) if sums.ndim else ()
                raise BnetError(
                    f"CPT row {row} of {name!r} sums to {float(np.asarray(sums)[row])!r}"
                )
        self.topological_order()

    # -- structure ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self.variables)

    @property
    def cards(self) -> tuple[int, ...]:
        return tuple(v.card for v in self.variables)

    def children(self, var: int) -> tuple[int, ...]:
        return self._children[var]

    def roots(self) -> list[int]:
        return [i for i, ps in enumerate(self.parents) if not ps]

    def leaves(self) -> list[int]:
        return [i for i in range(len(self)) if not self._children[i]]

    def topological_order(self) -> list[int]:
        indeg = [len(ps) for ps in self.parents]
        ready = [i for i, d in enumerate(indeg) if d == 0]
        order = []
        while ready:
            v = ready.pop(0)
            order.append(v)
            for c in self._children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != len(self):
            stuck = [self.variables[i].name for i, d in enumerate(indeg) if d > 0]
            raise BnetError(f"cycle detected among {stuck}")
        return order

    # -- names <-> ids -----------------------------------------------------

    def index(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise InstantiationError(f"unknown variable {name!r}") from None

    def state_index(self, var: int, state: str) -> int:
        states = self.variables[var].states
        if state in states:
            return states.index(state)
        raise InstantiationError(
            f"unknown state {state!r} for variable {self.variables[var].name!r}"
        )

    def validate(self, inst: Mapping[int, int]) -> Instantiation:
        """Check an instantiation against this network and return it as a dict."""
        out = {}
        for var, state in inst.items():
            var, state = int(var), int(state)
            if not 0 <= var < len(self):
                raise InstantiationError(f"unknown variable id {var}")
            if not 0 <= state < self.variables[var].card:
                raise InstantiationError(
                    f"state {state} out of range for {self.variables[var].name!r}"
                )
            out[var] = state
        return out

    def parse_assignment(self, text: str) -> Instantiation:
        """Parse ``"A=t,B=f"`` into an instantiation."""
        inst: Instantiation = {}
        for item in filter(None, (s.strip() for s in text.split(","))):
            if "=" not in item:
                raise InstantiationError(f"expected Var=state, got {item!r}")
            name, state = (s.strip() for s in item.split("=", 1))
            var = self.index(name)
            if var in inst:
                raise InstantiationError(f"variable {name!r} assigned twice")
            inst[var] = self.state_index(var, state)
        return inst

    def named(self, inst: Mapping[int, int]) -> dict[str, str]:
        return {
            self.variables[v].name: self.variables[v].states[s]
            for v, s in sorted(inst.items())
        }

    def format_assignment(self, inst: Mapping[int, int]) -> str:
        return ",".join(f"{k}={v}" for k, v in self.named(inst).items())


# -- queries ------------------------------------------------------------------


def joint_probability(net: Network, w: Mapping[int, int]) -> float:
    """Chain-rule probability of a complete instantiation."""
    if len(w) != len(net) or any(v not in w for v in range(len(net))):
        raise InstantiationError("joint_probability needs a complete instantiation")
    p = 1.0
    for cpt in net.cpts:
        p *= float(cpt.values[tuple(w[v] for v in cpt.scope)])
    return p


def is_polytree(net: Network) -> bool:
    parent = list(range(len(net)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for child, ps in enumerate(net.parents):
        for u in ps:
            a, b = find(u), find(child)
            if a == b:
                return False
            parent[a] = b
    return True


def all_instantiations(net: Network, variables: Sequence[int]) -> Iterable[Instantiation]:
    """Every assignment to `variables`, lexicographic in the given order."""
    for states in itertools.product(*(range(net.variables[v].card) for v in variables)):
        yield dict(zip(variables, states))


# -- BNET text format ---------------------------------------------------------


def _check_name(token: str, what: str, line: int) -> str:
    if not _NAME_RE.match(token):
        raise BnetError(f"invalid {what} {token!r}", line)
    return token


def _parse_number(token: str, line: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise BnetError(f"bad number {token!r}", line) from None
    if not math.isfinite(value) or value < 0:
        raise BnetError(f"CPT entries must be finite and nonnegative, got {token!r}", line)
    return value


def parse_network(text: str) -> Network:
    name = "net"
    var_decls: list[tuple[str, tuple[str, ...], int]] = []
    # child name -> (line, parent names, [(line, parent states, values)])
    cpt_blocks: dict[str, tuple[int, list[str], list]] = {}
    current = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        head = tokens[0]
        if current is not None:
            if head == "}":
                if len(tokens) != 1:
                    raise BnetError("unexpected tokens after '}'", lineno)
                current = None
            elif head == "row":
                if ":" not in tokens:
                    raise BnetError("row is missing ':'", lineno)
                colon = tokens.index(":")
                values = [_parse_number(t, lineno) for t in tokens[colon + 1 :]]
                cpt_blocks[current][2].append((lineno, tokens[1:colon], values))
            else:
                raise BnetError(f"expected 'row' or '}}', got {head!r}", lineno)
            continue
        if head == "network":
            if len(tokens) != 2:
                raise BnetError("expected 'network <name>'", lineno)
            name = _check_name(tokens[1], "network name", lineno)
        elif head == "variable":
            if len(tokens) < 4 or tokens[2] != "states":
                raise BnetError("expected 'variable <name> states <s1> ...'", lineno)
            vname = _check_name(tokens[1], "variable name", lineno)
            states = tuple(_check_name(s, "state name", lineno) for s in tokens[3:])
            if len(set(states)) != len(states):
                raise BnetError(f"duplicate state name in {vname!r}", lineno)
            if any(d[0] == vname for d in var_decls):
                raise BnetError(f"variable {vname!r} declared twice", lineno)
            var_decls.append((vname, states, lineno))
        elif head == "cpt":
            if len(tokens) < 3 or tokens[-1] != "{":
                raise BnetError("expected 'cpt <child> [given <parents>] {'", lineno)
            child = tokens[1]
            if len(tokens) == 3:
                pnames = []
            elif tokens[2] == "given" and len(tokens) > 4:
                pnames = tokens[3:-1]
            else:
                raise BnetError("malformed cpt header", lineno)
            if child in cpt_blocks:
                raise BnetError(f"second CPT for {child!r}", lineno)
            cpt_blocks[child] = (lineno, pnames, [])
            current = child
        else:
            raise BnetError(f"unknown statement {head!r}", lineno)
    if current is not None:
        raise BnetError(f"unterminated CPT block for {current!r}")

    variables = tuple(Variable(i, n, s) for i, (n, s, _) in enumerate(var_decls))
    ids = {v.name: v.id for v in variables}
    parents: list[tuple[int, ...]] = []
    cpts: list[Potential] = []
    for var in variables:
        if var.name not in cpt_blocks:
            raise BnetError(f"no CPT for variable {var.name!r}", var_decls[var.id][2])
    for child in cpt_blocks:
        if child not in ids:
            raise BnetError(f"CPT for unknown variable {child!r}", cpt_blocks[child][0])
    for var in variables:
        header_line, pnames, rows = cpt_blocks[var.name]
        pids = []
        for pn in pnames:
            if pn not in ids:
                raise BnetError(f"unknown parent {pn!r}", header_line)
            pids.append(ids[pn])
        if len(set(pids)) != len(pids):
            raise BnetError(f"duplicate parent in CPT of {var.name!r}", header_line)
        pcards = [variables[p].card for p in pids]
        table = np.zeros(tuple(pcards) + (var.card,))
        seen = set()
        for lineno, pstates, values in rows:
            if len(pstates) != len(pids):
                raise BnetError(
                    f"row has {len(pstates)} parent states, expected {len(pids)}", lineno
                )
            key = []
            for p, s in zip(pids, pstates):
                if s not in variables[p].states:
                    raise BnetError(f"unknown state {s!r} of {variables[p].name!r}", lineno)
                key.append(variables[p].states.index(s))
            key = tuple(key)
            if key in seen:
                raise BnetError(f"duplicate row {' '.join(pstates)}", lineno)
            seen.add(key)
            if len(values) != var.card:
                raise BnetError(f"row has {len(values)} values, expected {var.card}", lineno)
            total = math.fsum(values)
            if abs(total - 1.0) > ROW_SUM_TOL:
                raise BnetError(f"row sums to {total!r}, outside 1 +/- {ROW_SUM_TOL}", lineno)
            table[key] = values
        expected = math.prod(pcards)
        if len(seen) != expected:
            raise BnetError(
                f"CPT of {var.name!r} has {len(seen)} rows, expected {expected}", header_line
            )
        parents.append(tuple(pids))
        cpts.append(Potential(tuple(pids) + (var.id,), table))
    return Network(variables, tuple(parents), tuple(cpts), name=name)


def serialize_network(net: Network) -> str:
    lines = [f"network {net.name}"]
    for var in net.variables:
        lines.append(f"variable {var.name} states {' '.join(var.states)}")
    for var in net.variables:
        ps = net.parents[var.id]
        if ps:
            pnames = " ".join(net.variables[p].name for p in ps)
            lines.append(f"cpt {var.name} given {pnames} {{")
        else:
            lines.append(f"cpt {var.name} {{")
        table = net.cpts[var.id].values
        for key in itertools.product(*(range(net.variables[p].card) for p in ps)):
            pstates = " ".join(net.variables[p].states[s] for p, s in zip(ps, key))
            values = " ".join(format(float(x), ".17g") for x in table[key])
            lines.append(f"  row {pstates} : {values}" if ps else f"  row : {values}")
        lines.append("}")
    return "\n".join(lines) + "\n"


def read_network(path) -> Network:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read())


def write_network(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_network(net))


def make_network(
    specs: Sequence[tuple[str, Sequence[str], Sequence[str], object]], name: str = "net"
) -> Network:
    """Build a network from ``(name, states, parent names, table)`` tuples.

    `table` is anything reshapeable to (parent cards..., child card).
    Parents must be listed before their children.
    """
    ids: dict[str, int] = {}
    variables, parents, cpts = [], [], []
    for i, (vname, states, pnames, table) in enumerate(specs):
        ids[vname] = i
        var = Variable(i, vname, tuple(states))
        pids = tuple(ids[p] for p in pnames)
        shape = tuple(variables[p].card for p in pids) + (var.card,)
        variables.append(var)
        parents.append(pids)
        cpts.append(Potential(pids + (i,), np.asarray(table, dtype=np.float64).reshape(shape)))
    return Network(tuple(variables), tuple(parents), tuple(cpts), name=name)
