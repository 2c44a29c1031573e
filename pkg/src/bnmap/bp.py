"""Loopy belief propagation on the Bayesian network's family structure.

Every edge U -> X carries two messages, both vectors over the parent's
states: the causal message (U, X) sent by the parent and the diagnostic
message (X, U) sent by the child. A node X with parents U combines its
family table lambda_X(x) Pr(x | u) with all incoming messages; leaving one
neighbour's message out of the product and summing onto that neighbour's
variable gives the outgoing message. Messages are normalized to sum one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import BPInconsistentError
from .network import Instantiation, Network


class NonConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class BpConfig:
    max_iterations: int = 1000
    tolerance: float = 1e-8
    damping: float = 0.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")


@dataclass
class BpState:
    net: Network
    evidence: Instantiation
    lambdas: list[np.ndarray]
    messages: dict[tuple[int, int], np.ndarray]
    iteration: int = 0
    converged: bool = False
    max_delta: float = math.inf
    inconsistent: bool = False
    zero_messages: list[tuple[int, int]] = field(default_factory=list)

    def with_evidence(self, e: Mapping[int, int]) -> BpState:
        """Warm-start copy: same messages, new evidence indicators."""
        fresh = bp_init(self.net, e)
        fresh.messages = {k: m.copy() for k, m in self.messages.items()}
        if any(m.sum() <= 0 for m in fresh.messages.values()):
            # a previous contradiction left zeros behind; restart those cold
            for k, m in fresh.messages.items():
                if m.sum() <= 0:
                    fresh.messages[k] = np.full(m.shape, 1.0 / m.size)
        return fresh


def bp_init(net: Network, e: Mapping[int, int]) -> BpState:
    e = net.validate(e)
    lambdas = []
    for var in net.variables:
        lam = np.ones(var.card)
        if var.id in e:
            lam = np.zeros(var.card)
            lam[e[var.id]] = 1.0
        lambdas.append(lam)
    messages = {}
    for child, ps in enumerate(net.parents):
        for u in ps:
            card = net.variables[u].card
            messages[(u, child)] = np.full(card, 1.0 / card)
            messages[(child, u)] = np.full(card, 1.0 / card)
    return BpState(net, dict(e), lambdas, messages)


def _along(vec: np.ndarray, axis: int, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = vec.shape[0]
    return vec.reshape(shape)


def _family(state: BpState, x: int, *, skip_parent: int | None = None,
            skip_child: int | None = None, use_lambda: bool = True) -> np.ndarray:
    """Family table of x times every incoming message except the skipped one."""
    net = state.net
    ps = net.parents[x]
    table = net.cpts[x].values
    nd = table.ndim
    if use_lambda:
        table = table * _along(state.lambdas[x], nd - 1, nd)
    for i, u in enumerate(ps):
        if i != skip_parent:
            table = table * _along(state.messages[(u, x)], i, nd)
    for c in net.children(x):
        if c != skip_child:
            table = table * _along(state.messages[(c, x)], nd - 1, nd)
    return table


def _reduce_onto(table: np.ndarray, axis: int, op) -> np.ndarray:
    others = tuple(a for a in range(table.ndim) if a != axis)
    return op(table, axis=others) if others else table


def _normalize(vec: np.ndarray) -> np.ndarray | None:
    total = vec.sum()
    if not total > 0:
        return None
    return vec / total


def _sweep(state: BpState, op) -> dict[tuple[int, int], np.ndarray | None]:
    net = state.net
    new = {}
    for x in range(len(net)):
        ps = net.parents[x]
        nd = len(ps) + 1
        for c in net.children(x):
            new[(x, c)] = _normalize(_reduce_onto(_family(state, x, skip_child=c), nd - 1, op))
        for i, u in enumerate(ps):
            new[(x, u)] = _normalize(_reduce_onto(_family(state, x, skip_parent=i), i, op))
    return new


def _run(state: BpState, cfg: BpConfig, op) -> BpState:
    d = cfg.damping
    for _ in range(cfg.max_iterations):
        new = _sweep(state, op)
        delta = 0.0
        zeros = []
        for key, msg in new.items():
            old = state.messages[key]
            if msg is None:
                zeros.append(key)
                msg = np.zeros_like(old)
            elif d:
                msg = (1.0 - d) * msg + d * old
            delta = max(delta, float(np.max(np.abs(msg - old))))
            state.messages[key] = msg
        state.iteration += 1
        state.max_delta = delta
        state.zero_messages = zeros
        state.inconsistent = bool(zeros)
        if delta < cfg.tolerance:
            state.converged = True
            break
    else:
        state.converged = False
    if not state.inconsistent:
        # messages can all be positive while some belief still vanishes
        state.inconsistent = any(not _family(state, x).sum() > 0 for x in range(len(state.net)))
    return state


def bp_run(state: BpState, cfg: BpConfig = BpConfig()) -> BpState:
    """Synchronous sum-product sweeps until the largest message change < tolerance.

    Runs in place (continuing from the state's current messages) and returns
    the state.
    """
    state.converged = False
    return _run(state, cfg, np.sum)


def _belief(state: BpState, x: int, use_lambda: bool, op=np.sum) -> np.ndarray:
    table = _family(state, x, use_lambda=use_lambda)
    return _reduce_onto(table, table.ndim - 1, op)


def bp_marginal(state: BpState, x: int) -> np.ndarray:
    """Approximate posterior Pr'(x | e)."""
    out = _normalize(_belief(state, x, True))
    if out is None:
        raise BPInconsistentError(
            f"belief of {state.net.variables[x].name!r} is all zero: evidence is contradictory"
        )
    return out


def bp_retracted_marginal(state: BpState, x: int) -> np.ndarray:
    """Approximate Pr'(x | e - x): the belief with x's own evidence left out."""
    out = _normalize(_belief(state, x, False))
    if out is None:
        raise BPInconsistentError(
            f"retracted belief of {state.net.variables[x].name!r} is undefined (all zero)"
        )
    return out


def _xlogy_ratio(b: np.ndarray, psi: np.ndarray) -> float:
    mask = b > 0
    return float(np.sum(b[mask] * np.log(b[mask] / psi[mask])))


def bp_log_evidence(state: BpState) -> float:
    """Negative Bethe free energy of the current beliefs, an estimate of ln Pr(e).

    Exact on polytrees. Returns -inf for an inconsistent state; warns with
    NonConvergenceWarning if BP has not converged.
    """
    if not state.converged:
        warnings.warn("BP has not converged; log-evidence is approximate",
                      NonConvergenceWarning, stacklevel=2)
    net = state.net
    total = 0.0
    for x in range(len(net)):
        full = _family(state, x)
        z = full.sum()
        if not z > 0:
            return -math.inf
        b_fam = full / z
        nd = full.ndim
        psi = net.cpts[x].values * _along(state.lambdas[x], nd - 1, nd)
        total -= _xlogy_ratio(b_fam, psi)
        degree = 1 + len(net.children(x))
        if degree > 1:
            b_x = _reduce_onto(b_fam, nd - 1, np.sum)
            mask = b_x > 0
            total += (degree - 1) * float(np.sum(b_x[mask] * np.log(b_x[mask])))
    return total


def bp_max_product_mpe(net: Network, e: Mapping[int, int], cfg: BpConfig = BpConfig()) -> Instantiation:
    """Approximate MPE: max-product sweeps, then per-variable argmax of max-marginals.

    Returns a complete instantiation (evidence variables keep their values).
    Ties go to the lowest state index.
    """
    state = _run(bp_init(net, e), cfg, np.max)
    out = {}
    for x in range(len(net)):
        if x in state.evidence:
            out[x] = state.evidence[x]
        else:
            out[x] = int(np.argmax(_belief(state, x, True, np.max)))
    return out


def bp_posteriors(net: Network, e: Mapping[int, int], cfg: BpConfig = BpConfig()) -> tuple[BpState, list[np.ndarray]]:
    state = bp_run(bp_init(net, e), cfg)
    return state, [bp_marginal(state, x) for x in range(len(net))]
