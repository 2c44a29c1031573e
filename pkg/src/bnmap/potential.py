"""Nonnegative tables over ordered variable scopes.

Values are stored as an ndarray with one axis per scope variable, in scope
order, so the flat (C-order) layout has the last scope variable varying
fastest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class Potential:
    scope: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        scope = tuple(int(v) for v in self.scope)
        values = np.asarray(self.values, dtype=np.float64)
        if len(set(scope)) != len(scope):
            raise ValueError(f"duplicate variable in scope {scope}")
        if values.ndim != len(scope):
            raise ValueError(
                f"table has {values.ndim} axes but scope has {len(scope)} variables"
            )
        if values.size and (not np.all(np.isfinite(values)) or values.min() < 0):
            raise ValueError("potential entries must be finite and nonnegative")
        if values.flags.writeable:
            values = values.copy()
            values.flags.writeable = False
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_flat(cls, scope: Sequence[int], cards: Sequence[int], flat) -> Potential:
        return cls(tuple(scope), np.asarray(flat, dtype=np.float64).reshape(tuple(cards)))

    @classmethod
    def scalar(cls, value: float) -> Potential:
        return cls((), np.array(float(value)))

    @property
    def cards(self) -> tuple[int, ...]:
        return self.values.shape

    def card(self, var: int) -> int:
        return self.values.shape[self.scope.index(var)]

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def reduce(self, evidence: Mapping[int, int]) -> Potential:
        """Slice out every evidence variable that appears in the scope."""
        index = []
        scope = []
        for var in self.scope:
            if var in evidence:
                index.append(evidence[var])
            else:
                index.append(slice(None))
                scope.append(var)
        if len(scope) == len(self.scope):
            return self
        return Potential(tuple(scope), self.values[tuple(index)])

    def __repr__(self) -> str:
        return f"Potential(scope={self.scope}, shape={self.values.shape})"


def _expand(p: Potential, scope: tuple[int, ...]) -> np.ndarray:
    # Reorder p's axes to follow `scope` and insert singleton axes for the rest.
    positions = [scope.index(v) for v in p.scope]
    perm = np.argsort(positions)
    arr = p.values.transpose(perm) if len(perm) > 1 else p.values
    shape = [1] * len(scope)
    for v, c in zip(p.scope, p.values.shape):
        shape[scope.index(v)] = c
    return arr.reshape(shape)


def multiply(a: Potential, b: Potential) -> Potential:
    """Pointwise product over the union of the two scopes (a's variables first)."""
    scope = a.scope + tuple(v for v in b.scope if v not in a.scope)
    for v in set(a.scope) & set(b.scope):
        if a.card(v) != b.card(v):
            raise ValueError(f"cardinality mismatch for variable {v}")
    return Potential(scope, _expand(a, scope) * _expand(b, scope))


def multiply_all(potentials: Sequence[Potential]) -> Potential:
    if not potentials:
        return Potential.scalar(1.0)
    result = potentials[0]
    for p in potentials[1:]:
        result = multiply(result, p)
    return result


def _axis(p: Potential, var: int) -> int:
    try:
        return p.scope.index(var)
    except ValueError:
        raise ValueError(f"variable {var} not in scope {p.scope}") from None


def sum_out(p: Potential, var: int) -> Potential:
    axis = _axis(p, var)
    return Potential(p.scope[:axis] + p.scope[axis + 1 :], p.values.sum(axis=axis))


def max_out(p: Potential, var: int) -> tuple[Potential, np.ndarray]:
    """Maximize `var` out of `p`.

    Returns the reduced potential and, for every row of it, the state of `var`
    achieving the maximum (lowest state index on ties).
    """
    axis = _axis(p, var)
    scope = p.scope[:axis] + p.scope[axis + 1 :]
    return Potential(scope, p.values.max(axis=axis)), p.values.argmax(axis=axis)
