"""Sidecar ``.problem`` files naming MAP variables, evidence and an optional threshold.

::

    map: X1,X2,X3
    evidence: S3=0
    threshold: 1/16
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import BnetError
from .network import Instantiation, Network


@dataclass
class Problem:
    map_vars: list[int]
    evidence: Instantiation
    threshold: Fraction | None = None


def parse_problem(text: str, net: Network) -> Problem:
    map_vars: list[int] = []
    evidence: Instantiation = {}
    threshold = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise BnetError(f"expected 'key: value', got {line!r}", lineno)
        key, value = key.strip(), value.strip()
        try:
            if key == "map":
                map_vars = [net.index(n) for n in value.replace(",", " ").split()]
            elif key == "evidence":
                evidence = net.parse_assignment(value)
            elif key == "threshold":
                threshold = Fraction(value)
            else:
                raise BnetError(f"unknown key {key!r}", lineno)
        except (ValueError, ZeroDivisionError) as err:
            if isinstance(err, BnetError):
                raise
            raise BnetError(str(err), lineno) from None
    if set(map_vars) & set(evidence):
        raise BnetError("MAP variables overlap the evidence")
    return Problem(sorted(set(map_vars)), evidence, threshold)


def format_problem(
    net: Network,
    map_vars: Sequence[int],
    evidence: Mapping[int, int],
    threshold: Fraction | None = None,
) -> str:
    lines = [
        "map: " + ",".join(net.variables[v].name for v in sorted(map_vars)),
        "evidence: " + net.format_assignment(evidence),
    ]
    if threshold is not None:
        lines.append(f"threshold: {threshold}")
    return "\n".join(lines) + "\n"
