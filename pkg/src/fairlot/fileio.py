"""Stable machine-readable file formats: instances, allocation matrices
and lotteries as JSON with rationals written as strings ("3/2", "1"),
never floats.  Serialization is deterministic (sorted keys, fixed
indentation) and loading validates the documents' internal invariants, so
round trips are lossless: parse(serialize(x)) == x.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any, Mapping

from .model import (
    DeterministicAllocation,
    Instance,
    Lottery,
    RandomAllocation,
    expected_allocation,
    format_rational,
    rational,
)

__all__ = [
    "FormatError",
    "dumps",
    "instance_to_obj",
    "instance_from_obj",
    "matrix_to_obj",
    "matrix_from_obj",
    "lottery_to_obj",
    "lottery_from_obj",
]


class FormatError(ValueError):
    """Malformed document; the message carries the offending location."""


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _require(obj: Mapping, key: str, where: str):
    if not isinstance(obj, Mapping) or key not in obj:
        raise FormatError(f"{where}: missing required key {key!r}")
    return obj[key]


def _rational_at(value, where: str) -> Fraction:
    try:
        return rational(value)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise FormatError(f"{where}: bad rational literal {value!r} ({exc})") from None


def instance_to_obj(instance: Instance) -> dict:
    return {
        "agents": list(instance.agents),
        "items": list(instance.items),
        "utilities": {
            a: {o: format_rational(v) for o, v in instance.utility_row(a).items()}
            for a in instance.agents
        },
    }


def instance_from_obj(obj: Mapping) -> Instance:
    agents = _require(obj, "agents", "instance")
    items = _require(obj, "items", "instance")
    utilities = _require(obj, "utilities", "instance")
    if not isinstance(agents, list) or not all(isinstance(a, str) for a in agents):
        raise FormatError("instance.agents: expected a list of strings")
    if not isinstance(items, list) or not all(isinstance(o, str) for o in items):
        raise FormatError("instance.items: expected a list of strings")
    table = {}
    for a in agents:
        row = _require(utilities, a, "instance.utilities")
        table[a] = {
            o: _rational_at(_require(row, o, f"instance.utilities[{a!r}]"),
                            f"instance.utilities[{a!r}][{o!r}]")
            for o in items
        }
    try:
        return Instance.from_utilities(table, agents=agents, items=items)
    except ValueError as exc:
        raise FormatError(f"instance: {exc}") from None


def matrix_to_obj(p: RandomAllocation, extra: Mapping | None = None) -> dict:
    obj = {
        "rows": [str(r) if not isinstance(r, str) else r for r in p.rows],
        "items": list(p.items),
        "entries": [[format_rational(v) for v in row] for row in p.entries],
    }
    if extra:
        obj.update(extra)
    return obj


def matrix_from_obj(obj: Mapping) -> RandomAllocation:
    rows = _require(obj, "rows", "matrix")
    items = _require(obj, "items", "matrix")
    entries = _require(obj, "entries", "matrix")
    parsed = []
    for i, row in enumerate(entries):
        parsed.append(tuple(_rational_at(v, f"matrix.entries[{i}][{j}]")
                            for j, v in enumerate(row)))
    try:
        return RandomAllocation(tuple(rows), tuple(items), tuple(parsed))
    except ValueError as exc:
        raise FormatError(f"matrix: {exc}") from None


def lottery_to_obj(
    lottery: Lottery,
    expected: RandomAllocation | None = None,
    metadata: Mapping | None = None,
) -> dict:
    if expected is None:
        expected = expected_allocation(lottery)
    return {
        "agents": list(lottery.agents),
        "items": list(lottery.items),
        "expected": [[format_rational(v) for v in row] for row in expected.entries],
        "support": [
            {
                "weight": format_rational(weight),
                "assignment": {o: a for o, a in zip(alloc.items, alloc.owners)},
            }
            for weight, alloc in lottery.entries
        ],
        "metadata": dict(metadata) if metadata else {},
    }


def lottery_from_obj(obj: Mapping) -> tuple[Lottery, RandomAllocation, dict]:
    agents = tuple(_require(obj, "agents", "lottery"))
    items = tuple(_require(obj, "items", "lottery"))
    support = _require(obj, "support", "lottery")
    entries = []
    for k, element in enumerate(support):
        weight = _rational_at(_require(element, "weight", f"lottery.support[{k}]"),
                              f"lottery.support[{k}].weight")
        assignment = _require(element, "assignment", f"lottery.support[{k}]")
        try:
            alloc = DeterministicAllocation.from_mapping(agents, items, assignment)
        except (KeyError, ValueError) as exc:
            raise FormatError(f"lottery.support[{k}].assignment: {exc}") from None
        entries.append((weight, alloc))
    try:
        lottery = Lottery(tuple(entries))
    except ValueError as exc:
        raise FormatError(f"lottery: {exc}") from None
    raw = _require(obj, "expected", "lottery")
    expected = matrix_from_obj({"rows": list(agents), "items": list(items), "entries": raw})
    if expected_allocation(lottery) != expected:
        raise FormatError("lottery: expected matrix does not equal the recomposed support")
    metadata = dict(obj.get("metadata", {}))
    return lottery, expected, metadata
