"""End-to-end lottery construction: pad the instance with dummy items,
run an eating rule, re-eat each bundle into a square bistochastic matrix
over agent representatives, decompose it into permutations, and project
the permutations back to deterministic allocations of the real items.

The lottery's expectation reproduces the eating outcome exactly, and every
support allocation is a picking-sequence outcome under a recursively
balanced turn order, hence envy-free up to one item in the strong and
stochastic-dominance senses.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Mapping, Sequence

from .birkhoff import birkhoff_decompose
from .eps import eps_outcome
from .model import (
    DeterministicAllocation,
    Instance,
    Lottery,
    OrdinalProfile,
    RandomAllocation,
    ordinal_from_utilities,
)
from .ps import ps_outcome

__all__ = [
    "PaddedInstance",
    "pad_with_dummies",
    "re_eat",
    "project",
    "ps_lottery",
    "reduce_support",
    "support_bound",
]


def _fresh_dummy_ids(items: Sequence[str], count: int) -> tuple[str, ...]:
    """Dummy ids that collide with nothing and sort in creation order."""
    taken = set(items)
    prefix = "zz-dummy-"
    while any(o.startswith(prefix) for o in taken):
        prefix = "z" + prefix
    return tuple(f"{prefix}{k:03d}" for k in range(1, count + 1))


class PaddedInstance:
    """An instance expanded to c*n items and c representatives per agent.

    ``prefs_strict`` breaks every tie lexicographically (smaller item id
    preferred) with dummies strictly last; ``prefs_weak`` keeps the real
    ties and only orders the dummies.  Representatives are (agent, k)
    pairs with k in 1..c.
    """

    def __init__(self, instance: Instance, c: int | None = None) -> None:
        n, m = instance.n, instance.m
        base = -(-m // n)  # ceil(m/n)
        if c is None:
            c = base
        elif c < base:
            raise ValueError("c must be at least ceil(m/n)")
        self.instance = instance
        self.c = c
        self.dummies = _fresh_dummy_ids(instance.items, c * n - m)
        self.items = instance.items + self.dummies
        self.representatives = tuple(
            (agent, k) for agent in instance.agents for k in range(1, c + 1)
        )
        profile = ordinal_from_utilities(instance)
        strict_tiers = {}
        weak_tiers = {}
        dummy_tail = tuple((d,) for d in self.dummies)
        for agent in instance.agents:
            real = profile.tiers[agent]
            strict_tiers[agent] = tuple(
                (o,) for tier in real for o in sorted(tier)
            ) + dummy_tail
            weak_tiers[agent] = tuple(tuple(t) for t in real) + dummy_tail
        self.prefs_strict = OrdinalProfile(instance.agents, self.items, strict_tiers)
        self.prefs_weak = OrdinalProfile(instance.agents, self.items, weak_tiers)

    def representative_of(self, agent: str, k: int) -> tuple[str, int]:
        return (agent, k)


def pad_with_dummies(instance: Instance, c: int | None = None) -> PaddedInstance:
    """Add fresh dummy items (ranked below everything) until the item
    count is a multiple of the agent count; no-op padding when it already
    is.  ``c`` may be raised above ceil(m/n) when bundles are larger.
    """
    return PaddedInstance(instance, c)


def re_eat(
    bundles: Mapping[str, Mapping[str, Fraction]] | RandomAllocation,
    padded: PaddedInstance,
) -> list[list[Fraction]]:
    """Let each agent re-eat its bundle at unit speed in its strict
    preference order; representative k receives what was eaten during
    [k-1, k].  The result is a (cn) x (cn) bistochastic matrix indexed by
    ``padded.representatives`` and ``padded.items``.
    """
    if isinstance(bundles, RandomAllocation):
        rows = {a: bundles.row(a) for a in padded.instance.agents}
    else:
        rows = {a: dict(bundles[a]) for a in padded.instance.agents}
    c = padded.c
    items = padded.items
    col = {o: j for j, o in enumerate(items)}
    size = c * len(padded.instance.agents)
    matrix: list[list[Fraction]] = [[Fraction(0)] * size for _ in range(size)]

    rep_base = 0
    for agent in padded.instance.agents:
        row = rows[agent]
        total = sum(row.values(), Fraction(0))
        if total != c:
            raise ValueError(f"bundle of {agent!r} has mass {total}, expected {c}")
        clock = Fraction(0)
        for o in padded.prefs_strict.strict_order(agent):
            amount = row.get(o, Fraction(0))
            if amount < 0:
                raise ValueError("negative bundle entry")
            while amount > 0:
                window = int(clock) + 1  # mass at time (w-1, w] feeds representative w
                bite = min(amount, Fraction(window) - clock)
                matrix[rep_base + window - 1][col[o]] += bite
                clock += bite
                amount -= bite
        rep_base += c
    return matrix


def project(
    permutation: Sequence[int], padded: PaddedInstance
) -> DeterministicAllocation:
    """Turn a permutation of the padded universe into an allocation of the
    real items: agent i owns whatever its representatives were matched to,
    dummy items are dropped.
    """
    instance = padded.instance
    owner: dict[str, str] = {}
    for idx, (agent, _k) in enumerate(padded.representatives):
        item = padded.items[permutation[idx]]
        if item not in padded.dummies:
            owner[item] = agent
    if set(owner) != set(instance.items):
        raise ValueError("permutation does not cover every real item")
    return DeterministicAllocation.from_mapping(instance.agents, instance.items, owner)


def support_bound(c: int, n: int) -> int:
    """Largest possible support size of the decomposition: k^2 - 2k + 2
    for k = cn (each extraction zeroes an entry, the last zeroes k).
    """
    k = c * n
    return k * k - 2 * k + 2


def _skip_zero_bundles(
    instance: Instance, outcome: RandomAllocation
) -> tuple[int, dict[str, dict[str, Fraction]], dict[str, list[tuple[str, Fraction]]]]:
    """Pad binary-mode bundles (which include the uniform slivers of
    unwanted items) with dummy mass up to a common size c, enlarging c when
    some agent ate more than ceil(m/n).  Dummy mass is dealt out in one
    sweep over agents so dummy columns still sum to one.
    """
    n, m = instance.n, instance.m
    rows = {a: {o: v for o, v in outcome.row(a).items() if v > 0} for a in instance.agents}
    loads = {a: sum(rows[a].values(), Fraction(0)) for a in instance.agents}
    c = max(-(-m // n), max(-(-load.numerator // load.denominator) for load in loads.values()))
    dummy_count = c * n - m
    dummy_ids = _fresh_dummy_ids(instance.items, dummy_count)
    dummy_slices: dict[str, list[tuple[str, Fraction]]] = {a: [] for a in instance.agents}
    pos = 0  # index into the concatenated unit-mass dummy line
    offset = Fraction(0)
    for agent in instance.agents:
        need = c - loads[agent]
        while need > 0:
            room = 1 - offset
            bite = min(need, room)
            dummy_slices[agent].append((dummy_ids[pos], bite))
            rows[agent][dummy_ids[pos]] = rows[agent].get(dummy_ids[pos], Fraction(0)) + bite
            need -= bite
            offset += bite
            if offset == 1:
                offset = Fraction(0)
                pos += 1
    return c, rows, dummy_slices


def ps_lottery(
    instance: Instance,
    rule: str = "ps",
    skip_zero: bool = False,
) -> tuple[Lottery, RandomAllocation]:
    """Compute a lottery over deterministic allocations whose expectation
    equals, exactly, the eating outcome of the instance.

    rule="ps" breaks all preference ties lexicographically and runs the
    serial eating rule; rule="eps" keeps real ties and runs coordinated
    eating (the outcome is then SD-efficient).  ``skip_zero`` (binary
    utilities, rule="eps" only) makes agents ignore zero-valued items.

    Returns the lottery (duplicate support allocations merged) and the
    expected allocation over the original agents and items.
    """
    if rule not in ("ps", "eps"):
        raise ValueError(f"unknown rule {rule!r}")
    if skip_zero and rule != "eps":
        raise ValueError("skip_zero is only available with rule='eps'")

    if skip_zero:
        outcome, _trace = eps_outcome(instance, mode="skip_zero")
        c, bundles, _slices = _skip_zero_bundles(instance, outcome)
        padded = pad_with_dummies(instance, c)
        expected = outcome
    else:
        padded = pad_with_dummies(instance)
        if rule == "ps":
            padded_outcome, _trace = ps_outcome(
                instance.agents, padded.items, padded.prefs_strict
            )
        else:
            dummy_values = {
                a: {d: Fraction(0) for d in padded.dummies} for a in instance.agents
            }
            padded_instance = Instance.from_utilities(
                {
                    a: {**instance.utility_row(a), **dummy_values[a]}
                    for a in instance.agents
                },
                agents=instance.agents,
                items=padded.items,
            )
            padded_outcome, _trace = eps_outcome(
                padded_instance, mode="standard", profile=padded.prefs_weak
            )
        bundles = {a: padded_outcome.row(a) for a in instance.agents}
        expected = padded_outcome.restrict_items(instance.items)

    matrix = re_eat(bundles, padded)
    parts = birkhoff_decompose(matrix)
    entries = tuple(
        (weight, project(perm, padded)) for weight, perm in parts
    )
    lottery = Lottery(entries).merged()
    return lottery, expected


def _find_affine_dependency(vectors: list[tuple[int, ...]]) -> list[Fraction] | None:
    """Nonzero rational coefficients summing a set of 0/1 vectors (with an
    affine trailing 1) to zero, or None when they are affinely independent.

    A bitmask elimination over GF(2) runs first: 0/1 vectors that are
    independent mod 2 are independent over the rationals, which settles
    the common case without exact arithmetic.
    """
    masks: list[int] = []
    for vec in vectors:
        mask = 0
        for bit, v in enumerate(vec):
            if v & 1:
                mask |= 1 << bit
        masks.append(mask)
    pivots: list[int] = []
    independent = True
    for mask in masks:
        for p in pivots:
            low = p & -p
            if mask & low:
                mask ^= p
        if mask == 0:
            independent = False
            break
        pivots.append(mask)
    if independent:
        return None

    # Exact integer elimination with coefficient tracking.
    dim = len(vectors[0])
    basis: list[tuple[int, list[int], dict[int, Fraction]]] = []  # (pivot, row, expr)
    for t, vec in enumerate(vectors):
        row = list(vec)
        expr: dict[int, Fraction] = {t: Fraction(1)}
        for pivot, brow, bexpr in basis:
            q = row[pivot]
            if q == 0:
                continue
            p = brow[pivot]
            row = [p * x - q * y for x, y in zip(row, brow)]
            factor = Fraction(p)
            expr = {k: factor * v for k, v in expr.items()}
            for k, v in bexpr.items():
                expr[k] = expr.get(k, Fraction(0)) - q * v
        if any(row):
            pivot = next(i for i, v in enumerate(row) if v)
            g = 0
            for v in row:
                g = gcd(g, abs(v))
            if g > 1:
                row = [v // g for v in row]
                expr = {k: v / g for k, v in expr.items()}
            basis.append((pivot, row, expr))
        else:
            coeffs = [Fraction(0)] * len(vectors)
            for k, v in expr.items():
                coeffs[k] = v
            return coeffs
    return None


def reduce_support(lottery: Lottery) -> Lottery:
    """Shrink a lottery's support without changing its expectation.

    Duplicates merge first; then, while the support allocations'
    vectorizations are affinely dependent, weights are shifted along a
    kernel vector until one hits zero exactly and that allocation is
    dropped.  An affinely independent support over an n x m universe has
    at most nm + 1 elements.
    """
    lottery = lottery.merged()
    agents, items = lottery.agents, lottery.items
    agent_index = {a: i for i, a in enumerate(agents)}

    def vectorize(allocation: DeterministicAllocation) -> tuple[int, ...]:
        vec = [0] * (len(agents) * len(items) + 1)
        for j, owner in enumerate(allocation.owners):
            vec[agent_index[owner] * len(items) + j] = 1
        vec[-1] = 1
        return tuple(vec)

    entries = [(weight, alloc, vectorize(alloc)) for weight, alloc in lottery.entries]
    while True:
        gamma = _find_affine_dependency([vec for _, _, vec in entries])
        if gamma is None:
            break
        if all(g <= 0 for g in gamma):
            gamma = [-g for g in gamma]
        step = min(
            (Fraction(w) / g for (w, _, _), g in zip(entries, gamma) if g > 0),
        )
        entries = [
            (w - step * g, alloc, vec)
            for (w, alloc, vec), g in zip(entries, gamma)
            if w - step * g != 0
        ]
    reduced = Lottery(tuple((w, alloc) for w, alloc, _ in entries))
    if len(reduced.entries) > len(agents) * len(items) + 1:
        raise AssertionError("independent support exceeds the Caratheodory bound")
    return reduced
