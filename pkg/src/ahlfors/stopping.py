"""Stopping regions below a node and extremal weighted sums over them.

A stopping region below ``x`` is a finite antichain of descendants whose
boundary cylinders partition the cylinder of ``x``.  On a depth-``D``
truncation that means: every depth-``D`` leaf under ``x`` has exactly one
ancestor-or-self in the region.

Three routes to the extremal sums ``sum_{y in S} 2**(-Q|y|)``:

* :func:`enumerate_stopping_sets` -- explicit generator (doubly exponential,
  capped; the ground-truth oracle for tiny instances),
* :func:`stopping_sum_values` -- the set of *values* achievable, found by
  sum-set convolution without the min/sum interchange the DP relies on,
* :func:`extremal_stopping_sums` -- the production min/max recursion.

The last two must always agree; the test suite enforces it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .exact import Exponent, PowerSum
from .trees import RootedTree, TreeError, UniformTree

__all__ = [
    "StoppingSet",
    "StoppingEnumerationCap",
    "enumerate_stopping_sets",
    "count_stopping_sets",
    "stopping_sum_values",
    "extremal_stopping_sums",
    "normalized_extremal_table",
    "uniform_normalized_extremal_table",
]


@dataclass(frozen=True)
class StoppingSet:
    """An antichain below ``anchor`` partitioning its boundary cylinder."""

    anchor: int
    members: frozenset[int]

    def validate(self, t: RootedTree) -> None:
        for y in self.members:
            if not t.is_ancestor(self.anchor, y):
                raise TreeError(f"member {y} is not below anchor {self.anchor}")
        leaves = t.descendant_leaves(self.anchor)
        covered = 0
        for y in self.members:
            covered += len(t.descendant_leaves(y))
        if covered != len(leaves):
            raise TreeError("members do not partition the boundary cylinder")
        # Antichain check: members may not be ancestors of one another.
        for y in self.members:
            for z in self.members:
                if y != z and t.is_ancestor(y, z):
                    raise TreeError("stopping set is not an antichain")


class StoppingEnumerationCap(RuntimeError):
    """Raised when enumeration would exceed the configured cap; use the DP."""


def enumerate_stopping_sets(
    t: RootedTree, x: int, max_relative_depth: int, *, cap: int = 200_000
) -> Iterator[StoppingSet]:
    """Yield every stopping region below ``x`` with members at relative
    depth <= ``max_relative_depth``.  Feasible only for small instances;
    raises :class:`StoppingEnumerationCap` once ``cap`` sets were produced.
    """
    if max_relative_depth < 0:
        raise TreeError("max_relative_depth must be >= 0")
    if int(t.depth[x]) + max_relative_depth > t.D:
        raise TreeError("relative depth overflows the truncation depth")
    emitted = 0

    def rec(y: int, budget: int) -> Iterator[frozenset[int]]:
        yield frozenset([y])
        if budget >= 1 and t.degree(y) > 0:
            parts = [list(rec(int(c), budget - 1)) for c in t.children(y)]
            idx = [0] * len(parts)
            while True:
                combo: set[int] = set()
                for part, i in zip(parts, idx):
                    combo |= part[i]
                yield frozenset(combo)
                j = len(parts) - 1
                while j >= 0:
                    idx[j] += 1
                    if idx[j] < len(parts[j]):
                        break
                    idx[j] = 0
                    j -= 1
                if j < 0:
                    break

    for members in rec(x, max_relative_depth):
        emitted += 1
        if emitted > cap:
            raise StoppingEnumerationCap(
                f"more than {cap} stopping sets; use extremal_stopping_sums"
            )
        yield StoppingSet(x, members)


def count_stopping_sets(t: RootedTree, x: int, max_relative_depth: int) -> int:
    """Number of stopping regions below ``x`` within the depth cap."""

    def rec(y: int, budget: int) -> int:
        total = 1
        if budget >= 1 and t.degree(y) > 0:
            prod = 1
            for c in t.children(y):
                prod *= rec(int(c), budget - 1)
            total += prod
        return total

    return rec(x, max_relative_depth)


def stopping_sum_values(
    t: RootedTree, x: int, Q: Exponent, max_relative_depth: int,
    *, cap: int = 1_000_000,
) -> set[PowerSum]:
    """All achievable values of ``sum_{y in S} 2**(-Q|y|)``.

    Enumerates value sets bottom-up with sum-set convolution.  Independent
    of the extremal recursion: it never uses the distributivity of min/max
    over independent child choices, only exhaustive combination.
    """
    ops = 0

    def rec(y: int, budget: int) -> set[PowerSum]:
        nonlocal ops
        values = {Q.weight(int(t.depth[y]))}
        if budget >= 1 and t.degree(y) > 0:
            sums = {PowerSum.zero()}
            for c in t.children(y):
                child_vals = rec(int(c), budget - 1)
                ops += len(sums) * len(child_vals)
                if ops > cap:
                    raise StoppingEnumerationCap(
                        "sum-set enumeration exceeded the operation cap"
                    )
                sums = {a + b for a in sums for b in child_vals}
            values |= sums
        return values

    return rec(x, max_relative_depth)


def extremal_stopping_sums(
    t: RootedTree, x: int, Q: Exponent, max_relative_depth: int
) -> tuple[PowerSum, PowerSum]:
    """Exact min and max of ``sum_{y in S} 2**(-Q|y|)`` over stopping
    regions below ``x`` with members at relative depth <= the cap.

    Recursion: ``f(y) = opt(2**(-Q|y|), sum_children f)``, with the bare
    weight at the depth cap.
    """
    if max_relative_depth < 0:
        raise TreeError("max_relative_depth must be >= 0")
    if int(t.depth[x]) + max_relative_depth > t.D:
        raise TreeError("relative depth overflows the truncation depth")

    def rec(y: int, budget: int) -> tuple[PowerSum, PowerSum]:
        w = Q.weight(int(t.depth[y]))
        if budget < 1 or t.degree(y) == 0:
            return w, w
        lo = PowerSum.zero()
        hi = PowerSum.zero()
        for c in t.children(y):
            clo, chi = rec(int(c), budget - 1)
            lo = lo + clo
            hi = hi + chi
        return min(w, lo), max(w, hi)

    return rec(x, max_relative_depth)


def normalized_extremal_table(
    t: RootedTree, Q: Exponent, depth_cap: int
) -> list[tuple[PowerSum, PowerSum]]:
    """Per-cap extrema of the anchor-normalized stopping sums.

    Row ``r`` holds min/max over every anchor ``x`` of
    ``f_opt(x, min(r, D - |x|)) / 2**(-Q|x|)``.  The normalized recursion is
    ``h(y, r) = opt(1, 2**-Q * sum_children h(c, r-1))`` with ``h(y, 0) = 1``,
    so no division is ever performed.
    """
    if depth_cap < 0:
        raise TreeError("depth_cap must be >= 0")
    one = PowerSum.one()
    w = Q.weight(1)
    # h_min/h_max[r][node]; nodes processed by decreasing depth.
    h_min = [[one] * t.n for _ in range(depth_cap + 1)]
    h_max = [[one] * t.n for _ in range(depth_cap + 1)]
    order = sorted(range(t.n), key=lambda i: -int(t.depth[i]))
    for y in order:
        if t.degree(y) == 0:
            continue
        kids = [int(c) for c in t.children(y)]
        for r in range(1, depth_cap + 1):
            lo = PowerSum.zero()
            hi = PowerSum.zero()
            for c in kids:
                lo = lo + h_min[r - 1][c]
                hi = hi + h_max[r - 1][c]
            h_min[r][y] = min(one, w * lo)
            h_max[r][y] = max(one, w * hi)
    rows: list[tuple[PowerSum, PowerSum]] = []
    for r in range(depth_cap + 1):
        lo = None
        hi = None
        for x in range(t.n):
            eff = min(r, t.D - int(t.depth[x]))
            lo = h_min[eff][x] if lo is None else min(lo, h_min[eff][x])
            hi = h_max[eff][x] if hi is None else max(hi, h_max[eff][x])
        rows.append((lo, hi))
    return rows


def uniform_normalized_extremal_table(
    t: UniformTree, Q: Exponent, depth_cap: int
) -> list[tuple[PowerSum, PowerSum]]:
    """Closed-form variant of :func:`normalized_extremal_table`.

    Every node at a given depth has an identical subtree, so the recursion
    collapses to a (depth, budget) table; results match the arena path
    exactly.
    """
    if depth_cap < 0:
        raise TreeError("depth_cap must be >= 0")
    one = PowerSum.one()
    w = Q.weight(1)
    D = t.D
    h_min = [[one] * (D + 1) for _ in range(depth_cap + 1)]
    h_max = [[one] * (D + 1) for _ in range(depth_cap + 1)]
    for d in range(D - 1, -1, -1):
        deg = t.degrees[d]
        for r in range(1, depth_cap + 1):
            if d + 1 > D:
                continue
            lo = w * (h_min[r - 1][d + 1] * deg)
            hi = w * (h_max[r - 1][d + 1] * deg)
            h_min[r][d] = min(one, lo)
            h_max[r][d] = max(one, hi)
    rows: list[tuple[PowerSum, PowerSum]] = []
    for r in range(depth_cap + 1):
        lo = None
        hi = None
        for d in range(D + 1):
            eff = min(r, D - d)
            lo = h_min[eff][d] if lo is None else min(lo, h_min[eff][d])
            hi = h_max[eff][d] if hi is None else max(hi, h_max[eff][d])
        rows.append((lo, hi))
    return rows
