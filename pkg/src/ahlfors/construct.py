"""Constructions that carve an alpha-regular subspace out of a Q-regular
tree boundary.

The pipeline:

1. :func:`choose_plan` picks a block length ``k`` and an integer ``M`` with
   ``alpha*k < M`` and ``2**M <= min #S_k(x)``.
2. :func:`homogenize` regroups the tree into ``k``-blocks: between
   consecutive block levels every descendant hangs by a private geodesic
   spine, which changes boundary distances by at most ``2**k`` (audited by
   :func:`bilipschitz_audit`) while preserving block-level sphere counts.
3. :func:`select_periodic` keeps exactly ``2**M`` lexicographically
   smallest block children everywhere, yielding a periodic tree.
4. :func:`thin_periodic` applies a 0/1 digit schedule with ratio
   ``lambda = alpha*k/M``: full branching where the digit is 1, a single
   child where it is 0.

The composition, :func:`extract_regular_subspace`, returns the thinned tree,
its certified counting report at exponent ``alpha``, and the pulled-back
boundary subset of the original tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact import Exponent, PowerSum
from .regularity import (
    DEFAULT_THRESHOLD,
    RegularityReport,
    ScaleRow,
    counting_bounds,
)
from .trees import (
    ARENA_NODE_LIMIT,
    RootedTree,
    TreeError,
    UniformTree,
)

__all__ = [
    "ConstructionError",
    "DigitSchedule",
    "digit_schedule",
    "digit_deviation_range",
    "binary_model_subtree",
    "GradedTree",
    "homogenize",
    "BiLipschitzAudit",
    "bilipschitz_audit",
    "SelectionPlan",
    "choose_plan",
    "select_periodic",
    "thin_periodic",
    "ball_counting_report",
    "ExtractionResult",
    "extract_regular_subspace",
]


class ConstructionError(TreeError):
    """A pipeline stage cannot produce its output for the given input."""


# -- digit schedules -----------------------------------------------------------


@dataclass(frozen=True)
class DigitSchedule:
    """The 0/1 sequence ``e_n = floor(r*n) - floor(r*(n-1))`` for rational r.

    ``E(n)`` counts the ones among ``e_1..e_n`` and satisfies the exact
    two-sided bound ``E(n+p) - E(p) - n*r in [-1, 1]``; the schedule is
    periodic with the denominator of ``r``.
    """

    ratio: Fraction

    def __post_init__(self):
        object.__setattr__(self, "ratio", Fraction(self.ratio))
        if not 0 < self.ratio <= 1:
            raise ConstructionError("digit ratio must lie in (0, 1]")

    def E(self, n: int) -> int:
        if n < 0:
            raise ConstructionError("E(n) needs n >= 0")
        return (self.ratio.numerator * n) // self.ratio.denominator

    def digit(self, n: int) -> int:
        if n < 1:
            raise ConstructionError("digits are indexed from 1")
        return self.E(n) - self.E(n - 1)

    def digits(self, n: int) -> list[int]:
        return [self.digit(i) for i in range(1, n + 1)]

    @property
    def period(self) -> int:
        return self.ratio.denominator


def digit_schedule(ratio: Fraction | str) -> DigitSchedule:
    """Digit schedule for a ratio strictly inside ``(0, 1)``."""
    r = Fraction(ratio)
    if not 0 < r < 1:
        raise ConstructionError(f"ratio must be in (0, 1), got {r}")
    return DigitSchedule(r)


def digit_deviation_range(
    sched: DigitSchedule, n_max: int, p_max: int
) -> tuple[Fraction, Fraction]:
    """Exact min and max of ``E(n+p) - E(p) - n*r`` over the full grid
    ``0 <= n <= n_max``, ``0 <= p <= p_max`` (vectorised integer scan)."""
    num = sched.ratio.numerator
    den = sched.ratio.denominator
    E = (num * np.arange(n_max + p_max + 1, dtype=np.int64)) // den
    lo = hi = 0
    base = E[: p_max + 1]
    for n in range(n_max + 1):
        dev = den * (E[n : n + p_max + 1] - base) - n * num
        lo = min(lo, int(dev.min()))
        hi = max(hi, int(dev.max()))
    return Fraction(lo, den), Fraction(hi, den)


# -- binary model ----------------------------------------------------------------


def binary_model_subtree(
    tree: RootedTree | UniformTree, alpha: Fraction | str
) -> RootedTree | UniformTree:
    """Prune a binary tree by the digit schedule of ``alpha``.

    A depth-``n`` node keeps both children when ``e_{n+1} = 1`` and only its
    lexicographically smallest child otherwise, so sphere counts satisfy
    ``#S_k(x) = 2**(E(|x|+k) - E(|x|))`` exactly.
    """
    sched = digit_schedule(alpha)
    if isinstance(tree, UniformTree):
        if any(q != 2 for q in tree.degrees):
            raise ConstructionError("the model construction needs a binary tree")
        return UniformTree(
            [2 if sched.digit(d + 1) == 1 else 1 for d in range(tree.D)]
        )
    degrees = np.diff(tree.child_ptr)
    if (degrees[tree.depth < tree.D] != 2).any():
        raise ConstructionError("the model construction needs a binary tree")
    parents: list[int] = [-1]
    frontier = [(0, 0)]  # (source id, new id)
    for d in range(tree.D):
        keep = 2 if sched.digit(d + 1) == 1 else 1
        nxt: list[tuple[int, int]] = []
        for src, new in frontier:
            for c in tree.children(src)[:keep]:
                parents.append(new)
                nxt.append((int(c), len(parents) - 1))
        frontier = nxt
    return RootedTree(parents, tree.D)


# -- homogenization ----------------------------------------------------------------


@dataclass
class GradedTree:
    """A tree organised into levels of ``k`` unit depths each.

    ``level_tree`` has one depth step per level.  Boundary distances of the
    underlying unit-depth tree are ``2**(-k * level_confluent)``: within a
    block every descendant hangs by a private spine, so confluents only
    occur at block levels.  ``level_to_source``/``block_radices`` keep the
    correspondence with the tree the grading came from (the boundary
    bijection used for pull-backs).
    """

    level_tree: RootedTree | UniformTree
    k: int
    depth_used: int
    source: RootedTree | UniformTree | None = None
    level_to_source: np.ndarray | None = None
    block_radices: tuple[tuple[int, ...], ...] | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def levels(self) -> int:
        return self.level_tree.D

    def level_count(self, n: int) -> int:
        if isinstance(self.level_tree, UniformTree):
            return self.level_tree.level_counts[n]
        return len(self.level_tree.nodes_at_depth(n))

    def full_uniform(self) -> UniformTree:
        """Unit-depth tree with explicit spines (uniform grading only)."""
        if not isinstance(self.level_tree, UniformTree):
            raise ConstructionError("full_uniform needs a uniform grading")
        degrees: list[int] = []
        for n in range(self.levels):
            degrees.append(self.level_tree.degrees[n])
            degrees.extend([1] * (self.k - 1))
        return UniformTree(degrees)

    def full_arena(self, limit: int = ARENA_NODE_LIMIT) -> RootedTree:
        """Materialise the unit-depth tree (level nodes plus spines).

        Node ids are depth-major in block-child rank order, identical to the
        layout :meth:`UniformTree.to_arena` produces for uniform gradings.
        """
        if isinstance(self.level_tree, UniformTree):
            return self.full_uniform().to_arena(limit)
        lt = self.level_tree
        parents: list[int] = [-1]
        row: list[tuple[int, int]] = [(0, 0)]  # (level node, full id)
        for d in range(self.depth_used):
            nxt: list[tuple[int, int]] = []
            if d % self.k == 0:
                # One private spine per block child starts here.
                for u, fid in row:
                    for c in lt.children(u):
                        parents.append(fid)
                        nxt.append((int(c), len(parents) - 1))
            else:
                for c, fid in row:
                    parents.append(fid)
                    nxt.append((c, len(parents) - 1))
            if len(parents) > limit:
                raise ConstructionError("graded tree too large to materialise")
            row = nxt
        return RootedTree(parents, self.depth_used)

    def source_leaf_ids(self) -> list[int]:
        """Boundary pull-back: source node ids matching the graded leaves."""
        if self.level_to_source is not None:
            lt = self.level_tree
            return [int(self.level_to_source[int(u)]) for u in lt.nodes_at_depth(self.levels)]
        if self.block_radices is None or self.source is None:
            raise ConstructionError("grading lacks a source correspondence")
        return [self.source.node_at(a) for a in self.source_leaf_addresses()]

    def source_leaf_addresses(self) -> list[tuple[int, ...]]:
        if isinstance(self.level_tree, UniformTree) and self.block_radices is not None:
            out: list[tuple[int, ...]] = []
            lt = self.level_tree
            for rank in range(lt.leaf_count):
                levels = lt.address(lt.node_id(self.levels, rank))
                digits: list[int] = []
                for n, r in enumerate(levels):
                    block: list[int] = []
                    for radix in reversed(self.block_radices[n]):
                        r, dig = divmod(r, radix)
                        block.append(dig)
                    digits.extend(reversed(block))
                out.append(tuple(digits))
            return out
        if self.level_to_source is not None and self.source is not None:
            return [self.source.address(i) for i in self.source_leaf_ids()]
        raise ConstructionError("grading lacks a source correspondence")


def homogenize(tree: RootedTree | UniformTree, k: int) -> GradedTree:
    """Regroup a tree into ``k``-blocks with private spines per block child.

    Block-level sphere counts are preserved exactly; when ``k`` does not
    divide the truncation depth the tree is truncated to the largest
    multiple (recorded in the result notes).
    """
    if k < 1:
        raise ConstructionError("k must be >= 1")
    if k > tree.D:
        raise ConstructionError(f"k={k} exceeds the truncation depth {tree.D}")
    depth_used = k * (tree.D // k)
    levels = depth_used // k
    notes = []
    if depth_used != tree.D:
        notes.append(f"truncated to depth {depth_used} (k does not divide D)")
    if isinstance(tree, UniformTree):
        radices = tuple(
            tuple(tree.degrees[n * k : (n + 1) * k]) for n in range(levels)
        )
        block_degrees = [math.prod(r) for r in radices]
        return GradedTree(
            level_tree=UniformTree(block_degrees),
            k=k,
            depth_used=depth_used,
            source=tree,
            block_radices=radices,
            notes=notes,
        )
    parents: list[int] = [-1]
    to_source: list[int] = [0]
    frontier = [(0, 0)]  # (source id, level-tree id)
    for _ in range(levels):
        nxt: list[tuple[int, int]] = []
        for src, lid in frontier:
            for c in tree.sphere(src, k):
                parents.append(lid)
                to_source.append(int(c))
                nxt.append((int(c), len(parents) - 1))
        frontier = nxt
    return GradedTree(
        level_tree=RootedTree(parents, levels),
        k=k,
        depth_used=depth_used,
        source=tree,
        level_to_source=np.asarray(to_source, dtype=np.int64),
        notes=notes,
    )


# -- bi-Lipschitz audit -------------------------------------------------------------


@dataclass(frozen=True)
class BiLipschitzAudit:
    """Worst measured distortion of the block-grading boundary bijection."""

    k: int
    max_log2_ratio: int
    pairs_checked: int
    exhaustive: bool

    @property
    def constant(self) -> float:
        return float(2 ** self.max_log2_ratio)


def _source_leaf_confluent_depths(
    graded: GradedTree, pairs: np.ndarray | None
) -> np.ndarray:
    """Confluent depths (unit scale) for leaf pairs of the graded source."""
    addresses = np.asarray(graded.source_leaf_addresses(), dtype=np.int32)
    if pairs is None:
        n = len(addresses)
        out = []
        block = max(1, (1 << 24) // max(1, n * addresses.shape[1]))
        for start in range(0, n, block):
            rows = addresses[start:start + block]
            eq = rows[:, None, :] == addresses[None, :, :]
            full = eq.all(axis=2)
            d = np.where(full, graded.depth_used, eq.argmin(axis=2))
            for i in range(len(rows)):
                out.append(d[i, start + i + 1:])
        return np.concatenate(out) if out else np.empty(0, dtype=np.int64)
    a = addresses[pairs[:, 0]]
    b = addresses[pairs[:, 1]]
    eq = a == b
    return np.where(eq.all(axis=1), graded.depth_used, eq.argmin(axis=1))


def bilipschitz_audit(
    graded: GradedTree,
    sample_pairs: int | None = None,
    seed: int = 0,
    *,
    exhaustive_limit: int = 1 << 12,
) -> BiLipschitzAudit:
    """Measure ``max(rho_T/rho_U, rho_U/rho_T)`` over boundary leaf pairs.

    Distances in the graded tree are ``2**(-k*floor(d/k))`` against the
    source's ``2**-d`` (``d`` the confluent depth), so every ratio is a
    power of two; the audit reports the worst exponent.  All pairs are
    checked when the leaf count is small, otherwise a seeded sample.
    """
    n_leaves = graded.level_count(graded.levels)
    exhaustive = n_leaves <= exhaustive_limit
    if exhaustive:
        d = _source_leaf_confluent_depths(graded, None)
        pairs_checked = len(d)
    else:
        if not sample_pairs or sample_pairs < 1:
            raise ConstructionError("sample_pairs must be >= 1 for large trees")
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, n_leaves, size=(sample_pairs, 2))
        idx = idx[idx[:, 0] != idx[:, 1]]
        d = _source_leaf_confluent_depths(graded, idx)
        pairs_checked = len(d)
    d = d[d < graded.depth_used]  # identical leaves carry no ratio
    if len(d) == 0:
        worst = 0
    else:
        worst = int((d - graded.k * (d // graded.k)).max())
    return BiLipschitzAudit(
        k=graded.k,
        max_log2_ratio=worst,
        pairs_checked=pairs_checked,
        exhaustive=exhaustive,
    )


# -- selection and thinning -----------------------------------------------------------


@dataclass(frozen=True)
class SelectionPlan:
    """Block length and branching budget for the periodic selection."""

    Q: Exponent
    alpha: Fraction
    k: int
    M: int
    min_block_count: int

    def __post_init__(self):
        if self.M < 1:
            raise ConstructionError("M must be >= 1")
        if not self.alpha * self.k < self.M:
            raise ConstructionError("selection needs alpha*k < M")
        if 2 ** self.M > self.min_block_count:
            raise ConstructionError("selection exceeds the minimal block count")

    @property
    def ratio(self) -> Fraction:
        """The thinning ratio ``alpha*k/M`` (strictly inside (0,1))."""
        return Fraction(self.alpha * self.k, self.M)

    @property
    def epsilon_float(self) -> float:
        return self.Q.as_float() - self.M / self.k

    def schedule(self) -> DigitSchedule:
        return digit_schedule(self.ratio)


def _min_sphere_count(tree: RootedTree | UniformTree, k: int) -> int:
    if isinstance(tree, UniformTree):
        return tree.sphere_count_range(k)[0]
    counts = tree.sphere_counts(k)
    anchors = tree.depth <= tree.D - k
    return int(counts[anchors].min())


def choose_plan(
    tree: RootedTree | UniformTree,
    Q: Exponent,
    alpha: Fraction | str,
    k_search_max: int = 8,
) -> SelectionPlan:
    """Smallest feasible block length with the largest branching budget.

    Feasibility: an integer ``M`` with ``alpha*k < M`` and
    ``2**M <= min_x #S_k(x)``.  The largest such ``M`` minimises the
    regularity slack; the smallest ``k`` keeps the grading distortion low.
    """
    alpha = Fraction(alpha)
    if alpha <= 0:
        raise ConstructionError("alpha must be positive")
    if not PowerSum.pow2(alpha) < Q.scale(1):
        raise ConstructionError(f"alpha={alpha} must be strictly below Q={Q}")
    for k in range(1, min(k_search_max, tree.D) + 1):
        smin = _min_sphere_count(tree, k)
        m_cap = smin.bit_length() - 1  # floor(log2(smin))
        if m_cap >= 1 and alpha * k < m_cap:
            return SelectionPlan(
                Q=Q, alpha=alpha, k=k, M=m_cap, min_block_count=smin
            )
    raise ConstructionError(
        f"no feasible block length k <= {k_search_max}: the tree is too thin "
        "at the searched scales or alpha is too close to Q"
    )


def select_periodic(graded: GradedTree, plan: SelectionPlan) -> GradedTree:
    """Keep exactly ``2**M`` lexicographically smallest block children at
    every level node, yielding a periodic graded tree."""
    keep = 2 ** plan.M
    lt = graded.level_tree
    if isinstance(lt, UniformTree):
        if any(q < keep for q in lt.degrees):
            raise ConstructionError("capacity violation: block with < 2**M children")
        return GradedTree(
            level_tree=UniformTree([keep] * lt.D),
            k=graded.k,
            depth_used=graded.depth_used,
            source=graded.source,
            block_radices=graded.block_radices,
            notes=list(graded.notes),
        )
    parents: list[int] = [-1]
    to_source: list[int] = [int(graded.level_to_source[0])]
    frontier = [(0, 0)]
    for _ in range(lt.D):
        nxt: list[tuple[int, int]] = []
        for old, new in frontier:
            kids = lt.children(old)
            if len(kids) < keep:
                raise ConstructionError(
                    "capacity violation: block with < 2**M children"
                )
            for c in kids[:keep]:
                parents.append(new)
                to_source.append(int(graded.level_to_source[int(c)]))
                nxt.append((int(c), len(parents) - 1))
        frontier = nxt
    return GradedTree(
        level_tree=RootedTree(parents, lt.D),
        k=graded.k,
        depth_used=graded.depth_used,
        source=graded.source,
        level_to_source=np.asarray(to_source, dtype=np.int64),
        notes=list(graded.notes),
    )


def thin_periodic(graded: GradedTree, sched: DigitSchedule) -> GradedTree:
    """Thin a periodic graded tree by a digit schedule.

    Edges from level ``n`` to level ``n+1`` survive in full when
    ``e_{n+1} = 1``; otherwise only the lexicographically smallest block
    child remains.  Level-``p`` nodes then have exactly
    ``2**(M*(E(n+p)-E(p)))`` level-``(p+n)`` descendants.
    """
    lt = graded.level_tree
    if isinstance(lt, UniformTree):
        degrees = [
            lt.degrees[n] if sched.digit(n + 1) == 1 else 1 for n in range(lt.D)
        ]
        return GradedTree(
            level_tree=UniformTree(degrees),
            k=graded.k,
            depth_used=graded.depth_used,
            source=graded.source,
            block_radices=graded.block_radices,
            notes=list(graded.notes),
        )
    parents: list[int] = [-1]
    to_source: list[int] = [int(graded.level_to_source[0])]
    frontier = [(0, 0)]
    for n in range(lt.D):
        full = sched.digit(n + 1) == 1
        nxt: list[tuple[int, int]] = []
        for old, new in frontier:
            kids = lt.children(old)
            for c in (kids if full else kids[:1]):
                parents.append(new)
                to_source.append(int(graded.level_to_source[int(c)]))
                nxt.append((int(c), len(parents) - 1))
        frontier = nxt
    return GradedTree(
        level_tree=RootedTree(parents, lt.D),
        k=graded.k,
        depth_used=graded.depth_used,
        source=graded.source,
        level_to_source=np.asarray(to_source, dtype=np.int64),
        notes=list(graded.notes),
    )


# -- boundary subsets ------------------------------------------------------------------


def ball_counting_report(
    addresses: Sequence[Sequence[int]],
    alpha: Fraction,
    *,
    stride: int = 1,
    tree_label: str = "subspace",
    threshold: Fraction | None = DEFAULT_THRESHOLD,
) -> RegularityReport:
    """Certify a boundary subset by direct ball counting.

    The subset carries the normalized counting measure; closed balls of
    radius ``2**-d`` are the groups sharing a ``d``-prefix, and the report
    records exact extrema of ``mu(B) / r**alpha`` at every checked scale.
    """
    addresses = [tuple(a) for a in addresses]
    if not addresses:
        raise ConstructionError("empty boundary subset")
    total = len(addresses)
    depth = len(addresses[0])
    if any(len(a) != depth for a in addresses):
        raise ConstructionError("addresses must share one depth")
    alpha = Fraction(alpha)
    rows: list[ScaleRow] = []
    for d in range(stride, depth + 1, stride):
        groups: dict[tuple[int, ...], int] = {}
        for a in addresses:
            key = a[:d]
            groups[key] = groups.get(key, 0) + 1
        scale = PowerSum.pow2(alpha * d)
        counts = groups.values()
        rows.append(
            ScaleRow(
                d,
                Fraction(min(counts), total) * scale,
                Fraction(max(counts), total) * scale,
                min(counts),
                max(counts),
            )
        )
    lower = min(r.min_ratio for r in rows)
    upper = max(r.max_ratio for r in rows)
    return RegularityReport(
        kind="measure",
        exponent=Exponent(alpha),
        tree=tree_label,
        D=depth,
        rows=rows,
        lower=lower,
        upper=upper,
        threshold=threshold,
        notes=[f"normalized counting measure on {total} boundary cylinders"],
    )


# -- end-to-end -----------------------------------------------------------------------


@dataclass
class ExtractionResult:
    """Thinned tree, certification reports, and the pulled-back subset."""

    plan: SelectionPlan
    graded: GradedTree
    thinned: RootedTree
    report: RegularityReport
    subspace_ids: list[int]
    subspace_addresses: list[tuple[int, ...]]
    subspace_report: RegularityReport
    depth_used: int
    notes: list[str]


def extract_regular_subspace(
    tree: RootedTree | UniformTree,
    Q: Exponent,
    alpha: Fraction | str,
    *,
    k_search_max: int = 8,
    threshold: Fraction | None = DEFAULT_THRESHOLD,
    tree_label: str = "source",
    precheck: bool = True,
) -> ExtractionResult:
    """Run the full pipeline and certify the result at exponent ``alpha``.

    Raises :class:`ConstructionError` before producing any output when the
    input fails its Q-regularity counting pre-check or no feasible plan
    exists in the searched range.
    """
    alpha = Fraction(alpha)
    notes: list[str] = []
    if precheck:
        pre = counting_bounds(tree, Q, threshold=threshold, tree_label=tree_label)
        if pre.status == "fail":
            raise ConstructionError(
                f"input failed the Q={Q} counting pre-check "
                f"(ratio {pre.ratio_float():.3g} over threshold {threshold})"
            )
        notes.append(
            f"pre-check: counting ratio {pre.ratio_float():.6g} at Q={Q}"
        )
    plan = choose_plan(tree, Q, alpha, k_search_max)
    graded = homogenize(tree, plan.k)
    periodic = select_periodic(graded, plan)
    thin = thin_periodic(periodic, plan.schedule())
    thinned_full = thin.full_arena()
    report = counting_bounds(
        thinned_full,
        Exponent(alpha),
        threshold=threshold,
        tree_label=f"thinned({tree_label})",
    )
    addresses = thin.source_leaf_addresses()
    ids = thin.source_leaf_ids()
    sub_report = ball_counting_report(
        addresses,
        alpha,
        stride=plan.k,
        tree_label=f"pullback({tree_label})",
        threshold=threshold,
    )
    notes.extend(thin.notes)
    notes.append(
        f"plan: k={plan.k} M={plan.M} ratio={plan.ratio} "
        f"min_block_count={plan.min_block_count}"
    )
    notes.append(
        "boundary subset pulled back through the block-grading bijection "
        f"to {len(ids)} depth-{thin.depth_used} cylinders"
    )
    return ExtractionResult(
        plan=plan,
        graded=graded,
        thinned=thinned_full,
        report=report,
        subspace_ids=ids,
        subspace_addresses=addresses,
        subspace_report=sub_report,
        depth_used=thin.depth_used,
        notes=notes,
    )
