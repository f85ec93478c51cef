"""Dyadic-cube hierarchies over finite metric spaces and the projection
that transports regular tree subsets to regular point subsets.

The decomposition is a constructive variant of the classical dyadic-cube
families for metric spaces: greedy ``delta**k``-nets nested across levels
(finest first), cube membership assigned at the finest level by first-fit
(smallest-index center within the covering radius) and propagated upward
through center parents.  Nesting, unique parents, and exact coverage hold
by construction; the diameter and inner-ball properties are audited, never
assumed.

The cube tree's boundary maps onto the point set by sending each leaf ray
to the center of its deepest cube; the audit measures the cover constants
that make this projection a regular map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact import Exponent, PowerSum
from .regularity import DEFAULT_THRESHOLD, RegularityReport, ScaleRow
from .trees import RootedTree, TreeError, atomic_write

__all__ = [
    "MetricSpaceError",
    "FiniteMetricSpace",
    "grid_space",
    "CubeHierarchy",
    "HierarchyAudit",
    "christ_decompose",
    "ProjectionMap",
    "hierarchy_tree",
    "snowflake_distance",
    "RegularMapAudit",
    "regular_map_audit",
    "lambda_project",
    "empirical_regularity",
    "write_points_file",
    "read_points_file",
    "format_points_file",
    "parse_points_file",
    "format_hierarchy_file",
    "write_hierarchy_file",
    "parse_hierarchy_file",
]


class MetricSpaceError(ValueError):
    """Invalid metric-space input or decomposition parameters."""


class FiniteMetricSpace:
    """Indexed point set with pairwise distances, diameter normalised to 1.

    Distances come either from coordinates under a chosen norm (computed on
    demand, nothing quadratic is stored) or from an explicit matrix.
    """

    def __init__(self, *, coords: np.ndarray | None = None, norm: str = "sup",
                 matrix: np.ndarray | None = None):
        if (coords is None) == (matrix is None):
            raise MetricSpaceError("provide exactly one of coords or matrix")
        self.norm = norm
        self.coords = None if coords is None else np.asarray(coords, dtype=float)
        self.matrix = None if matrix is None else np.asarray(matrix, dtype=float)
        if self.coords is not None:
            if self.coords.ndim != 2 or len(self.coords) == 0:
                raise MetricSpaceError("coords must be a nonempty 2-d array")
            if norm not in ("sup", "euclid"):
                raise MetricSpaceError(f"unknown norm {norm!r}")
            self.n = len(self.coords)
        else:
            m = self.matrix
            if m.ndim != 2 or m.shape[0] != m.shape[1] or len(m) == 0:
                raise MetricSpaceError("matrix must be square and nonempty")
            if (m < 0).any() or (np.diag(m) != 0).any() or not np.allclose(m, m.T):
                raise MetricSpaceError("matrix is not a distance matrix")
            self.n = len(m)
        self._diameter_raw = self._compute_diameter()
        self._scale = 1.0 if self._diameter_raw == 0 else 1.0 / self._diameter_raw

    @classmethod
    def from_points(cls, coords, norm: str = "sup") -> "FiniteMetricSpace":
        return cls(coords=coords, norm=norm)

    @classmethod
    def from_matrix(cls, matrix) -> "FiniteMetricSpace":
        return cls(matrix=matrix)

    def _raw_row(self, i: int) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix[i]
        diff = self.coords - self.coords[i]
        if self.norm == "sup":
            return np.abs(diff).max(axis=1)
        return np.sqrt((diff * diff).sum(axis=1))

    def _compute_diameter(self) -> float:
        return max(float(self._raw_row(i).max()) for i in range(self.n))

    def dist_row(self, i: int) -> np.ndarray:
        """Normalised distances from point ``i`` to every point."""
        return self._raw_row(i) * self._scale

    def dist(self, i: int, j: int) -> float:
        return float(self.dist_row(i)[j])

    @property
    def diameter(self) -> float:
        return 0.0 if self._diameter_raw == 0 else 1.0

    def min_separation(self, subset: Sequence[int] | None = None) -> float:
        idx = np.arange(self.n) if subset is None else np.asarray(subset)
        if len(idx) < 2:
            return math.inf
        best = math.inf
        for pos, i in enumerate(idx[:-1]):
            row = self.dist_row(int(i))[idx[pos + 1:]]
            best = min(best, float(row.min()))
        return best

    def audit_metric(self, samples: int = 1000, seed: int = 0) -> None:
        """Check the triangle inequality on sampled triples (raises on failure)."""
        rng = np.random.default_rng(seed)
        tol = 1e-12
        for _ in range(samples):
            i, j, k = (int(v) for v in rng.integers(0, self.n, size=3))
            dij, dik, djk = self.dist(i, j), self.dist(i, k), self.dist(j, k)
            if dij > dik + djk + tol:
                raise MetricSpaceError(
                    f"triangle inequality fails on ({i},{j},{k})"
                )


def grid_space(side: int, norm: str = "sup") -> FiniteMetricSpace:
    """``side x side`` uniform grid on the unit square (row-major indexing)."""
    if side < 2:
        raise MetricSpaceError("grid needs side >= 2")
    axis = np.arange(side, dtype=float) / (side - 1)
    xs, ys = np.meshgrid(axis, axis, indexing="ij")
    coords = np.column_stack([xs.ravel(), ys.ravel()])
    return FiniteMetricSpace.from_points(coords, norm=norm)


# -- hierarchy -----------------------------------------------------------------


@dataclass(frozen=True)
class HierarchyAudit:
    """Exact verification of the cube-family properties."""

    coverage_exact: bool          # every point in exactly one cube per level
    nesting_exact: bool           # finer cubes sit inside one coarser cube
    unique_parent: bool
    c1_measured: float            # max diam(cube) / delta**k
    inner_ball_ok: bool           # B(z, c2*delta**k) stays inside the cube
    inner_ball_violations: int
    root_is_single: bool

    def all_ok(self, c1_limit: float | None = None) -> bool:
        ok = (
            self.coverage_exact
            and self.nesting_exact
            and self.unique_parent
            and self.inner_ball_ok
            and self.root_is_single
        )
        if c1_limit is not None:
            ok = ok and self.c1_measured <= c1_limit
        return ok


@dataclass
class CubeHierarchy:
    """Nested cube family: per level, net centers, membership, and parents."""

    space: FiniteMetricSpace
    delta: Fraction
    c2: Fraction
    k_max: int
    centers: list[np.ndarray]      # level k -> point indices of the centers
    membership: list[np.ndarray]   # level k -> point index -> cube index
    parents: list[np.ndarray]      # level k>=1 -> cube index -> parent cube

    def level_size(self, k: int) -> int:
        return len(self.centers[k])

    def cube_members(self, k: int, a: int) -> np.ndarray:
        return np.nonzero(self.membership[k] == a)[0]

    def cube_of(self, k: int, point: int) -> int:
        return int(self.membership[k][point])

    def scale(self, k: int) -> float:
        return float(self.delta) ** k

    def cube_diameters(self, k: int) -> np.ndarray:
        out = np.zeros(self.level_size(k))
        for a in range(self.level_size(k)):
            members = self.cube_members(k, a)
            if len(members) > 1:
                d = 0.0
                for i in members:
                    d = max(d, float(self.space.dist_row(int(i))[members].max()))
                out[a] = d
        return out

    def audit(self) -> HierarchyAudit:
        n = self.space.n
        coverage = all(
            len(self.membership[k]) == n
            and self.membership[k].min() >= 0
            and self.membership[k].max() < self.level_size(k)
            for k in range(self.k_max + 1)
        )
        # Nesting and unique parents: the chain map must reproduce every
        # coarser membership from the finest one.
        nesting = True
        for k in range(self.k_max):
            chained = self.parents[k + 1][self.membership[k + 1]]
            nesting = nesting and bool((chained == self.membership[k]).all())
        unique_parent = all(
            (self.parents[k] >= 0).all()
            and (self.parents[k] < self.level_size(k - 1)).all()
            for k in range(1, self.k_max + 1)
        )
        c1 = 0.0
        for k in range(self.k_max + 1):
            diams = self.cube_diameters(k)
            if len(diams):
                c1 = max(c1, float(diams.max()) / self.scale(k))
        violations = 0
        c2f = float(self.c2)
        for k in range(self.k_max + 1):
            radius = c2f * self.scale(k)
            for a in range(self.level_size(k)):
                z = int(self.centers[k][a])
                inside = np.nonzero(self.space.dist_row(z) <= radius)[0]
                violations += int((self.membership[k][inside] != a).sum())
        return HierarchyAudit(
            coverage_exact=coverage,
            nesting_exact=nesting,
            unique_parent=unique_parent,
            c1_measured=c1,
            inner_ball_ok=violations == 0,
            inner_ball_violations=violations,
            root_is_single=self.level_size(0) == 1,
        )


def _greedy_net(space: FiniteMetricSpace, candidates: np.ndarray,
                threshold: float) -> np.ndarray:
    """Scan candidates in index order, accepting points >= threshold from
    every previously accepted center."""
    accepted: list[int] = []
    for idx in candidates:
        i = int(idx)
        if accepted:
            row = space.dist_row(i)[accepted]
            if float(row.min()) < threshold:
                continue
        accepted.append(i)
    return np.asarray(accepted, dtype=np.int64)


def _first_fit(space: FiniteMetricSpace, targets: np.ndarray,
               centers: np.ndarray, radius: float) -> np.ndarray:
    """Assign each target to the smallest-index center strictly within
    ``radius``.

    The strict inequality mirrors the greedy net's rejection rule, so every
    non-center is covered and every center self-assigns (distinct centers
    are at least ``radius`` apart).
    """
    assignment = np.full(len(targets), -1, dtype=np.int64)
    for a, c in enumerate(centers):
        row = space.dist_row(int(c))[targets]
        free = assignment < 0
        assignment[free & (row < radius)] = a
    if (assignment < 0).any():
        missing = int((assignment < 0).sum())
        raise MetricSpaceError(
            f"{missing} points not covered at radius {radius}: not a net"
        )
    return assignment


def christ_decompose(
    space: FiniteMetricSpace,
    delta: Fraction | str,
    c2: Fraction | str,
    k_max: int | None = None,
) -> CubeHierarchy:
    """Build the nested cube hierarchy with parameters ``delta`` and ``c2``.

    Requires ``delta + c2 <= 1/4`` and pairwise-distinct points.  With
    ``k_max=None`` the hierarchy is built down to the net resolution
    ``ceil(log_{1/delta}(1/min_separation))`` and trimmed at the first
    level containing a singleton cube (finer levels carry no information).
    """
    delta = Fraction(delta)
    c2 = Fraction(c2)
    if not 0 < delta < 1:
        raise MetricSpaceError("delta must lie in (0, 1)")
    if c2 <= 0:
        raise MetricSpaceError("c2 must be positive")
    if delta + c2 > Fraction(1, 4):
        raise MetricSpaceError(f"need delta + c2 <= 1/4, got {delta + c2}")
    minsep = space.min_separation()
    if minsep == 0:
        raise MetricSpaceError("duplicate points in the metric space")
    auto = k_max is None
    if auto:
        if space.n == 1:
            k_max = 1
        else:
            k_max = max(1, math.ceil(math.log(1 / minsep) / math.log(1 / float(delta))))
    if k_max < 1:
        raise MetricSpaceError("k_max must be >= 1")

    # Nets, finest first; every coarser net is a subset of the next finer.
    all_points = np.arange(space.n, dtype=np.int64)
    nets: dict[int, np.ndarray] = {}
    nets[k_max] = _greedy_net(space, all_points, float(delta) ** k_max)
    for k in range(k_max - 1, 0, -1):
        nets[k] = _greedy_net(space, nets[k + 1], float(delta) ** k)
    nets[0] = nets[1][:1] if k_max >= 1 else np.asarray([0], dtype=np.int64)

    # Membership at the finest level, parent chains above.  Level 0 is the
    # forced single root cube, so level-1 parenthood is unconditional.
    centers = [nets[k] for k in range(k_max + 1)]
    parents: list[np.ndarray] = [np.asarray([], dtype=np.int64)]
    parents.append(np.zeros(len(centers[1]), dtype=np.int64))
    for k in range(2, k_max + 1):
        parents.append(
            _first_fit(space, centers[k], centers[k - 1], float(delta) ** (k - 1))
        )
    membership = [np.zeros(space.n, dtype=np.int64) for _ in range(k_max + 1)]
    membership[k_max] = _first_fit(
        space, all_points, centers[k_max], float(delta) ** k_max
    )
    for k in range(k_max - 1, -1, -1):
        membership[k] = parents[k + 1][membership[k + 1]]

    hierarchy = CubeHierarchy(
        space=space,
        delta=delta,
        c2=c2,
        k_max=k_max,
        centers=centers,
        membership=membership,
        parents=parents,
    )
    if auto:
        # Trim below the first level that contains a singleton cube.
        for k in range(1, k_max + 1):
            sizes = np.bincount(membership[k], minlength=len(centers[k]))
            if sizes.min() <= 1:
                return CubeHierarchy(
                    space=space,
                    delta=delta,
                    c2=c2,
                    k_max=k,
                    centers=centers[: k + 1],
                    membership=membership[: k + 1],
                    parents=parents[: k + 1],
                )
    return hierarchy


# -- the cube tree and the projection ------------------------------------------


@dataclass
class ProjectionMap:
    """Level-wise bijection between tree nodes and cubes, and the boundary
    projection sending a leaf ray to its deepest cube's center."""

    hierarchy: CubeHierarchy
    tree: RootedTree
    level_offsets: tuple[int, ...]

    def node_of_cube(self, k: int, a: int) -> int:
        return self.level_offsets[k] + a

    def cube_of_node(self, node: int) -> tuple[int, int]:
        k = int(np.searchsorted(self.level_offsets, node, side="right")) - 1
        return k, node - self.level_offsets[k]

    def leaf_point(self, leaf: int) -> int:
        k, a = self.cube_of_node(leaf)
        if k != self.hierarchy.k_max:
            raise TreeError("projection is defined on deepest-level leaves")
        return int(self.hierarchy.centers[k][a])

    def project(self, leaves: Sequence[int]) -> tuple[list[int], dict[int, int]]:
        """Image point indices (deduplicated, sorted) and fiber sizes."""
        fibers: dict[int, int] = {}
        for leaf in leaves:
            p = self.leaf_point(int(leaf))
            fibers[p] = fibers.get(p, 0) + 1
        return sorted(fibers), fibers


def hierarchy_tree(h: CubeHierarchy) -> tuple[RootedTree, ProjectionMap]:
    """One tree node per cube, edges by cube parenthood, depth = level."""
    offsets = [0]
    for k in range(h.k_max + 1):
        offsets.append(offsets[-1] + h.level_size(k))
    parents: list[int] = [-1] * offsets[-1]
    for k in range(1, h.k_max + 1):
        for a in range(h.level_size(k)):
            parents[offsets[k] + a] = offsets[k - 1] + int(h.parents[k][a])
    tree = RootedTree(parents, h.k_max)
    return tree, ProjectionMap(h, tree, tuple(offsets[:-1]))


# -- snowflake ------------------------------------------------------------------


def snowflake_distance(
    r: PowerSum | Fraction | int, delta: Fraction | str
) -> Fraction | float:
    """Reparametrise a base-1/2 distance value to edge-weight base ``delta``.

    ``2**-n`` maps to ``delta**n`` exactly (the two metrics have identical
    balls at matching radii); values that are not integer powers of two fall
    back to the float ``r ** log2(1/delta)``.
    """
    delta = Fraction(delta)
    if not 0 < delta < 1:
        raise MetricSpaceError("delta must lie in (0, 1)")
    if isinstance(r, PowerSum):
        if r.is_zero():
            return Fraction(0)
        terms = r.terms()
        if len(terms) == 1 and terms[0][1] == 1 and terms[0][0].denominator == 1:
            return delta ** (-int(terms[0][0]))
    else:
        rf = Fraction(r)
        if rf == 0:
            return Fraction(0)
        if rf > 0:
            num, den = rf.numerator, rf.denominator
            if num & (num - 1) == 0 and den & (den - 1) == 0:
                e = num.bit_length() - den.bit_length()
                return delta ** (-e)
    value = float(r)
    if value < 0:
        raise MetricSpaceError("distances are non-negative")
    return value ** math.log2(1 / float(delta))


# -- regular-map audit -------------------------------------------------------------


@dataclass(frozen=True)
class RegularMapAudit:
    """Measured cover constants for the boundary-to-space projection."""

    levels: tuple[int, ...]
    cover_counts: tuple[int, ...]       # c3 per level: cubes meeting a ball
    preimage_counts: tuple[int, ...]    # tree balls covering a ball preimage
    image_overlap: int                  # c4: cubes whose images meet a cube
    radius_fractions: tuple[float, ...]
    centers_exhaustive: bool

    @property
    def c3(self) -> int:
        return max(self.cover_counts)

    @property
    def c4(self) -> int:
        return self.image_overlap

    def composition_ok(self) -> bool:
        return all(p <= self.c3 * self.c4 for p in self.preimage_counts)


def regular_map_audit(
    h: CubeHierarchy,
    ball_samples: int | None = None,
    seed: int = 0,
    *,
    levels: Sequence[int] | None = None,
    radius_fractions: Sequence[float] = (1.0,),
) -> RegularMapAudit:
    """Measure, per level ``k``, the worst number of level-``k`` cubes that
    meet a ball ``B(x, r)`` with ``delta**(k+1) < r <= delta**k``.

    ``radius_fractions`` are the sampled radii as fractions of ``delta**k``
    (clamped inside the window).  Ball centers are all points when feasible,
    otherwise a seeded sample.  Also measured: the worst overlap between
    cube images at one level (``c4``) and the number of depth-``k`` tree
    balls needed to cover a ball preimage, which must stay within
    ``c3 * c4``.
    """
    if levels is None:
        levels = range(1, h.k_max + 1)
    levels = tuple(int(k) for k in levels)
    if any(not 1 <= k <= h.k_max for k in levels):
        raise MetricSpaceError("audited levels must lie within the hierarchy")
    n = h.space.n
    if ball_samples is None or ball_samples >= n:
        centers = np.arange(n)
        exhaustive = True
    else:
        rng = np.random.default_rng(seed)
        centers = rng.choice(n, size=ball_samples, replace=False)
        exhaustive = False
    dfl = float(h.delta)
    finest_centers = h.centers[h.k_max]
    cover: list[int] = []
    preimage: list[int] = []
    for k in levels:
        worst = 0
        worst_pre = 0
        for x in centers:
            row = h.space.dist_row(int(x))
            for frac in radius_fractions:
                r = dfl ** k * frac
                r = min(max(r, dfl ** (k + 1) * (1 + 1e-9)), dfl ** k)
                inside = row <= r
                cubes = np.unique(h.membership[k][inside])
                worst = max(worst, len(cubes))
                # Preimage cover: the leaves landing in the ball are the
                # deepest cubes whose centers lie inside; covering them by
                # depth-k tree balls means counting their level-k ancestors.
                hit = row[finest_centers] <= r
                ancestors = np.unique(h.membership[k][finest_centers[hit]])
                worst_pre = max(worst_pre, len(ancestors))
        cover.append(worst)
        preimage.append(worst_pre)
    c4 = _image_overlap(h)
    return RegularMapAudit(
        levels=levels,
        cover_counts=tuple(cover),
        preimage_counts=tuple(preimage),
        image_overlap=c4,
        radius_fractions=tuple(float(f) for f in radius_fractions),
        centers_exhaustive=exhaustive,
    )


def _image_overlap(h: CubeHierarchy) -> int:
    """Worst count of same-level cubes whose boundary images meet one cube.

    The image of a cube's boundary patch is the set of deepest-level
    centers below it.  Ancestry is taken through the tree (parent chains)
    while containment is taken through point membership, so a mismatch
    between the two -- a broken partition -- would surface here as an
    overlap above 1.
    """
    worst = 0
    finest_centers = h.centers[h.k_max]
    finest = np.arange(h.level_size(h.k_max))
    for k in range(1, h.k_max + 1):
        ancestor = finest.copy()
        for j in range(h.k_max, k, -1):
            ancestor = h.parents[j][ancestor]
        member = h.membership[k][finest_centers]
        per_cube: dict[int, set[int]] = {}
        for m, a in zip(member.tolist(), ancestor.tolist()):
            per_cube.setdefault(m, set()).add(a)
        worst = max(worst, max(len(v) for v in per_cube.values()))
    return worst


def lambda_project(
    pm: ProjectionMap, leaves: Sequence[int]
) -> tuple[list[int], dict[int, int]]:
    """Project tree leaves to points; returns image indices and fiber sizes."""
    return pm.project(leaves)


# -- empirical regularity -------------------------------------------------------


def empirical_regularity(
    space: FiniteMetricSpace,
    alpha: Fraction | str,
    *,
    subset: Sequence[int] | None = None,
    radii: Sequence[Fraction] | None = None,
    sample_centers: int | None = None,
    seed: int = 0,
    threshold: Fraction | None = DEFAULT_THRESHOLD,
    label: str = "points",
) -> RegularityReport:
    """Measured counting-measure regularity of a point subset.

    ``mu`` is the normalized counting measure on the subset; the report
    holds exact extrema of ``mu(B(x, r)) / r**alpha`` over sampled centers
    and a dyadic radius grid inside ``[2 * min_separation, 1/2]``.
    """
    alpha = Fraction(alpha)
    idx = np.arange(space.n) if subset is None else np.asarray(sorted(subset))
    if len(idx) < 2:
        raise MetricSpaceError("empirical regularity needs at least 2 points")
    minsep = space.min_separation(idx)
    if radii is None:
        radii = []
        r = Fraction(1, 2)
        while float(r) >= 2 * minsep:
            radii.append(r)
            r = r / 2
    radii = [Fraction(r) for r in radii]
    radii = [r for r in radii if 2 * minsep <= float(r) <= 0.5]
    if not radii:
        raise MetricSpaceError(
            "empty radius window: resolution too coarse for requested scales"
        )
    total = len(idx)
    if sample_centers is None or sample_centers >= total:
        centers = idx
        exhaustive = True
    else:
        rng = np.random.default_rng(seed)
        centers = rng.choice(idx, size=sample_centers, replace=False)
        exhaustive = False
    rows: list[ScaleRow] = []
    for j, r in enumerate(sorted(radii, reverse=True)):
        rf = float(r)
        counts = []
        for x in centers:
            counts.append(int((space.dist_row(int(x))[idx] <= rf).sum()))
        lo_c, hi_c = min(counts), max(counts)
        inv = _power_ratio(r, alpha)
        rows.append(
            ScaleRow(j + 1, Fraction(lo_c, total) * inv, Fraction(hi_c, total) * inv,
                     lo_c, hi_c)
        )
    lower = min(r.min_ratio for r in rows)
    upper = max(r.max_ratio for r in rows)
    note = (
        f"normalized counting measure, {total} points, "
        f"{'exhaustive' if exhaustive else 'sampled'} centers, "
        f"radii {[str(r) for r in sorted(radii, reverse=True)]}"
    )
    return RegularityReport(
        kind="measure",
        exponent=Exponent(alpha),
        tree=label,
        D=len(rows),
        rows=rows,
        lower=lower,
        upper=upper,
        threshold=threshold,
        notes=[note],
    )


def _power_ratio(r: Fraction, alpha: Fraction) -> PowerSum | Fraction:
    """Exact ``r**-alpha`` when available, else a float-embedded fraction."""
    num, den = r.numerator, r.denominator
    if num & (num - 1) == 0 and den & (den - 1) == 0:
        e = num.bit_length() - den.bit_length()  # r == 2**e
        return PowerSum.pow2(-alpha * e)
    return Fraction(float(r) ** -float(alpha)).limit_denominator(10 ** 12)


# -- file formats -----------------------------------------------------------------


def format_points_file(space: FiniteMetricSpace) -> str:
    if space.coords is not None:
        dim = space.coords.shape[1]
        lines = [f"points v1 dim={dim} norm={space.norm}"]
        for row in space.coords:
            lines.append(" ".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"
    lines = [f"matrix v1 n={space.n}"]
    for row in space.matrix:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_points_file(text: str) -> FiniteMetricSpace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MetricSpaceError("empty points file")
    header = lines[0].split()
    if header[:2] == ["points", "v1"]:
        fields = dict(part.split("=", 1) for part in header[2:])
        dim = int(fields["dim"])
        norm = fields["norm"]
        coords = [[float(v) for v in ln.split()] for ln in lines[1:]]
        if any(len(row) != dim for row in coords):
            raise MetricSpaceError("coordinate row with wrong dimension")
        return FiniteMetricSpace.from_points(np.asarray(coords), norm=norm)
    if header[:2] == ["matrix", "v1"]:
        fields = dict(part.split("=", 1) for part in header[2:])
        n = int(fields["n"])
        rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise MetricSpaceError("matrix block has wrong shape")
        return FiniteMetricSpace.from_matrix(np.asarray(rows))
    raise MetricSpaceError("unknown points file header")


def write_points_file(space: FiniteMetricSpace, path) -> None:
    atomic_write(path, format_points_file(space))


def read_points_file(path) -> FiniteMetricSpace:
    with open(path, "r", encoding="ascii") as fh:
        return parse_points_file(fh.read())


def format_hierarchy_file(h: CubeHierarchy) -> str:
    lines = [
        f"hierarchy v1 delta={h.delta} c2={h.c2} k_max={h.k_max} n={h.space.n}"
    ]
    for k in range(h.k_max + 1):
        sizes = np.bincount(h.membership[k], minlength=h.level_size(k))
        for a in range(h.level_size(k)):
            parent = "-" if k == 0 else str(int(h.parents[k][a]))
            lines.append(
                f"level {k}: {a} {int(h.centers[k][a])} {parent} {int(sizes[a])}"
            )
    return "\n".join(lines) + "\n"


def write_hierarchy_file(h: CubeHierarchy, path) -> None:
    atomic_write(path, format_hierarchy_file(h))


def parse_hierarchy_file(text: str) -> dict:
    """Parse the hierarchy export (descriptive view, not the full object)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("hierarchy v1 "):
        raise MetricSpaceError("bad hierarchy header")
    fields = dict(part.split("=", 1) for part in lines[0].split()[2:])
    out = {
        "delta": Fraction(fields["delta"]),
        "c2": Fraction(fields["c2"]),
        "k_max": int(fields["k_max"]),
        "n": int(fields["n"]),
        "levels": {},
    }
    for ln in lines[1:]:
        head, rest = ln.split(":", 1)
        k = int(head.split()[1])
        a, center, parent, count = rest.split()
        out["levels"].setdefault(k, []).append(
            (int(a), int(center), None if parent == "-" else int(parent), int(count))
        )
    return out
