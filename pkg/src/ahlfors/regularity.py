"""Certified Ahlfors-regularity checks for tree boundaries.

Two equivalent characterizations are measured exactly:

* counting: ``#S_k(x)`` compared against ``2**(Q*k)`` over every anchor and
  scale (sphere-cardinality route), and
* stopping: extremal normalized sums ``sum_y 2**(-Q|y|) / 2**(-Q|x|)`` over
  stopping regions (weighted-cover route).

Constants are extrema over the whole truncation, never samples, and all
ratios are exact :class:`~ahlfors.exact.PowerSum` values.  A certification
is *drift-free* when re-running at a deeper truncation leaves the extrema
unchanged; finite truncations cannot certify more than that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact import Exponent, PowerSum
from .stopping import (
    normalized_extremal_table,
    uniform_normalized_extremal_table,
)
from .trees import RootedTree, TreeError, UniformTree, atomic_write

__all__ = [
    "ScaleRow",
    "RegularityReport",
    "counting_bounds",
    "stopping_bounds",
    "hausdorff_content_bracket",
    "minimal_cover_sum",
    "DimensionEstimate",
    "estimate_dimension",
    "parse_report_text",
    "render_report_docs",
    "read_report_file",
    "write_report_file",
]

DEFAULT_THRESHOLD = Fraction(16)


@dataclass(frozen=True)
class ScaleRow:
    """Extrema at one scale: ``k`` is a sphere radius or a stopping cap."""

    k: int
    min_ratio: PowerSum
    max_ratio: PowerSum
    min_count: int | None = None
    max_count: int | None = None


@dataclass
class RegularityReport:
    """Measured constants with the scale range they were certified over."""

    kind: str                      # counting | stopping | measure
    exponent: Exponent
    tree: str
    D: int
    rows: list[ScaleRow]
    lower: PowerSum
    upper: PowerSum
    scale_exponent: int = 1
    max_branching: int | None = None
    threshold: Fraction | None = None
    drift: str = "unchecked"       # unchecked | stable | detected
    notes: list[str] = field(default_factory=list)
    config: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.lower > self.upper:
            raise TreeError("report invariant violated: lower > upper")

    # -- verdicts ---------------------------------------------------------

    def threshold_ok(self) -> bool:
        if self.threshold is None:
            return True
        return self.upper <= self.lower * self.threshold

    @property
    def status(self) -> str:
        if not self.threshold_ok():
            return "fail"
        if self.drift == "detected":
            return "inconclusive"
        return "pass"

    def ratio_float(self) -> float:
        lo = float(self.lower)
        return math.inf if lo == 0.0 else float(self.upper) / lo

    # -- serialization ------------------------------------------------------

    def serialize(self) -> str:
        lines = ["report v1"]
        lines.append(f"kind={self.kind}")
        lines.append(f"tree={self.tree}")
        lines.append(f"D={self.D}")
        lines.append(f"Q={self.exponent.format()}")
        lines.append(f"scale_exponent={self.scale_exponent}")
        if self.threshold is not None:
            lines.append(f"threshold={self.threshold}")
        lines.append(f"lower={self.lower.exact_str()}")
        lines.append(f"upper={self.upper.exact_str()}")
        lines.append(f"lower_decimal={float(self.lower)!r}")
        lines.append(f"upper_decimal={float(self.upper)!r}")
        if self.max_branching is not None:
            lines.append(f"max_branching={self.max_branching}")
        lines.append(f"drift={self.drift}")
        lines.append(f"status={self.status}")
        for note in self.notes:
            lines.append(f"note={note}")
        for key in sorted(self.config):
            lines.append(f"config.{key}={self.config[key]}")
        lines.append("scales:")
        lines.append("k,min_ratio,max_ratio")
        for row in self.rows:
            lines.append(f"{row.k},{float(row.min_ratio)!r},{float(row.max_ratio)!r}")
        return "\n".join(lines) + "\n"


def parse_report_text(text: str) -> list[dict]:
    """Parse one or more serialized reports.

    Each document carries the verbatim ``fields`` (ordered key/value pairs,
    repeatable keys included), a ``keys`` mapping and ``notes`` list for
    convenient access, and the ``scales`` table.
    :func:`render_report_docs` inverts this parse exactly.
    """
    docs: list[dict] = []
    current: dict | None = None
    in_csv = False
    for line in text.splitlines():
        if not line.strip():
            continue
        if line == "report v1":
            current = {"fields": [], "keys": {}, "notes": [], "scales": []}
            docs.append(current)
            in_csv = False
            continue
        if current is None:
            raise ValueError("report text must start with 'report v1'")
        if line == "scales:":
            in_csv = True
            continue
        if in_csv:
            if line.startswith("k,"):
                continue
            k, lo, hi = line.split(",")
            current["scales"].append((int(k), float(lo), float(hi)))
        else:
            key, _, value = line.partition("=")
            current["fields"].append((key, value))
            if key == "note":
                current["notes"].append(value)
            else:
                current["keys"][key] = value
    if not docs:
        raise ValueError("empty report text")
    return docs


def render_report_docs(docs: Sequence[dict]) -> str:
    """Serialize parsed report documents back to text (inverse of parse)."""
    out: list[str] = []
    for doc in docs:
        out.append("report v1")
        for key, value in doc["fields"]:
            out.append(f"{key}={value}")
        out.append("scales:")
        out.append("k,min_ratio,max_ratio")
        for k, lo, hi in doc["scales"]:
            out.append(f"{k},{lo!r},{hi!r}")
    return "\n".join(out) + "\n"


def read_report_file(path) -> list[dict]:
    with open(path, "r", encoding="ascii") as fh:
        return parse_report_text(fh.read())


def write_report_file(reports: Sequence[RegularityReport], path) -> None:
    atomic_write(path, "".join(r.serialize() for r in reports))


# -- counting route -----------------------------------------------------------


def counting_bounds(
    tree: RootedTree | UniformTree,
    Q: Exponent,
    k_max: int | None = None,
    *,
    scale_exponent: int = 1,
    threshold: Fraction | None = DEFAULT_THRESHOLD,
    tree_label: str | None = None,
) -> RegularityReport:
    """Extrema of ``#S_k(x) / 2**(Q*k)`` over all anchors and scales.

    ``scale_exponent=e`` weighs level ``k`` as ``2**(-Q*e*k)``, which is the
    counting check for an edge-weight base ``2**-e`` instead of ``1/2``.
    """
    D = tree.D
    if k_max is None:
        k_max = D
    if not 1 <= k_max <= D:
        raise TreeError(f"k_max must be within [1, {D}]")
    rows: list[ScaleRow] = []
    if isinstance(tree, UniformTree):
        branching = tree.max_degree()
        for k in range(1, k_max + 1):
            cmin, cmax = tree.sphere_count_range(k)
            w = Q.weight(scale_exponent * k)
            rows.append(ScaleRow(k, cmin * w, cmax * w, cmin, cmax))
    else:
        branching = tree.max_degree()
        counts = np.ones(tree.n, dtype=np.int64)
        for k in range(1, k_max + 1):
            cs = np.concatenate(([0], np.cumsum(counts[tree.child_idx])))
            counts = cs[tree.child_ptr[1:]] - cs[tree.child_ptr[:-1]]
            anchors = tree.depth <= D - k
            if not anchors.any():
                break
            cmin = int(counts[anchors].min())
            cmax = int(counts[anchors].max())
            w = Q.weight(scale_exponent * k)
            rows.append(ScaleRow(k, cmin * w, cmax * w, cmin, cmax))
    lower = min(r.min_ratio for r in rows)
    upper = max(r.max_ratio for r in rows)
    return RegularityReport(
        kind="counting",
        exponent=Q,
        tree=tree_label or repr(tree),
        D=D,
        rows=rows,
        lower=lower,
        upper=upper,
        scale_exponent=scale_exponent,
        max_branching=branching,
        threshold=threshold,
        config={"k_max": str(k_max)},
    )


# -- stopping route -----------------------------------------------------------


def stopping_bounds(
    tree: RootedTree | UniformTree,
    Q: Exponent,
    depth_cap: int,
    *,
    threshold: Fraction | None = DEFAULT_THRESHOLD,
    tree_label: str | None = None,
) -> RegularityReport:
    """Extrema of anchor-normalized stopping sums, per member-depth cap.

    Row ``r`` of the table is the exact min/max over every anchor of the
    extremal stopping sums with members at relative depth <= ``r``; the
    certified constants are the row at the requested cap.  A strictly
    moving extremum at the last cap step is flagged, since it signals
    divergence (the exponent is not the regularity dimension).
    """
    if depth_cap < 1:
        raise TreeError("depth_cap must be >= 1")
    depth_cap = min(depth_cap, tree.D)
    if isinstance(tree, UniformTree):
        table = uniform_normalized_extremal_table(tree, Q, depth_cap)
    else:
        table = normalized_extremal_table(tree, Q, depth_cap)
    rows = [ScaleRow(r, lo, hi) for r, (lo, hi) in enumerate(table)]
    lower, upper = table[depth_cap]
    notes = []
    if depth_cap >= 2:
        prev_lo, prev_hi = table[depth_cap - 1]
        if upper > prev_hi or lower < prev_lo:
            notes.append(
                "extrema still moving at the deepest cap: "
                "unbounded growth, exponent is not regular"
            )
    return RegularityReport(
        kind="stopping",
        exponent=Q,
        tree=tree_label or repr(tree),
        D=tree.D,
        rows=rows,
        lower=lower,
        upper=upper,
        threshold=threshold,
        notes=notes,
        config={"depth_cap": str(depth_cap)},
    )


# -- Hausdorff content ---------------------------------------------------------


def minimal_cover_sum(t: RootedTree, x: int, Q: Exponent) -> PowerSum:
    """Minimal ``sum diam**Q`` over cylinder covers at resolution ``2**-D``."""
    order = sorted(
        np.nonzero([t.is_ancestor(x, y) for y in range(t.n)])[0],
        key=lambda i: -int(t.depth[i]),
    )
    best: dict[int, PowerSum] = {}
    for y in order:
        w = Q.weight(int(t.depth[y]))
        if t.degree(y) == 0:
            best[y] = w
        else:
            total = PowerSum.zero()
            for c in t.children(y):
                total = total + best[int(c)]
            best[y] = min(w, total)
    return best[x]


def hausdorff_content_bracket(
    t: RootedTree, x: int, Q: Exponent
) -> tuple[PowerSum, PowerSum]:
    """Bracket for the Hausdorff content of the boundary cylinder of ``x``.

    The upper end is the minimal cylinder-cover sum at resolution ``2**-D``;
    arbitrary covers can undercut cylinder covers by at most ``2**Q``, which
    gives the lower end.
    """
    upper = minimal_cover_sum(t, x, Q)
    return upper * Q.weight(1), upper


# -- dimension estimation -------------------------------------------------------


@dataclass(frozen=True)
class DimensionEstimate:
    """Least-squares slope of log2 sphere counts against the scale index."""

    slope: Fraction
    residual: Fraction
    points: tuple[tuple[int, Fraction], ...]

    def slope_float(self) -> float:
        return float(self.slope)

    def residual_float(self) -> float:
        return float(self.residual)


def _log2_exact_or_embedded(count: int) -> Fraction:
    if count < 1:
        raise TreeError("sphere counts must be positive")
    if count & (count - 1) == 0:
        return Fraction(count.bit_length() - 1)
    return Fraction(math.log2(count))


def estimate_dimension(
    tree: RootedTree | UniformTree,
    k_max: int | None = None,
    *,
    scale_exponent: int = 1,
    all_anchors: bool = False,
) -> DimensionEstimate:
    """Regress ``log2 #S_k(o)`` on ``scale_exponent * k`` for ``k=1..k_max``.

    Exact rational least squares.  When the counts form an exact geometric
    progression ``b**k`` the fit is perfectly linear, so the residual is
    exactly zero even for non-dyadic ``b``.  With ``all_anchors`` the fit
    pools the sphere counts of every anchor instead of only the root's (the
    cheap sufficiency check versus the full one).
    """
    D = tree.D
    if k_max is None:
        k_max = D
    if not 2 <= k_max <= D:
        raise TreeError("dimension estimation needs at least two scales")
    if all_anchors:
        return _estimate_dimension_pooled(tree, k_max, scale_exponent)
    if isinstance(tree, UniformTree):
        counts = [tree.level_counts[k] for k in range(1, k_max + 1)]
    else:
        counts = [len(tree.nodes_at_depth(k)) for k in range(1, k_max + 1)]
    base = counts[0]
    geometric = base >= 1 and all(
        counts[k - 1] == base ** k for k in range(1, k_max + 1)
    )
    if geometric:
        unit = _log2_exact_or_embedded(base)
        ys = [unit * k for k in range(1, k_max + 1)]
    else:
        ys = [_log2_exact_or_embedded(c) for c in counts]
    xs = [Fraction(scale_exponent * k) for k in range(1, k_max + 1)]
    n = len(xs)
    x_mean = sum(xs, Fraction(0)) / n
    y_mean = sum(ys, Fraction(0)) / n
    sxx = sum((x - x_mean) ** 2 for x in xs)
    sxy = sum((x - x_mean) * (y - y_mean) for x, y in zip(xs, ys))
    if sxx == 0:
        raise TreeError("degenerate single-scale input")
    slope = sxy / sxx
    intercept = y_mean - slope * x_mean
    residual = max(abs(y - (intercept + slope * x)) for x, y in zip(xs, ys))
    return DimensionEstimate(
        slope=slope,
        residual=residual,
        points=tuple((int(x), y) for x, y in zip(xs, ys)),
    )


def _estimate_dimension_pooled(
    tree: RootedTree | UniformTree, k_max: int, scale_exponent: int
) -> DimensionEstimate:
    """All-anchors variant: one sample per distinct (anchor profile, k)."""
    points: list[tuple[Fraction, Fraction]] = []
    if isinstance(tree, UniformTree):
        for k in range(1, k_max + 1):
            for d in range(tree.D - k + 1):
                points.append(
                    (Fraction(scale_exponent * k),
                     _log2_exact_or_embedded(tree.sphere_count(d, k)))
                )
    else:
        for k in range(1, k_max + 1):
            counts = tree.sphere_counts(k)
            for x in np.nonzero(tree.depth <= tree.D - k)[0]:
                points.append(
                    (Fraction(scale_exponent * k),
                     _log2_exact_or_embedded(int(counts[x])))
                )
    n = len(points)
    x_mean = sum(p[0] for p in points) / n
    y_mean = sum(p[1] for p in points) / n
    sxx = sum((x - x_mean) ** 2 for x, _ in points)
    sxy = sum((x - x_mean) * (y - y_mean) for x, y in points)
    if sxx == 0:
        raise TreeError("degenerate single-scale input")
    slope = sxy / sxx
    intercept = y_mean - slope * x_mean
    residual = max(abs(y - (intercept + slope * x)) for x, y in points)
    return DimensionEstimate(
        slope=slope,
        residual=residual,
        points=tuple((int(x), y) for x, y in points),
    )
