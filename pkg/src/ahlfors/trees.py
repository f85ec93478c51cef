"""Finite rooted trees and the visual ultrametric on their boundary.

Trees are truncated at a depth ``D``; depth-``D`` nodes stand for the
boundary cylinders at resolution ``2**-D``.  Two representations are
provided with the same semantics:

* :class:`RootedTree` -- an explicit arena (parent array + CSR children),
  used for general trees and whenever nodes must be addressed individually.
* :class:`UniformTree` -- a compact form for trees whose branching degree
  depends only on the depth (homogeneous and periodic trees, and every
  stage of the subspace-extraction pipeline on such input).  It makes
  depth-14+ homogeneous trees tractable; its answers are cross-checked
  against the arena path in the test suite.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exact import PowerSum

__all__ = [
    "TreeError",
    "TreeSizeError",
    "RootedTree",
    "UniformTree",
    "TreeSpec",
    "Homogeneous",
    "Periodic",
    "SeededRandom",
    "Explicit",
    "build_tree",
    "build_uniform_tree",
    "resolve_tree",
    "parse_tree_spec",
    "confluence",
    "boundary_distance",
    "sphere",
    "sphere_count",
    "pairwise_confluent_depths",
    "atomic_write",
    "write_tree_file",
    "read_tree_file",
    "format_tree_file",
    "parse_tree_file",
    "write_leaf_file",
    "read_leaf_file",
]

ARENA_NODE_LIMIT = 20_000_000


class TreeError(ValueError):
    """Malformed tree structure or invalid tree operation."""


class TreeSizeError(TreeError):
    """A tree too large to materialise as an explicit arena."""


def _segment_sums(values: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    cs = np.concatenate(([0], np.cumsum(values, dtype=np.int64)))
    return cs[ptr[1:]] - cs[ptr[:-1]]


class RootedTree:
    """Arena-allocated rooted tree, immutable after construction.

    Node ids are array indices.  Children keep their insertion order, which
    defines the lexicographic addressing used by every deterministic
    tie-break in the pipeline.
    """

    def __init__(self, parents: Sequence[int], D: int, *, validate: bool = True,
                 no_leaves_before_D: bool = False):
        n = len(parents)
        if n == 0:
            raise TreeError("empty tree")
        if D < 1:
            raise TreeError("truncation depth D must be >= 1")
        self.parent = np.asarray(parents, dtype=np.int64)
        self.D = int(D)
        self.n = n

        order: list[list[int]] = [[] for _ in range(n)]
        root = -1
        for i, p in enumerate(parents):
            if p < 0:
                if root >= 0:
                    raise TreeError("multiple roots")
                root = i
            else:
                if not 0 <= p < n:
                    raise TreeError(f"node {i}: parent {p} out of range")
                order[p].append(i)
        if root != 0:
            raise TreeError("node 0 must be the root")

        self.child_ptr = np.zeros(n + 1, dtype=np.int64)
        self.child_ptr[1:] = np.cumsum([len(c) for c in order])
        self.child_idx = np.fromiter(
            (c for cs in order for c in cs), dtype=np.int64, count=n - 1
        )

        # Depths via repeated parent propagation would be O(nD); do a BFS.
        self.depth = np.full(n, -1, dtype=np.int32)
        self.depth[0] = 0
        frontier = [0]
        while frontier:
            nxt: list[int] = []
            for u in frontier:
                d = self.depth[u] + 1
                for c in order[u]:
                    self.depth[c] = d
                    nxt.append(c)
            frontier = nxt

        if validate:
            self._validate(no_leaves_before_D)
        self._dfs_pos: np.ndarray | None = None
        self._subtree_size: np.ndarray | None = None
        self._by_depth: list[np.ndarray] | None = None

    # -- invariants --------------------------------------------------------

    def _validate(self, no_leaves_before_D: bool) -> None:
        if (self.depth < 0).any():
            raise TreeError("disconnected nodes")
        if int(self.depth.max()) > self.D:
            raise TreeError("node deeper than the truncation depth")
        degrees = np.diff(self.child_ptr)
        internal = self.depth < self.D
        if (degrees[internal] < 1).any():
            raise TreeError("internal node (depth < D) without children")
        if no_leaves_before_D and (degrees[internal] < 2).any():
            raise TreeError("degree-1 node below the truncation depth")
        if (degrees[~internal] != 0).any():
            raise TreeError("depth-D node with children")

    # -- basic structure ----------------------------------------------------

    def children(self, x: int) -> np.ndarray:
        return self.child_idx[self.child_ptr[x]:self.child_ptr[x + 1]]

    def degree(self, x: int) -> int:
        return int(self.child_ptr[x + 1] - self.child_ptr[x])

    @property
    def node_count(self) -> int:
        return self.n

    def _ensure_dfs(self) -> None:
        if self._dfs_pos is not None:
            return
        pos = np.empty(self.n, dtype=np.int64)
        size = np.ones(self.n, dtype=np.int64)
        # Iterative preorder with post-accumulated subtree sizes.
        counter = 0
        stack: list[tuple[int, bool]] = [(0, False)]
        while stack:
            node, done = stack.pop()
            if done:
                for c in self.children(node):
                    size[node] += size[c]
                continue
            pos[node] = counter
            counter += 1
            stack.append((node, True))
            for c in self.children(node)[::-1]:
                stack.append((int(c), False))
        self._dfs_pos = pos
        self._subtree_size = size

    def _ensure_by_depth(self) -> None:
        if self._by_depth is not None:
            return
        self._ensure_dfs()
        by_depth: list[np.ndarray] = []
        for d in range(self.D + 1):
            ids = np.nonzero(self.depth == d)[0]
            ids = ids[np.argsort(self._dfs_pos[ids], kind="stable")]
            by_depth.append(ids)
        self._by_depth = by_depth

    def nodes_at_depth(self, d: int) -> np.ndarray:
        """Node ids at depth ``d``, ordered lexicographically by address."""
        if not 0 <= d <= self.D:
            raise TreeError(f"depth {d} outside [0, {self.D}]")
        self._ensure_by_depth()
        return self._by_depth[d]

    def leaves(self) -> np.ndarray:
        return self.nodes_at_depth(self.D)

    def is_ancestor(self, x: int, y: int) -> bool:
        """True when ``x`` lies on the root path of ``y`` (or ``x == y``)."""
        self._ensure_dfs()
        px = self._dfs_pos[x]
        return px <= self._dfs_pos[y] < px + self._subtree_size[x]

    def address(self, x: int) -> tuple[int, ...]:
        """Child-index path from the root to ``x``."""
        digits: list[int] = []
        while self.parent[x] >= 0:
            p = int(self.parent[x])
            sibs = self.children(p)
            digits.append(int(np.nonzero(sibs == x)[0][0]))
            x = p
        return tuple(reversed(digits))

    def node_at(self, address: Sequence[int]) -> int:
        x = 0
        for digit in address:
            kids = self.children(x)
            if not 0 <= digit < len(kids):
                raise TreeError(f"address {tuple(address)} leaves the tree")
            x = int(kids[digit])
        return x

    def leaf_addresses(self) -> np.ndarray:
        """(num_leaves, D) array of child-index paths, lexicographic order."""
        leaves = self.leaves()
        out = np.zeros((len(leaves), self.D), dtype=np.int32)
        # Walk upward once, vectorised over all leaves.
        cur = leaves.copy()
        rank = np.zeros(self.n, dtype=np.int32)
        for x in range(self.n):
            kids = self.children(x)
            rank[kids] = np.arange(len(kids), dtype=np.int32)
        for d in range(self.D - 1, -1, -1):
            out[:, d] = rank[cur]
            cur = self.parent[cur]
        return out

    # -- sphere machinery ----------------------------------------------------

    def sphere_counts(self, k: int) -> np.ndarray:
        """``#S_k(x)`` for every node ``x`` (0 where depth(x)+k > D)."""
        if k < 0:
            raise TreeError("k must be >= 0")
        counts = np.ones(self.n, dtype=np.int64)
        for _ in range(k):
            counts = _segment_sums(counts[self.child_idx], self.child_ptr)
        return counts

    def sphere(self, x: int, k: int) -> np.ndarray:
        """Descendants of ``x`` at relative depth exactly ``k``."""
        if k < 0:
            raise TreeError("k must be >= 0")
        d = int(self.depth[x]) + k
        if d > self.D:
            raise TreeError("sphere radius overflows the truncation depth")
        self._ensure_by_depth()
        level = self._by_depth[d]
        lo = np.searchsorted(self._dfs_pos[level], self._dfs_pos[x])
        hi = np.searchsorted(
            self._dfs_pos[level], self._dfs_pos[x] + self._subtree_size[x]
        )
        return level[lo:hi]

    def descendant_leaves(self, x: int) -> np.ndarray:
        return self.sphere(x, self.D - int(self.depth[x]))

    def max_degree(self) -> int:
        return int(np.diff(self.child_ptr).max())

    def level_degree_profile(self) -> list[set[int]]:
        """Distinct branching degrees occurring at each depth < D."""
        degrees = np.diff(self.child_ptr)
        return [
            set(np.unique(degrees[self.nodes_at_depth(d)]).tolist())
            for d in range(self.D)
        ]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RootedTree):
            return NotImplemented
        return (
            self.D == other.D
            and self.n == other.n
            and np.array_equal(self.parent, other.parent)
            and np.array_equal(self.child_idx, other.child_idx)
        )

    def __repr__(self) -> str:
        return f"RootedTree(n={self.n}, D={self.D})"


class UniformTree:
    """Tree in which every depth-``d`` node has exactly ``degrees[d]`` children.

    Node ids follow level order: id = level offset + rank, where the rank's
    mixed-radix digits are the child-index path.  All counting quantities
    are closed-form products, so homogeneous trees of astronomically many
    nodes stay cheap.
    """

    def __init__(self, degrees: Sequence[int]):
        if len(degrees) < 1:
            raise TreeError("UniformTree needs at least one level")
        if any(q < 1 for q in degrees):
            raise TreeError("degrees must be >= 1")
        self.degrees = tuple(int(q) for q in degrees)
        self.D = len(self.degrees)
        counts = [1]
        for q in self.degrees:
            counts.append(counts[-1] * q)
        self.level_counts = tuple(counts)  # length D+1
        offsets = [0]
        for c in counts:
            offsets.append(offsets[-1] + c)
        self.level_offsets = tuple(offsets)

    @property
    def node_count(self) -> int:
        return self.level_offsets[-1]

    @property
    def leaf_count(self) -> int:
        return self.level_counts[self.D]

    def depth_of(self, x: int) -> int:
        if not 0 <= x < self.node_count:
            raise TreeError(f"node id {x} out of range")
        lo, hi = 0, self.D
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.level_offsets[mid] <= x:
                lo = mid
            else:
                hi = mid - 1
        return lo

    def node_id(self, depth: int, rank: int) -> int:
        return self.level_offsets[depth] + rank

    def rank_of(self, x: int) -> tuple[int, int]:
        d = self.depth_of(x)
        return d, x - self.level_offsets[d]

    def address(self, x: int) -> tuple[int, ...]:
        d, rank = self.rank_of(x)
        digits = []
        for q in reversed(self.degrees[:d]):
            rank, digit = divmod(rank, q)
            digits.append(digit)
        return tuple(reversed(digits))

    def node_at(self, address: Sequence[int]) -> int:
        rank = 0
        for d, digit in enumerate(address):
            if d >= self.D or not 0 <= digit < self.degrees[d]:
                raise TreeError(f"address {tuple(address)} leaves the tree")
            rank = rank * self.degrees[d] + digit
        return self.node_id(len(address), rank)

    def sphere_count(self, depth: int, k: int) -> int:
        """``#S_k(x)`` for any node at the given depth."""
        if k < 0 or depth + k > self.D:
            raise TreeError("sphere radius overflows the truncation depth")
        out = 1
        for q in self.degrees[depth:depth + k]:
            out *= q
        return out

    def sphere_count_range(self, k: int) -> tuple[int, int]:
        """Min and max of ``#S_k(x)`` over all anchors."""
        vals = [self.sphere_count(d, k) for d in range(self.D - k + 1)]
        return min(vals), max(vals)

    def max_degree(self) -> int:
        return max(self.degrees)

    def to_arena(self, limit: int = ARENA_NODE_LIMIT) -> RootedTree:
        if self.node_count > limit:
            raise TreeSizeError(
                f"{self.node_count} nodes exceed the arena limit {limit}"
            )
        parents = [-1]
        prev_ids = [0]
        next_id = 1
        for d in range(self.D):
            q = self.degrees[d]
            new_ids = []
            for p in prev_ids:
                for _ in range(q):
                    parents.append(p)
                    new_ids.append(next_id)
                    next_id += 1
            prev_ids = new_ids
        return RootedTree(parents, self.D)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UniformTree):
            return NotImplemented
        return self.degrees == other.degrees

    def __repr__(self) -> str:
        return f"UniformTree(D={self.D}, degrees={list(self.degrees)})"


# -- generators -------------------------------------------------------------


@dataclass(frozen=True)
class Homogeneous:
    q: int

    def __post_init__(self):
        if self.q < 2:
            raise TreeError("homogeneous trees need q >= 2")

    def describe(self) -> str:
        return f"homogeneous({self.q})"


@dataclass(frozen=True)
class Periodic:
    cycle: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "cycle", tuple(int(c) for c in self.cycle))
        if not self.cycle or any(c < 1 for c in self.cycle):
            raise TreeError("periodic degree cycle must be positive")

    def describe(self) -> str:
        return f"periodic({','.join(map(str, self.cycle))})"


@dataclass(frozen=True)
class SeededRandom:
    d_min: int
    d_max: int
    seed: int

    def __post_init__(self):
        if self.d_min < 1:
            raise TreeError("d_min must be >= 1")
        if self.d_max < self.d_min:
            raise TreeError("d_max must be >= d_min")

    def describe(self) -> str:
        return f"random({self.d_min},{self.d_max},seed={self.seed})"


@dataclass(frozen=True)
class Explicit:
    path: str

    def describe(self) -> str:
        return f"explicit({self.path})"


TreeSpec = Homogeneous | Periodic | SeededRandom | Explicit


def parse_tree_spec(text: str) -> TreeSpec:
    """Parse generator specs like ``homogeneous(2)`` or ``random(2,4,7)``."""
    t = text.strip().replace(" ", "")
    if t.startswith("homogeneous(") and t.endswith(")"):
        return Homogeneous(int(t[12:-1]))
    if t.startswith("periodic(") and t.endswith(")"):
        return Periodic(tuple(int(c) for c in t[9:-1].split(",")))
    if t.startswith("random(") and t.endswith(")"):
        parts = t[7:-1].split(",")
        if len(parts) != 3:
            raise TreeError("random spec needs (d_min,d_max,seed)")
        return SeededRandom(int(parts[0]), int(parts[1]), int(parts[2]))
    if t.startswith("explicit(") and t.endswith(")"):
        return Explicit(text.strip()[9:-1])
    raise TreeError(f"unrecognised tree spec: {text!r}")


def _random_degree(seed: int, address: tuple[int, ...], d_min: int, d_max: int) -> int:
    # Splittable stream keyed by the node address: reproducible regardless
    # of traversal order, and stable across platforms.
    payload = seed.to_bytes(8, "little", signed=True) + b"/".join(
        str(a).encode() for a in address
    )
    h = hashlib.blake2b(payload, digest_size=8).digest()
    return d_min + int.from_bytes(h, "little") % (d_max - d_min + 1)


def build_uniform_tree(spec: TreeSpec, D: int) -> UniformTree:
    """Compact tree for by-level specs (homogeneous / periodic)."""
    if D < 1:
        raise TreeError("D must be >= 1")
    if isinstance(spec, Homogeneous):
        return UniformTree([spec.q] * D)
    if isinstance(spec, Periodic):
        cyc = spec.cycle
        return UniformTree([cyc[d % len(cyc)] for d in range(D)])
    raise TreeError(f"{spec.describe()} is not a by-level uniform spec")


def build_tree(spec: TreeSpec, D: int, *, limit: int = ARENA_NODE_LIMIT) -> RootedTree:
    """Materialise a tree as an explicit arena; deterministic in (spec, D)."""
    if D < 1:
        raise TreeError("D must be >= 1")
    if isinstance(spec, (Homogeneous, Periodic)):
        return build_uniform_tree(spec, D).to_arena(limit)
    if isinstance(spec, Explicit):
        return read_tree_file(spec.path)
    if isinstance(spec, SeededRandom):
        parents = [-1]
        frontier: list[tuple[int, tuple[int, ...]]] = [(0, ())]
        for depth in range(D):
            nxt: list[tuple[int, tuple[int, ...]]] = []
            for node, addr in frontier:
                deg = _random_degree(spec.seed, addr, spec.d_min, spec.d_max)
                for j in range(deg):
                    parents.append(node)
                    nxt.append((len(parents) - 1, addr + (j,)))
                if len(parents) > limit:
                    raise TreeSizeError("random tree exceeds the arena limit")
            frontier = nxt
        return RootedTree(parents, D)
    raise TreeError(f"unsupported spec {spec!r}")


def resolve_tree(spec: TreeSpec, D: int) -> RootedTree | UniformTree:
    """Pick the representation: compact for by-level specs, arena otherwise."""
    if isinstance(spec, (Homogeneous, Periodic)):
        return build_uniform_tree(spec, D)
    return build_tree(spec, D)


# -- boundary geometry --------------------------------------------------------


def confluence(t: RootedTree, u: int, v: int) -> int:
    """Deepest node lying on both root paths (the confluent ``u ^ v``)."""
    if not (0 <= u < t.n and 0 <= v < t.n):
        raise TreeError("invalid node id")
    while t.depth[u] > t.depth[v]:
        u = int(t.parent[u])
    while t.depth[v] > t.depth[u]:
        v = int(t.parent[v])
    while u != v:
        u = int(t.parent[u])
        v = int(t.parent[v])
    return u


def boundary_distance(t: RootedTree, u: int, v: int) -> PowerSum:
    """Visual-metric distance ``2**-|u^v|`` between two boundary cylinders.

    Both nodes must be depth-``D`` leaves.  Coinciding leaves are at
    distance 0, keeping the metric axioms literal on the discretisation.
    """
    if t.depth[u] != t.D or t.depth[v] != t.D:
        raise TreeError("boundary points must be depth-D nodes")
    if u == v:
        return PowerSum.zero()
    return PowerSum.pow2(-int(t.depth[confluence(t, u, v)]))


def sphere(t: RootedTree, x: int, k: int) -> np.ndarray:
    return t.sphere(x, k)


def sphere_count(t: RootedTree, x: int, k: int) -> int:
    return len(t.sphere(x, k))


def pairwise_confluent_depths(t: RootedTree, leaves: np.ndarray) -> np.ndarray:
    """Matrix of ``|u ^ v|`` over the given depth-D leaves (vectorised)."""
    addr = t.leaf_addresses()
    index_of = {int(l): i for i, l in enumerate(t.leaves())}
    rows = np.array([index_of[int(l)] for l in leaves])
    sub = addr[rows]
    eq = sub[:, None, :] == sub[None, :, :]
    # Common prefix length = index of the first mismatching digit.
    return np.where(eq.all(axis=2), t.D, eq.argmin(axis=2)).astype(np.int64)


# -- file format --------------------------------------------------------------


def atomic_write(path, text: str) -> None:
    """Write a text file atomically (tmp file + rename)."""
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_tree_file(t: RootedTree) -> str:
    lines = [f"tree v1 D={t.D}"]
    for i in range(t.n):
        p = int(t.parent[i])
        lines.append(f"{i} {'-' if p < 0 else p}")
    return "\n".join(lines) + "\n"


def write_tree_file(t: RootedTree, path) -> None:
    atomic_write(path, format_tree_file(t))


def read_tree_file(path) -> RootedTree:
    with open(path, "r", encoding="ascii") as fh:
        text = fh.read()
    return parse_tree_file(text)


def parse_tree_file(text: str) -> RootedTree:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("tree v1 D="):
        raise TreeError("bad tree file header (want 'tree v1 D=<int>')")
    try:
        D = int(lines[0].split("D=", 1)[1])
    except ValueError as exc:
        raise TreeError("bad depth in tree header") from exc
    parents: list[int] = []
    for i, ln in enumerate(lines[1:]):
        parts = ln.split()
        if len(parts) != 2:
            raise TreeError(f"bad node line: {ln!r}")
        if int(parts[0]) != i:
            raise TreeError(f"node ids must be sequential, got {parts[0]} at line {i}")
        parents.append(-1 if parts[1] == "-" else int(parts[1]))
    return RootedTree(parents, D)


def write_leaf_file(node_ids: Iterable[int], path) -> None:
    body = "leaves v1\n" + "".join(f"{int(i)}\n" for i in node_ids)
    atomic_write(path, body)


def read_leaf_file(path) -> list[int]:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines or lines[0] != "leaves v1":
        raise TreeError("bad leaf file header")
    return [int(ln) for ln in lines[1:]]
