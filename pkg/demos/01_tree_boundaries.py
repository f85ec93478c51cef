#!/usr/bin/env python3
"""Tree boundaries and certified regularity.

Builds a few finite rooted trees, looks at the visual ultrametric on their
boundary, and certifies Ahlfors regularity through both characterizations:
sphere counting and extremal stopping sums.  All certified constants are
exact; floats appear only in the printout.
"""

from ahlfors import (
    Exponent,
    Homogeneous,
    SeededRandom,
    boundary_distance,
    build_tree,
    build_uniform_tree,
    counting_bounds,
    estimate_dimension,
    extremal_stopping_sums,
    hausdorff_content_bracket,
    stopping_bounds,
)

print("=" * 72)
print("A homogeneous binary tree, truncated at depth 6")
print("=" * 72)
tree = build_tree(Homogeneous(2), 6)
print(f"nodes: {tree.node_count}, leaves: {len(tree.leaves())}")

leaves = tree.leaves()
u, v, w = int(leaves[0]), int(leaves[1]), int(leaves[-1])
print(f"d(leaf0, leaf1)  = {float(boundary_distance(tree, u, v))}")
print(f"d(leaf0, last)   = {float(boundary_distance(tree, u, w))}")
print("the ultrametric inequality d(u,w) <= max(d(u,v), d(v,w)) holds:",
      float(boundary_distance(tree, u, w))
      <= max(float(boundary_distance(tree, u, v)),
             float(boundary_distance(tree, v, w))))

print()
print("Counting certification at the true exponent Q = 1:")
report = counting_bounds(tree, Exponent.parse("1"))
print(f"  b0 = {report.lower.exact_str()}, b1 = {report.upper.exact_str()}"
      f"  ->  {report.status}")

print("Counting certification at a wrong exponent Q = 2:")
report = counting_bounds(build_uniform_tree(Homogeneous(2), 14), Exponent.parse("2"))
print(f"  b0 = {float(report.lower):.3g}, b1 = {float(report.upper):.3g}"
      f"  ->  {report.status} (ratio {report.ratio_float():.3g})")

print()
print("=" * 72)
print("The 3-homogeneous tree is log2(3)-regular, exactly")
print("=" * 72)
tree3 = build_uniform_tree(Homogeneous(3), 14)
Q3 = Exponent.parse("log2(3)")
counting = counting_bounds(tree3, Q3)
stopping = stopping_bounds(tree3, Q3, 14)
print(f"counting  constants: [{counting.lower.exact_str()}, {counting.upper.exact_str()}]")
print(f"stopping  constants: [{stopping.lower.exact_str()}, {stopping.upper.exact_str()}]")
print("(weights 2^(-log2(3) n) = 3^-n are exact rationals, so '1' means 1)")

print()
print("Stopping sums diverge at a non-regular exponent (Q = 1/2 on binary):")
half = stopping_bounds(build_tree(Homogeneous(2), 8), Exponent.parse("1/2"), 8)
print(f"  upper constant grows to {float(half.upper):.4g}; notes: {half.notes}")

print()
print("=" * 72)
print("A seeded random tree: exact extremal covers and content brackets")
print("=" * 72)
rnd = build_tree(SeededRandom(2, 3, seed=1), 6)
print(f"nodes: {rnd.node_count}")
Q1 = Exponent.parse("1")
lo, hi = extremal_stopping_sums(rnd, 0, Q1, 4)
print(f"extremal stopping sums below the root (cap 4): "
      f"[{lo.exact_str()}, {hi.exact_str()}]")
blo, bhi = hausdorff_content_bracket(rnd, 0, Q1)
print(f"Hausdorff content bracket of the whole boundary: "
      f"[{float(blo):.6g}, {float(bhi):.6g}]")
est = estimate_dimension(rnd)
print(f"dimension estimate: {float(est.slope):.4g} "
      f"(max residual {float(est.residual):.3g})")
