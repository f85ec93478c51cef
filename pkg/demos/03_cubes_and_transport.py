#!/usr/bin/env python3
"""From point sets to trees and back: cubes, projection, transport.

Decomposes a uniform grid into nested dyadic-style cubes, audits the cube
properties exactly, reads the grid's dimension off the cube tree, extracts
a one-dimensional boundary subset, and projects it back onto the grid,
measuring the regularity of the image.
"""

from fractions import Fraction

from ahlfors import (
    Exponent,
    christ_decompose,
    empirical_regularity,
    estimate_dimension,
    extract_regular_subspace,
    grid_space,
    hierarchy_tree,
    lambda_project,
    regular_map_audit,
    snowflake_distance,
    PowerSum,
)

DELTA = Fraction(1, 8)

print("=" * 72)
print("Cube hierarchy over the 64x64 grid (sup norm, delta = 1/8)")
print("=" * 72)
grid = grid_space(64)
hierarchy = christ_decompose(grid, DELTA, Fraction(1, 8))
print("cubes per level:", [hierarchy.level_size(k) for k in range(hierarchy.k_max + 1)])
audit = hierarchy.audit()
print(f"coverage / nesting / unique parents: {audit.coverage_exact} / "
      f"{audit.nesting_exact} / {audit.unique_parent}")
print(f"diameter constant c1 = {audit.c1_measured:g} "
      f"(limit 2/(1-delta) = {2 / (1 - float(DELTA)):g})")
print(f"inner balls stay inside their cubes: {audit.inner_ball_ok}")

print()
print("The cube tree and the snowflake bookkeeping:")
tree, projection = hierarchy_tree(hierarchy)
base = estimate_dimension(tree)
snow = estimate_dimension(tree, scale_exponent=3)  # delta = 2^-3
print(f"  base-1/2 tree dimension estimate: {float(base.slope):g}")
print(f"  delta-weighted estimate:          {float(snow.slope):g}")
print(f"  factor log2(1/delta) = 3 relates them exactly: "
      f"{base.slope == 3 * snow.slope}")
print(f"  a distance 2^-4 reparametrises to {snowflake_distance(PowerSum.pow2(-4), DELTA)}")

print()
print("Cover constants of the boundary-to-grid projection:")
maps = regular_map_audit(hierarchy)
print(f"  cubes meeting a ball, per level: {maps.cover_counts} (c3 = {maps.c3})")
print(f"  image overlap c4 = {maps.c4}; preimage covers within c3*c4: "
      f"{maps.composition_ok()}")

print()
print("=" * 72)
print("Transport: a 1-dimensional subset of the 2-dimensional grid")
print("=" * 72)
# Geometric exponents scale by log2(1/delta) = 3 on the base-1/2 tree:
# the grid is 2-regular <-> the tree is 6-regular, and a geometric
# alpha = 1 subset corresponds to a tree exponent of 3.
result = extract_regular_subspace(tree, Exponent.parse("6"), Fraction(3),
                                  tree_label="grid64-cube-tree")
image, fibers = lambda_project(projection, result.subspace_ids)
print(f"extracted {len(result.subspace_ids)} boundary cylinders "
      f"-> {len(image)} grid points (max fiber {max(fibers.values())})")
report = empirical_regularity(grid, Fraction(1), subset=image, label="image")
print(f"counting-measure regularity of the image at alpha = 1: "
      f"[{float(report.lower):.4g}, {float(report.upper):.4g}] "
      f"(ratio {report.ratio_float():.4g})")
for note in report.notes:
    print(f"  {note}")
