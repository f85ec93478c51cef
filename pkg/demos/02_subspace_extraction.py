#!/usr/bin/env python3
"""Carving an alpha-regular subspace out of a Q-regular tree boundary.

Walks through the pipeline on the 4-homogeneous tree (Q = 2, target
alpha = 1): digit schedule, block grading, periodic selection, thinning,
and the certified result, then shows the drift check at a deeper
truncation.
"""

from fractions import Fraction

from ahlfors import (
    Exponent,
    Homogeneous,
    bilipschitz_audit,
    binary_model_subtree,
    build_uniform_tree,
    counting_bounds,
    digit_schedule,
    extract_regular_subspace,
    homogenize,
)

print("=" * 72)
print("Digit schedules: 0/1 sequences with exactly bounded deviation")
print("=" * 72)
for ratio in (Fraction(1, 2), Fraction(2, 3), Fraction(3, 5)):
    sched = digit_schedule(ratio)
    print(f"ratio {ratio}: digits {sched.digits(12)} (period {sched.period})")

print()
print("=" * 72)
print("The binary model: prune by the digits, get an alpha-regular boundary")
print("=" * 72)
alpha = Fraction(1, 2)
model = binary_model_subtree(build_uniform_tree(Homogeneous(2), 16), alpha)
report = counting_bounds(model.to_arena(), Exponent(alpha))
print(f"alpha = {alpha}: constants [{float(report.lower):.4g}, "
      f"{float(report.upper):.4g}] -> {report.status}")

print()
print("=" * 72)
print("Block grading distorts boundary distances by at most 2^k")
print("=" * 72)
graded = homogenize(build_uniform_tree(Homogeneous(2), 12), 3)
audit = bilipschitz_audit(graded)
print(f"k = 3: measured distortion {audit.constant:g} over "
      f"{audit.pairs_checked} {'exhaustive' if audit.exhaustive else 'sampled'} pairs")

print()
print("=" * 72)
print("End to end on the 4-homogeneous tree: Q = 2, alpha = 1")
print("=" * 72)
for depth in (12, 16):
    result = extract_regular_subspace(
        build_uniform_tree(Homogeneous(4), depth), Exponent.parse("2"), Fraction(1)
    )
    r = result.report
    print(f"D = {depth}: plan k={result.plan.k} M={result.plan.M} "
          f"ratio={result.plan.ratio}; thinned tree {result.thinned.node_count} nodes; "
          f"constants [{float(r.lower):.4g}, {float(r.upper):.4g}] ({r.status}); "
          f"|Y| = {len(result.subspace_ids)}")
print("identical constants at both depths = the certification is drift-free")

print()
print("The pulled-back subset certifies directly by ball counting:")
sub = result.subspace_report
print(f"  mu(B)/r^alpha in [{float(sub.lower):.4g}, {float(sub.upper):.4g}] "
      f"-> {sub.status}")
print()
print("Each note the pipeline recorded:")
for note in result.notes:
    print(f"  - {note}")
