"""Command-line front end for the tree-boundary regularity pipeline.

Exit codes: 0 = pass, 2 = certification fail, 3 = inconclusive (drift
detected), 64 = usage error.  Every report file records the full run
configuration; identical configurations reproduce identical bytes.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

from .construct import (
    ConstructionError,
    DigitSchedule,
    bilipschitz_audit,
    extract_regular_subspace,
    homogenize,
    thin_periodic,
)
from .dyadic import (
    FiniteMetricSpace,
    MetricSpaceError,
    christ_decompose,
    empirical_regularity,
    grid_space,
    hierarchy_tree,
    lambda_project,
    read_points_file,
    write_hierarchy_file,
    write_points_file,
)
from .exact import Exponent
from .regularity import (
    DEFAULT_THRESHOLD,
    RegularityReport,
    counting_bounds,
    read_report_file,
    stopping_bounds,
    write_report_file,
)
from .trees import (
    TreeError,
    build_tree,
    parse_tree_spec,
    read_leaf_file,
    read_tree_file,
    resolve_tree,
    write_leaf_file,
    write_tree_file,
)

__all__ = ["main", "console_main"]

EXIT_PASS = 0
EXIT_FAIL = 2
EXIT_INCONCLUSIVE = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        raise UsageError(message)


def _status_code(status: str) -> int:
    return {"pass": EXIT_PASS, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}[
        status
    ]


def _load_tree(args, *, compact_ok: bool = True):
    """Tree from --spec (generated) or --tree (file).  Returns (tree, label,
    spec-or-None); compact representations are used for by-level specs."""
    if getattr(args, "spec", None) and getattr(args, "tree", None):
        raise UsageError("give exactly one of --spec or --tree")
    if getattr(args, "spec", None):
        if args.depth is None:
            raise UsageError("--spec needs --depth")
        spec = parse_tree_spec(args.spec)
        tree = resolve_tree(spec, args.depth) if compact_ok else build_tree(spec, args.depth)
        return tree, spec.describe(), spec
    if getattr(args, "tree", None):
        tree = read_tree_file(args.tree)
        return tree, os.path.basename(args.tree), None
    raise UsageError("one of --spec or --tree is required")


def _attach_config(report: RegularityReport, args, keys: list[str]) -> None:
    for key in keys:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            report.config[key] = str(value)


def _emit_reports(reports, path) -> None:
    if path:
        write_report_file(reports, path)
    else:
        sys.stdout.write("".join(r.serialize() for r in reports))


# -- commands ------------------------------------------------------------------


def cmd_gen_tree(args) -> int:
    spec = parse_tree_spec(args.spec)
    tree = build_tree(spec, args.depth)
    write_tree_file(tree, args.out)
    print(f"wrote {tree.node_count} nodes to {args.out}")
    return EXIT_PASS


def cmd_verify(args) -> int:
    tree, label, spec = _load_tree(args)
    Q = Exponent.parse(args.Q)
    threshold = Fraction(args.max_ratio)
    k_max = args.k_max if args.k_max is not None else tree.D
    if k_max > tree.D:
        raise UsageError(f"--k-max {k_max} exceeds the truncation depth {tree.D}")
    cap = args.stopping_cap if args.stopping_cap is not None else min(tree.D, 6)
    counting = counting_bounds(tree, Q, k_max, threshold=threshold, tree_label=label)
    stopping = stopping_bounds(tree, Q, cap, threshold=threshold, tree_label=label)
    drift = "unchecked"
    if spec is not None and args.drift_step > 0:
        deeper = resolve_tree(spec, tree.D + args.drift_step)
        # Without an explicit scale cap, each run certifies its full depth;
        # a genuinely regular exponent must not care.
        k2 = args.k_max if args.k_max is not None else deeper.D
        cap2 = args.stopping_cap if args.stopping_cap is not None else min(deeper.D, 6)
        c2 = counting_bounds(deeper, Q, k2, threshold=threshold, tree_label=label)
        s2 = stopping_bounds(deeper, Q, cap2, threshold=threshold, tree_label=label)
        stable = (
            c2.lower == counting.lower
            and c2.upper == counting.upper
            and s2.lower == stopping.lower
            and s2.upper == stopping.upper
        )
        drift = "stable" if stable else "detected"
    counting.drift = drift
    stopping.drift = drift
    for rep in (counting, stopping):
        _attach_config(rep, args, ["spec", "tree", "Q", "depth", "k_max",
                                   "stopping_cap", "max_ratio", "drift_step"])
    _emit_reports([counting, stopping], args.report)
    worst = max(
        _status_code(counting.status), _status_code(stopping.status),
        key=lambda c: (c == EXIT_FAIL, c == EXIT_INCONCLUSIVE),
    )
    return worst


def cmd_extract(args) -> int:
    tree, label, _ = _load_tree(args)
    Q = Exponent.parse(args.Q)
    alpha = Fraction(args.alpha)
    result = extract_regular_subspace(
        tree,
        Q,
        alpha,
        k_search_max=args.k_search_max,
        threshold=Fraction(args.max_ratio),
        tree_label=label,
    )
    if args.out_tree:
        write_tree_file(result.thinned, args.out_tree)
    if args.out_leaves:
        write_leaf_file(result.subspace_ids, args.out_leaves)
    for rep in (result.report, result.subspace_report):
        rep.notes.extend(result.notes)
        _attach_config(rep, args, ["spec", "tree", "Q", "alpha", "depth",
                                   "k_search_max", "max_ratio", "seed"])
    _emit_reports([result.report, result.subspace_report], args.report)
    return _status_code(result.report.status)


def cmd_homogenize(args) -> int:
    tree, label, _ = _load_tree(args)
    graded = homogenize(tree, args.k)
    full = graded.full_arena()
    if args.out_tree:
        write_tree_file(full, args.out_tree)
    counts_src = [
        tree.level_counts[n * args.k]
        if hasattr(tree, "level_counts")
        else len(tree.nodes_at_depth(n * args.k))
        for n in range(graded.levels + 1)
    ]
    counts_out = [len(full.nodes_at_depth(n * args.k)) for n in range(graded.levels + 1)]
    print(f"blocks of {args.k}: {graded.levels} levels, depth {graded.depth_used}")
    print(f"source block-level counts: {counts_src}")
    print(f"graded block-level counts: {counts_out}")
    if counts_src != counts_out:
        print("BLOCK-LEVEL COUNTS CHANGED (invariant violation)")
        return EXIT_FAIL
    for note in graded.notes:
        print(f"note: {note}")
    return EXIT_PASS


def cmd_thin(args) -> int:
    tree, label, _ = _load_tree(args)
    ratio = Fraction(args.ratio)
    sched = DigitSchedule(ratio)  # ratio 1 keeps everything (degenerate)
    graded = homogenize(tree, args.k)
    thin = thin_periodic(graded, sched)
    full = thin.full_arena()
    if args.out_tree:
        write_tree_file(full, args.out_tree)
    if args.out_leaves:
        write_leaf_file(thin.source_leaf_ids(), args.out_leaves)
    print(
        f"thinned {label} at blocks of {args.k} with ratio {ratio}: "
        f"{full.node_count} nodes, {len(full.leaves())} leaves"
    )
    for note in thin.notes:
        print(f"note: {note}")
    return EXIT_PASS


def cmd_audit_f(args) -> int:
    tree, label, _ = _load_tree(args)
    graded = homogenize(tree, args.k)
    audit = bilipschitz_audit(graded, sample_pairs=args.samples, seed=args.seed)
    mode = "exhaustive" if audit.exhaustive else f"sampled({audit.pairs_checked})"
    print(
        f"bi-Lipschitz audit k={args.k}: measured constant {audit.constant} "
        f"= 2^{audit.max_log2_ratio} over {mode} leaf pairs"
    )
    bound = 2 ** args.k
    print(f"bound 2^k = {bound}: {'ok' if audit.constant <= bound else 'EXCEEDED'}")
    return EXIT_PASS if audit.constant <= bound else EXIT_FAIL


def _load_space(args) -> FiniteMetricSpace:
    if getattr(args, "points", None) and getattr(args, "grid", None):
        raise UsageError("give exactly one of --points or --grid")
    if getattr(args, "points", None):
        return read_points_file(args.points)
    if getattr(args, "grid", None):
        return grid_space(args.grid, norm=args.norm)
    raise UsageError("one of --points or --grid is required")


def cmd_dyadize(args) -> int:
    space = _load_space(args)
    hierarchy = christ_decompose(space, Fraction(args.delta), Fraction(args.c2),
                                 k_max=args.k_max)
    if args.out:
        write_hierarchy_file(hierarchy, args.out)
    if args.out_tree:
        cube_tree, _ = hierarchy_tree(hierarchy)
        write_tree_file(cube_tree, args.out_tree)
    audit = hierarchy.audit()
    c1_limit = 2 / (1 - float(Fraction(args.delta)))
    print(f"levels: {[hierarchy.level_size(k) for k in range(hierarchy.k_max + 1)]}")
    print(f"coverage={audit.coverage_exact} nesting={audit.nesting_exact} "
          f"unique_parent={audit.unique_parent} root_single={audit.root_is_single}")
    print(f"c1 measured {audit.c1_measured:.6g} (limit {c1_limit:.6g}); "
          f"inner-ball violations {audit.inner_ball_violations}")
    return EXIT_PASS if audit.all_ok(c1_limit=c1_limit) else EXIT_FAIL


def cmd_project(args) -> int:
    space = _load_space(args)
    hierarchy = christ_decompose(space, Fraction(args.delta), Fraction(args.c2),
                                 k_max=args.k_max)
    tree, pm = hierarchy_tree(hierarchy)
    if args.leaves:
        leaves = read_leaf_file(args.leaves)
    else:
        leaves = [int(x) for x in tree.leaves()]
    image, fibers = lambda_project(pm, leaves)
    print(f"projected {len(leaves)} leaves onto {len(image)} points "
          f"(max fiber {max(fibers.values())})")
    if args.out:
        coords = space.coords
        if coords is None:
            raise UsageError("--out needs a coordinate-based point set")
        subset = FiniteMetricSpace.from_points(coords[image], norm=space.norm)
        write_points_file(subset, args.out)
    if args.alpha is not None:
        report = empirical_regularity(
            space,
            Fraction(args.alpha),
            subset=image,
            sample_centers=args.samples,
            seed=args.seed,
            label="projected image",
        )
        _attach_config(report, args, ["points", "grid", "delta", "c2", "k_max",
                                      "alpha", "samples", "seed"])
        _emit_reports([report], args.report)
        return _status_code(report.status)
    return EXIT_PASS


def cmd_report(args) -> int:
    docs = read_report_file(args.file)
    worst = EXIT_PASS
    for doc in docs:
        keys = doc["keys"]
        status = keys.get("status", "pass")
        print(
            f"{keys.get('kind', '?'):9s} {status:12s} tree={keys.get('tree', '?')} "
            f"Q={keys.get('Q', '?')} lower={keys.get('lower_decimal', '?')} "
            f"upper={keys.get('upper_decimal', '?')}"
        )
        code = _status_code(status)
        if code == EXIT_FAIL or (code == EXIT_INCONCLUSIVE and worst == EXIT_PASS):
            worst = code
    return worst


# -- parser ---------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="ahlfors", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_tree_source(p):
        p.add_argument("--spec", help="tree generator, e.g. homogeneous(2)")
        p.add_argument("--tree", help="tree file (tree v1 format)")
        p.add_argument("--depth", type=int, help="truncation depth for --spec")

    p = sub.add_parser("gen-tree", help="generate a tree file")
    p.add_argument("--spec", required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_tree)

    p = sub.add_parser("verify", help="certify regularity at an exponent")
    add_tree_source(p)
    p.add_argument("--Q", required=True, help='exponent: "p/q" or "log2(p/q)"')
    p.add_argument("--k-max", type=int)
    p.add_argument("--stopping-cap", type=int)
    p.add_argument("--max-ratio", default=str(DEFAULT_THRESHOLD))
    p.add_argument("--drift-step", type=int, default=4)
    p.add_argument("--report")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("extract", help="extract a lower-dimensional subspace")
    add_tree_source(p)
    p.add_argument("--Q", required=True)
    p.add_argument("--alpha", required=True)
    p.add_argument("--k-search-max", type=int, default=8)
    p.add_argument("--max-ratio", default=str(DEFAULT_THRESHOLD))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-tree")
    p.add_argument("--out-leaves")
    p.add_argument("--report")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("homogenize", help="regroup a tree into k-blocks")
    add_tree_source(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out-tree")
    p.set_defaults(func=cmd_homogenize)

    p = sub.add_parser("thin", help="thin a periodic tree by a digit schedule")
    add_tree_source(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--ratio", required=True, help="schedule ratio in (0, 1]")
    p.add_argument("--out-tree")
    p.add_argument("--out-leaves")
    p.set_defaults(func=cmd_thin)

    p = sub.add_parser("audit-f", help="measure the block-grading distortion")
    add_tree_source(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_audit_f)

    def add_space_source(p):
        p.add_argument("--points", help="points/matrix file")
        p.add_argument("--grid", type=int, help="side of a uniform unit-square grid")
        p.add_argument("--norm", default="sup", choices=("sup", "euclid"))

    p = sub.add_parser("dyadize", help="build and audit a cube hierarchy")
    add_space_source(p)
    p.add_argument("--delta", required=True)
    p.add_argument("--c2", required=True)
    p.add_argument("--k-max", type=int)
    p.add_argument("--out")
    p.add_argument("--out-tree", help="also write the cube tree (tree v1)")
    p.set_defaults(func=cmd_dyadize)

    p = sub.add_parser("project", help="project tree leaves to points")
    add_space_source(p)
    p.add_argument("--delta", required=True)
    p.add_argument("--c2", required=True)
    p.add_argument("--k-max", type=int)
    p.add_argument("--leaves", help="leaf file (leaves v1) from extract")
    p.add_argument("--alpha", help="also measure image regularity at alpha")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write image coordinates as a points file")
    p.add_argument("--report")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("report", help="summarise a report file")
    p.add_argument("file")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    threads = os.environ.get("AHLFORS_THREADS")
    if threads is not None:
        try:
            if int(threads) < 1:
                raise ValueError
        except ValueError:
            print(f"ahlfors: bad AHLFORS_THREADS={threads!r}", file=sys.stderr)
            return EXIT_USAGE
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"ahlfors: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TreeError, ConstructionError, MetricSpaceError, ValueError) as exc:
        print(f"ahlfors: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ahlfors: i/o error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
