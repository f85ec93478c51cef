from fractions import Fraction

import numpy as np
import pytest

from ahlfors.dyadic import (
    FiniteMetricSpace,
    MetricSpaceError,
    christ_decompose,
    empirical_regularity,
    format_hierarchy_file,
    format_points_file,
    grid_space,
    hierarchy_tree,
    lambda_project,
    parse_hierarchy_file,
    parse_points_file,
    regular_map_audit,
    snowflake_distance,
)
from ahlfors.exact import PowerSum
from ahlfors.regularity import estimate_dimension
from ahlfors.trees import pairwise_confluent_depths

DELTA = Fraction(1, 8)
C2 = Fraction(1, 8)


@pytest.fixture(scope="module")
def grid32():
    return grid_space(32)


@pytest.fixture(scope="module")
def hierarchy32(grid32):
    return christ_decompose(grid32, DELTA, C2)


# -- metric spaces -----------------------------------------------------------------


def test_space_validation():
    with pytest.raises(MetricSpaceError):
        FiniteMetricSpace.from_points(np.zeros((0, 2)))
    with pytest.raises(MetricSpaceError):
        FiniteMetricSpace.from_points(np.zeros((3, 2)), norm="manhattan")
    with pytest.raises(MetricSpaceError):
        FiniteMetricSpace.from_matrix(np.asarray([[0.0, 1.0], [2.0, 0.0]]))
    m = FiniteMetricSpace.from_matrix(np.asarray([[0, 2.0], [2.0, 0]]))
    assert m.dist(0, 1) == 1.0  # normalised diameter


def test_metric_audit_catches_triangle_violation():
    bad = np.asarray([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float)
    space = FiniteMetricSpace.from_matrix(bad)
    with pytest.raises(MetricSpaceError):
        space.audit_metric(samples=500, seed=0)


def test_grid_space_layout(grid32):
    assert grid32.n == 1024
    assert grid32.diameter == 1.0
    assert grid32.dist(0, 1) == pytest.approx(1 / 31)
    assert grid32.min_separation() == pytest.approx(1 / 31)


# -- decomposition -------------------------------------------------------------------


def test_parameter_constraint_enforced(grid32):
    with pytest.raises(MetricSpaceError):
        christ_decompose(grid32, Fraction(1, 4), Fraction(1, 16))


def test_duplicate_points_rejected():
    pts = np.asarray([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]])
    with pytest.raises(MetricSpaceError):
        christ_decompose(FiniteMetricSpace.from_points(pts), DELTA, C2)


def test_matrix_backed_space_decomposes():
    # An ultrametric-looking 4-point matrix, given explicitly.
    m = np.asarray([
        [0.0, 0.1, 1.0, 1.0],
        [0.1, 0.0, 1.0, 1.0],
        [1.0, 1.0, 0.0, 0.1],
        [1.0, 1.0, 0.1, 0.0],
    ])
    space = FiniteMetricSpace.from_matrix(m)
    h = christ_decompose(space, Fraction(1, 8), Fraction(1, 8))
    assert h.audit().all_ok()
    assert h.level_size(0) == 1
    assert h.level_size(1) == 2  # the two far clusters
    tree, pm = hierarchy_tree(h)
    image, _ = lambda_project(pm, [int(x) for x in tree.leaves()])
    assert image == [0, 1, 2, 3]


def test_single_point_space():
    space = FiniteMetricSpace.from_points(np.asarray([[0.25, 0.75]]))
    h = christ_decompose(space, DELTA, C2, k_max=3)
    assert [h.level_size(k) for k in range(4)] == [1, 1, 1, 1]
    assert h.audit().all_ok()
    tree, pm = hierarchy_tree(h)
    assert tree.node_count == 4  # a path
    assert pm.leaf_point(int(tree.leaves()[0])) == 0


def test_grid_hierarchy_properties(hierarchy32):
    h = hierarchy32
    assert h.k_max == 2  # the next level would contain singleton cubes
    assert [h.level_size(k) for k in range(3)] == [1, 64, 1024]
    audit = h.audit()
    assert audit.coverage_exact
    assert audit.nesting_exact
    assert audit.unique_parent
    assert audit.root_is_single
    assert audit.inner_ball_ok
    assert audit.c1_measured <= 2 / (1 - float(DELTA))
    # level-1 cubes are exact 4x4 tiles of the index lattice
    sizes = np.bincount(h.membership[1], minlength=64)
    assert sizes.min() == sizes.max() == 16


def test_nets_are_nested(hierarchy32):
    h = hierarchy32
    for k in range(h.k_max):
        assert set(h.centers[k].tolist()) <= set(h.centers[k + 1].tolist())


def test_decomposition_is_deterministic(grid32):
    a = christ_decompose(grid32, DELTA, C2)
    b = christ_decompose(grid32, DELTA, C2)
    assert format_hierarchy_file(a) == format_hierarchy_file(b)


# -- cube tree and projection -----------------------------------------------------------


def test_hierarchy_tree_matches_cubes(hierarchy32):
    h = hierarchy32
    tree, pm = hierarchy_tree(h)
    assert tree.D == h.k_max
    for k in range(h.k_max + 1):
        assert len(tree.nodes_at_depth(k)) == h.level_size(k)
    # ancestry respects cube parenthood
    for k in range(1, h.k_max + 1):
        for a in (0, h.level_size(k) // 2, h.level_size(k) - 1):
            node = pm.node_of_cube(k, a)
            assert pm.cube_of_node(node) == (k, a)
            pk, pa = pm.cube_of_node(int(tree.parent[node]))
            assert (pk, pa) == (k - 1, int(h.parents[k][a]))


def test_projected_point_lies_in_every_cube_on_its_path(hierarchy32):
    h = hierarchy32
    tree, pm = hierarchy_tree(h)
    for leaf in tree.leaves()[::37]:
        point = pm.leaf_point(int(leaf))
        node = int(leaf)
        for k in range(h.k_max, -1, -1):
            kk, a = pm.cube_of_node(node)
            assert kk == k
            assert h.membership[k][point] == a
            node = int(tree.parent[node])


def test_project_all_leaves_hits_all_deepest_centers(hierarchy32):
    tree, pm = hierarchy_tree(hierarchy32)
    image, fibers = lambda_project(pm, [int(x) for x in tree.leaves()])
    assert image == sorted(int(c) for c in hierarchy32.centers[hierarchy32.k_max])
    assert set(fibers.values()) == {1}
    single, _ = lambda_project(pm, [int(tree.leaves()[5])])
    assert len(single) == 1
    with pytest.raises(Exception):
        lambda_project(pm, [0])  # not a deepest-level leaf


# -- snowflake ---------------------------------------------------------------------------


def test_snowflake_exact_on_dyadic_powers():
    assert snowflake_distance(PowerSum.pow2(-5), Fraction(1, 4)) == Fraction(1, 4) ** 5
    assert snowflake_distance(Fraction(1, 8), Fraction(1, 4)) == Fraction(1, 64)
    assert snowflake_distance(PowerSum.zero(), Fraction(1, 4)) == 0
    assert snowflake_distance(Fraction(1), Fraction(1, 8)) == 1
    # non-dyadic values fall back to the float law
    assert snowflake_distance(Fraction(1, 3), Fraction(1, 4)) == pytest.approx((1 / 3) ** 2)


def test_snowflake_ball_identity_exhaustive(hierarchy32):
    tree, _ = hierarchy_tree(hierarchy32)
    depths = pairwise_confluent_depths(tree, tree.leaves())
    # Distances take one value per confluent depth; reparametrise each once
    # and compare ball memberships over all leaf pairs and radii.
    snow_of_depth = {
        d: snowflake_distance(PowerSum.pow2(-d), DELTA) for d in range(tree.D + 1)
    }
    for n in range(0, tree.D + 1):
        base = depths >= n          # within the base-1/2 ball of radius 2^-n
        in_snow = np.asarray(
            [snow_of_depth[d] <= DELTA ** n for d in range(tree.D + 1)]
        )
        snow = in_snow[np.minimum(depths, tree.D)]
        assert np.array_equal(base, snow)


def test_dimension_rescales_by_the_snowflake_factor(hierarchy32):
    tree, _ = hierarchy_tree(hierarchy32)
    base = estimate_dimension(tree)
    snow = estimate_dimension(tree, scale_exponent=3)
    assert base.slope == 3 * snow.slope


def test_finer_grid_tree_has_exact_doubled_dimension():
    # 64x64 resolves both cube levels exactly (1, 64, 4096 cubes), so the
    # base-1/2 tree dimension is exactly 2 * log2(8) and the delta-weighted
    # one is exactly the grid dimension.
    h = christ_decompose(grid_space(64), DELTA, C2)
    tree, _ = hierarchy_tree(h)
    assert estimate_dimension(tree).slope == 6
    assert estimate_dimension(tree, scale_exponent=3).slope == 2


# -- regular-map audit --------------------------------------------------------------------


def test_single_cube_audit():
    space = FiniteMetricSpace.from_points(np.asarray([[0.0, 0.0], [1.0, 1.0]]))
    h = christ_decompose(space, DELTA, C2, k_max=1)
    audit = regular_map_audit(h)
    assert audit.cover_counts[0] >= 1
    assert audit.c4 == 1
    assert audit.composition_ok()


def test_grid_audit_measures_known_constants(hierarchy32):
    audit = regular_map_audit(hierarchy32)
    assert audit.levels == (1, 2)
    assert audit.cover_counts == (9, 1)
    assert audit.c3 == 9
    assert audit.c4 == 1
    assert audit.composition_ok()
    assert audit.centers_exhaustive


def test_sampled_audit_is_dominated(hierarchy32):
    full = regular_map_audit(hierarchy32)
    sampled = regular_map_audit(hierarchy32, ball_samples=64, seed=3)
    assert not sampled.centers_exhaustive
    assert all(s <= f for s, f in zip(sampled.cover_counts, full.cover_counts))


# -- empirical regularity ---------------------------------------------------------------


def test_full_grid_is_two_regular(grid32):
    report = empirical_regularity(
        grid32, Fraction(2), radii=[Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)]
    )
    assert report.ratio_float() <= 8.0
    assert report.status == "pass"


def test_empirical_needs_scales():
    space = FiniteMetricSpace.from_points(np.asarray([[0.0, 0.0], [1.0, 1.0]]))
    with pytest.raises(MetricSpaceError):
        empirical_regularity(space, Fraction(1), subset=[0])
    with pytest.raises(MetricSpaceError):
        # separation 1 leaves no radii inside [2*minsep, 1/2]
        empirical_regularity(space, Fraction(1))


def test_ball_diameters_track_radii(grid32):
    # diam(B(x,r)) / r stays within (0, 2]: 2 structurally, the lower end a
    # measured positive constant over the resolved window.
    rng = np.random.default_rng(7)
    lo = np.inf
    for x in rng.integers(0, grid32.n, size=64):
        row = grid32.dist_row(int(x))
        for r in (0.5, 0.25, 0.125):
            inside = np.nonzero(row <= r)[0]
            diam = 0.0
            for i in inside:
                diam = max(diam, float(grid32.dist_row(int(i))[inside].max()))
            ratio = diam / r
            assert ratio <= 2.0 + 1e-12
            lo = min(lo, ratio)
    assert lo > 0.5  # measured: balls in the window are genuinely fat


def test_empirical_sampling_is_seed_deterministic(grid32):
    a = empirical_regularity(grid32, Fraction(2), sample_centers=50, seed=9)
    b = empirical_regularity(grid32, Fraction(2), sample_centers=50, seed=9)
    assert a.serialize() == b.serialize()
    c = empirical_regularity(grid32, Fraction(2), sample_centers=50, seed=10)
    exhaustive = empirical_regularity(grid32, Fraction(2))
    for sampled in (a, c):
        assert sampled.lower >= exhaustive.lower
        assert sampled.upper <= exhaustive.upper


def test_empirical_subset_keeps_ambient_scale(grid32):
    # one 4x4 tile: counts grow like r^2 inside, saturate above the tile size
    subset = [i * 32 + j for i in range(4) for j in range(4)]
    report = empirical_regularity(grid32, Fraction(2), subset=subset)
    assert report.status in ("pass", "fail")  # measured, not asserted
    assert report.rows[0].max_count == 16


# -- files -------------------------------------------------------------------------------


def test_points_file_round_trip(grid32):
    text = format_points_file(grid32)
    again = parse_points_file(text)
    assert format_points_file(again) == text
    assert again.n == grid32.n


def test_matrix_file_round_trip():
    space = FiniteMetricSpace.from_matrix(
        np.asarray([[0.0, 1.0, 0.5], [1.0, 0.0, 0.75], [0.5, 0.75, 0.0]])
    )
    text = format_points_file(space)
    again = parse_points_file(text)
    assert format_points_file(again) == text


def test_hierarchy_file_round_trip(hierarchy32):
    text = format_hierarchy_file(hierarchy32)
    parsed = parse_hierarchy_file(text)
    assert parsed["delta"] == DELTA
    assert parsed["k_max"] == 2
    assert len(parsed["levels"][1]) == 64
    counts = [c for (_, _, _, c) in parsed["levels"][1]]
    assert sum(counts) == 1024
