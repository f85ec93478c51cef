"""Regular tree boundaries: construction, certification, and transport.

The package builds finite truncations of rooted trees whose boundaries
carry the visual ultrametric, certifies Ahlfors regularity with exact
arithmetic, extracts certified lower-dimensional boundary subspaces via
digit schedules, and transports them to concrete point sets through
dyadic-cube hierarchies and the center projection.
"""

from .exact import Exponent, PowerSum, integer_root
from .trees import (
    Explicit,
    Homogeneous,
    Periodic,
    RootedTree,
    SeededRandom,
    TreeError,
    TreeSizeError,
    TreeSpec,
    UniformTree,
    boundary_distance,
    build_tree,
    build_uniform_tree,
    confluence,
    parse_tree_spec,
    read_leaf_file,
    read_tree_file,
    resolve_tree,
    sphere,
    sphere_count,
    write_leaf_file,
    write_tree_file,
)
from .stopping import (
    StoppingEnumerationCap,
    StoppingSet,
    count_stopping_sets,
    enumerate_stopping_sets,
    extremal_stopping_sums,
    stopping_sum_values,
)
from .regularity import (
    DimensionEstimate,
    RegularityReport,
    ScaleRow,
    counting_bounds,
    estimate_dimension,
    hausdorff_content_bracket,
    minimal_cover_sum,
    parse_report_text,
    read_report_file,
    stopping_bounds,
    write_report_file,
)
from .construct import (
    BiLipschitzAudit,
    ConstructionError,
    DigitSchedule,
    ExtractionResult,
    GradedTree,
    SelectionPlan,
    ball_counting_report,
    bilipschitz_audit,
    binary_model_subtree,
    choose_plan,
    digit_deviation_range,
    digit_schedule,
    extract_regular_subspace,
    homogenize,
    select_periodic,
    thin_periodic,
)
from .dyadic import (
    CubeHierarchy,
    FiniteMetricSpace,
    HierarchyAudit,
    MetricSpaceError,
    ProjectionMap,
    RegularMapAudit,
    christ_decompose,
    empirical_regularity,
    grid_space,
    hierarchy_tree,
    lambda_project,
    read_points_file,
    regular_map_audit,
    snowflake_distance,
    write_points_file,
)

__version__ = "0.1.0"
