"""Exact region-wise verification of classification and attention robustness
of ReLU classifiers under parameterized semantic perturbations."""

from .attention import (
    AttentionConfig,
    AttentionMap,
    ValueRange,
    ai_range_in_region,
    attention_inconsistency,
    margin_range_in_region,
    saliency_map,
)
from .network import (
    ActivationPattern,
    AffineLayer,
    AffineRestriction,
    Network,
    activation_pattern,
    affine_restriction,
    compose,
    flip,
    forward,
    gradient_in_region,
    region_halfspaces,
)
from .perturb import (
    Brightness,
    ImageMeta,
    Patch,
    PerturbationSpec,
    Translation,
    apply_direct,
    encode,
    expected_map_transform,
)
from .polytope import (
    EPS,
    HPolytope,
    box_polytope,
    feasible_interior_point,
    interior_point_on_face,
    interior_point_on_line,
    is_stable,
    minimize_linear,
    simplify,
    vertices_2d,
)
from .traverse import (
    MODE_BFS,
    MODE_GBS_AR,
    MODE_GBS_CR,
    MODE_GBS_CRAR,
    Budget,
    TraversalResult,
    bfs,
    gbs,
)
from .verify import (
    AB,
    AR,
    CB,
    CR,
    IR,
    MR,
    GridOracleResult,
    RegionVerdict,
    grid_oracle,
    reconcile,
    verify_region,
)

__version__ = "0.1.0"
