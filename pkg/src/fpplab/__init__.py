"""First-passage percolation laboratory.

Simulates FPP on the integer lattice and on the rooted d-ary tree, extracts
geodesics with their empirical edge-weight measures, and checks them against
the closed-form entropy-tilted predictions available on the tree.
"""

from .measures import (
    DiscreteMeasure,
    Grid,
    GriddedDensity,
    kl_divergence,
    pushforward,
    pushforward_positive,
    total_variation,
    wasserstein,
    wasserstein_extended,
)
from .weights import (
    Analytic,
    Combined,
    CountableAtoms,
    InverseCdf,
    PiecewiseConstant,
    PositivePart,
    Shifted,
    WeightFunction,
    WeightLawSummary,
    constant,
    dense_rational_atoms,
    positive_indicator,
    shift,
    weight_from_json,
    weight_to_json,
)
from .lattice import (
    BoxSpec,
    GeodesicRecord,
    LatticeEnvironment,
    LengthExtremes,
    boxed_sensitivity_check,
    brute_force_passage,
    geodesic_length_extremes,
    passage_time,
    passage_time_to_direction,
)
from .tree import (
    BudgetExceededError,
    TreeEnvironment,
    TreeGeodesicRecord,
    TreeMonteCarlo,
    enumerate_minimum,
    tree_empirical_measure,
    tree_min_monte_carlo,
    tree_minimum,
)
from .variational import (
    ConcavityReport,
    MinimizerResidualError,
    TiltedMinimizer,
    TreeTimeConstant,
    lattice_concavity_probe,
    solve_minimizer,
    tree_derivative_identity,
    tree_time_constant,
)
from .experiments import ExperimentConfig, ExperimentReport, emit, run, selftest_report

__version__ = "0.1.0"
