"""Partial-identification bounds for multidimensional discrete treatments.

Core pieces: treatment lattices under the product order, shape-restriction
bounds on average treatment effects, supermodular instrumental-variable
bounds, dependency bounds on effect distributions under random assignment,
plug-in estimation with a percentile bootstrap, and a brute-force enumeration
oracle that certifies sharpness at desk scale.
"""

from .lattice import (
    Diamond,
    DimensionMismatch,
    EmptySet,
    LatticeError,
    NotClosed,
    Point,
    Relation,
    TreatmentLattice,
    as_point,
    close_under_meet_join,
    compare,
    enumerate_diamonds,
    grid_lattice,
    incomparable,
    join,
    leq,
    lt,
    meet,
    validate_lattice,
)
from .partition import (
    PairNotOrdered,
    StratumClass,
    StratumPartition,
    SublatticeFlags,
    classify,
    flags_everywhere,
    merge_flag_sets,
)
from .bounds import (
    BoundInterval,
    CellStats,
    OutcomeBounds,
    SameTreatment,
    ate_bounds,
    effect_bounds_any_pair,
    no_assumption_ate_bounds,
    no_assumption_po_bounds,
    pointwise_region,
)

__version__ = "0.1.0"

# heavier subsystems are intentionally imported lazily by user code:
#   .iv        instrument-based bounds
#   .dist      dependency bounds on effect distributions
#   .estimate  datasets, plug-in statistics, bootstrap
#   .oracle    exhaustive/LP verification and synthetic populations
#   .runner    config-driven pipeline behind the CLI

__all__ = [
    "BoundInterval",
    "CellStats",
    "Diamond",
    "DimensionMismatch",
    "EmptySet",
    "LatticeError",
    "NotClosed",
    "OutcomeBounds",
    "PairNotOrdered",
    "Point",
    "Relation",
    "SameTreatment",
    "StratumClass",
    "StratumPartition",
    "SublatticeFlags",
    "TreatmentLattice",
    "as_point",
    "ate_bounds",
    "classify",
    "close_under_meet_join",
    "compare",
    "effect_bounds_any_pair",
    "enumerate_diamonds",
    "flags_everywhere",
    "grid_lattice",
    "incomparable",
    "join",
    "leq",
    "lt",
    "meet",
    "merge_flag_sets",
    "no_assumption_ate_bounds",
    "no_assumption_po_bounds",
    "pointwise_region",
    "validate_lattice",
    "__version__",
]
