"""Band structure, integrated density of states, and windowed DOS for
periodic Schrodinger operators -Delta + V on R^d via Floquet-Bloch fibres,
together with numerical checks of the coefficient-decay and group-velocity
bounds and a Monte Carlo estimator for the prevalence of regular directions.
"""

from .errors import (
    BlochDosError,
    ConfigError,
    CutoffTooSmallError,
    DegenerateBandError,
    PreconditionError,
    SolverError,
    TrackingError,
)
from .lattice import (
    Decomposition,
    DualLattice,
    Lattice,
    brillouin_radius,
    decompose,
    dual_lattice,
    packing_constant_W,
    points_in_ball,
)
from .potential import (
    PotentialSpec,
    SupNormBracket,
    evaluate,
    sobolev_seminorm,
    sup_norm,
)
from .fibre import (
    BandSolution,
    FibreMatrix,
    PlaneWaveBasis,
    assemble,
    count_below,
    eigenpair_near,
    group_velocity,
    plane_wave_basis,
    solve_dense,
    suggest_cutoff,
)
from .ids import (
    FreeReference,
    IdsReport,
    QuadratureGrid,
    Subwindow,
    WindowReport,
    free_reference,
    ids,
    partition_window,
    window,
    window_floor,
)
from .geometry import (
    GeometryParams,
    asymptotic_theta_radius,
    fraction_ci_halfwidth,
    in_A,
    in_B,
    regular_direction_fraction,
    structural_constants,
)
from .decay import (
    DecayConstants,
    DecayReport,
    GradientReport,
    constants_for,
    decay_constants,
    verify_decay,
    verify_gradient,
)

__version__ = "0.1.0"

__all__ = [
    "BlochDosError",
    "ConfigError",
    "CutoffTooSmallError",
    "DegenerateBandError",
    "PreconditionError",
    "SolverError",
    "TrackingError",
    "Decomposition",
    "DualLattice",
    "Lattice",
    "brillouin_radius",
    "decompose",
    "dual_lattice",
    "packing_constant_W",
    "points_in_ball",
    "PotentialSpec",
    "SupNormBracket",
    "evaluate",
    "sobolev_seminorm",
    "sup_norm",
    "BandSolution",
    "FibreMatrix",
    "PlaneWaveBasis",
    "assemble",
    "count_below",
    "eigenpair_near",
    "group_velocity",
    "plane_wave_basis",
    "solve_dense",
    "suggest_cutoff",
    "FreeReference",
    "IdsReport",
    "QuadratureGrid",
    "Subwindow",
    "WindowReport",
    "free_reference",
    "ids",
    "partition_window",
    "window",
    "window_floor",
    "GeometryParams",
    "asymptotic_theta_radius",
    "fraction_ci_halfwidth",
    "in_A",
    "in_B",
    "regular_direction_fraction",
    "structural_constants",
    "DecayConstants",
    "DecayReport",
    "GradientReport",
    "constants_for",
    "decay_constants",
    "verify_decay",
    "verify_gradient",
    "__version__",
]
