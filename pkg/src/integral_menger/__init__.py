"""Discrete intermediate Menger energies, Jones beta numbers and fractional seminorms.

The subpackages are import-light; the common entry points are re-exported here.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BudgetExceededError,
    ConfigError,
    InvalidInputError,
    NumericalDegeneracyError,
    ParseError,
)
from .geometry import (  # noqa: E402
    PointTuple,
    cayley_menger_volume,
    diameter,
    discrete_curvature,
    menger_curvature,
    simplex_volume,
    wedge_norm,
)
from .manifold import (  # noqa: E402
    GraphPatch,
    SampledManifold,
    generate,
    graph_alpha_patch,
    graph_embed,
    load_point_cloud,
    neighborhood,
    save_point_cloud,
    smooth_graph_patch,
)
from .beta import beta_graph_bound, beta_minmax, beta_pca_bound, beta_profile  # noqa: E402
from .energy import (  # noqa: E402
    EnergyEstimate,
    EnergySpec,
    EstimatorConfig,
    curve_energy,
    energy_exhaustive,
    energy_monte_carlo,
    omega_sampler,
    second_difference_functional,
    sup_curvature,
)
from .seminorms import (  # noqa: E402
    GridFunction,
    alpha_membership_threshold,
    besov_exponent,
    besov_second_difference,
    gagliardo_seminorm,
    sobolev_exponent,
)
