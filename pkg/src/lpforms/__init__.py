"""Singular values of diffeomorphisms and L^p bounds for transported forms.

Submodules
----------
multilinear
    Alternating tensors, compound matrices, comass norms and the Hodge star.
geometry
    Chart domains with metrics, orthonormal frames, quadrature and sampling.
diffeo
    Diffeomorphisms between charts and their pointwise singular values.
fields
    Form fields, pullback/pushforward, pointwise and L^p norms.
certify
    Bound factors and quadrature certificates of the two-sided inequalities.
scenario, cli
    Scenario files, batch runs, reports and the ``certify`` command.
"""

__version__ = "0.1.0"

from .errors import (
    ArgumentError,
    ConfigError,
    DegenerateMapError,
    DegreeError,
    EmptySupportError,
    LpFormsError,
    MetricDegenerateError,
    NumericError,
    OrientationError,
    OutputError,
    ShapeError,
)
from .multilinear import (
    AlternatingTensor,
    MultiIndexTable,
    apply_to_vectors,
    comass_norm,
    compound,
    hodge_star,
    lex_multi_indices,
    singular_values,
    wedge,
)
from .geometry import (
    ChartDomain,
    QuadratureRule,
    integrate,
    orthonormal_frame,
    quadrature_nodes,
    sample_points,
    sup_norm_estimate,
    volume_density,
)
from .diffeo import (
    Diffeomorphism,
    SingularSpectrum,
    frame_matrix,
    inverse_spectrum,
    jacobian_determinant,
    jacobian_matrix,
    minimax_singular_oracle,
    singular_spectrum,
)
from .fields import FormField, lp_norm, pointwise_norm, pullback, pushforward, verify_pointwise_bounds
from .certify import (
    BoundCertificate,
    BoundFactors,
    Scenario,
    certify,
    density_factors,
    kform_factors,
    pullback_factors,
    pullback_factors_alpha,
    scalar_factors,
)
from .scenario import ScenarioConfig, build_scenario, dump_scenario, load_scenario
from .cli import RunReport, emit_pointwise_csv, run

__all__ = [name for name in dir() if not name.startswith("_")]
