"""Closed-form Einstein metrics on torus bundles: construction, certification
and exact classification of the resulting 7-manifolds."""

from .builders import (
    NegativeSpec,
    PositiveSpec,
    XYPoint,
    a_polys,
    build_nonpositive,
    build_positive,
    q_squared,
    solve_kappa,
    solve_xy,
)
from .diagnostics import (
    BoundaryMetric,
    boundary_metric,
    decay_report,
    geodesic_sigma,
    q_curvature4,
    volume_report,
)
from .errors import (
    DegenerateFiberError,
    DomainError,
    EinsteinLabError,
    InconsistentCoefficientsError,
    OutOfModelError,
    PreconditionError,
    SchemaVersionError,
    SolverError,
)
from .profiles import (
    Family,
    Kind,
    ModelParams,
    ProfileSample,
    SolutionCoefficients,
    b_matrix,
    eval_profile,
    psi_consistency,
    t_of_s,
)
from .serialize import export_family, import_family
from .topology import (
    BundleCharge,
    KSInvariants,
    Verdict,
    char_classes,
    classify,
    example_pairs,
    kreck_stolz,
    normal_form,
    rel_numbers,
)
from .verifier import (
    CollapseReport,
    End,
    ResidualReport,
    collapse_check,
    domain_scan,
    einstein_residual,
    fiber_ricci,
)

__version__ = "0.1.0"
