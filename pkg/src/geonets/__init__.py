"""geonets: stationary 1-cycles (geodesic nets) on explicit Riemannian surfaces.

Finds stationary 1-cycles by Birkhoff curve shortening and discrete min-max
over sweepouts, and verifies diameter bounds for them at desk scale.
"""

__version__ = "0.1.0"

from .cycles import (
    CycleType,
    GeodesicNet,
    PolygonalCycle,
    VertexRole,
    build_cycle,
    classify_type,
    cycle_length,
    figure_eight_cycle,
    great_circle_cycle,
    latitude_circle_cycle,
    net_to_json,
    project_to_net,
    random_loop_cycle,
    torus_wrap_cycle,
    type_higher_than,
)
from .errors import (
    BirkhoffPreconditionError,
    DomainError,
    GeonetsError,
    InvariantViolation,
    NumericError,
    PreconditionError,
    ShortCycleFound,
    ShortenDidNotConverge,
    StepTooLongError,
    ValidationError,
)
from .manifolds import (
    ConformalSphere,
    Ellipsoid,
    FlatTorus,
    GeodesicSegment,
    Manifold,
    Point,
    RoundSphere,
    TangentVector,
    TorusOfRevolution,
    distance,
    geodesic_connect,
    geodesic_shoot,
    make_manifold,
    metric_at,
    parallel_transport,
)
from .shortening import (
    DeformationVector,
    FlowConfig,
    ShortenOutcome,
    TraceRow,
    birkhoff_step,
    choose_N,
    deformation_vector,
    first_variation,
    flow_step,
    shorten,
    trace_to_csv,
)
from .sweepout import (
    CycleFamily,
    MinMaxReport,
    family_to_json,
    latitude_sweepout,
    minmax,
    tetrahedron_cancellation_pairs,
    tetrahedron_sweepout,
    two_disc_refined_sweepout,
    verify_nonsimply_connected,
    verify_theorem1_q2,
)

__all__ = [name for name in dir() if not name.startswith("_")]
