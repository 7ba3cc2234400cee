"""Spectral color models, locus geometry, and chromaticity inversion."""

from .analysis import (
    ClosureReport,
    ConvergenceTable,
    CoverageReport,
    closure_report,
    coverage_map,
    gaussian_convergence,
    simplex_lattice,
)
from .errors import (
    BoundaryTargetError,
    ChromaLocusError,
    DegenerateLocusError,
    DegenerateSensorError,
    ExteriorTargetError,
    GridMismatchError,
    LiftAmbiguousError,
    NoConvergenceError,
    NotConvexError,
    PreimageSplitError,
    ResolutionExceededError,
    SensorDataError,
)
from .fixtures import FIXTURE_NAMES, fixture_path, load_fixture
from .geometry import (
    ConvexityReport,
    LocusClass,
    SampledLocus,
    TorusParam,
    classify_convexity,
    convex_hull,
    glue_segments,
    half_plane_preimage,
    hull_membership,
    sample_locus,
    winding_number,
)
from .inversion import (
    BandedAssignment,
    InversionResult,
    InversionTarget,
    Inverter,
    banded_from_matrix,
    invert_log_linear,
    invert_step,
    invert_von_mises,
)
from .models import (
    BandedParams,
    GaussianParams,
    GeneralizedPeakParams,
    LogLinearParams,
    PeriodicShape,
    StepParams,
    VonMisesParams,
    count_sign_changes,
    eval_model,
    gaussian_limit_coeffs,
    log_eval,
    multiply_von_mises,
    normalization_b,
    params_from_dict,
    params_to_dict,
)
from .scene import Scene
from .sensor import (
    Chromaticity,
    Color,
    Density,
    Sensor,
    WavelengthGrid,
    chromaticity,
    color_of_density,
    load_density,
    load_sensor,
    normalized_response,
    reweighted_density,
    resample_density,
    tristimulus,
    white_point,
)

__version__ = "0.1.0"
