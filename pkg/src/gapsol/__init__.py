"""Ground states and gap solitons of the periodic stationary nonlinear
Schrodinger equation, computed by periodic-cell approximation, spectral
splitting, constrained energy minimization, cell-doubling continuation, and
decay diagnostics, with a photonic-crystal front end."""

from .errors import (
    AllRestartsCollapsed,
    AssumptionViolated,
    CollapsedToZero,
    ConfigError,
    DomainRefusal,
    EdgeTooClose,
    FieldFormatError,
    GapContainsZero,
    GapsolError,
    GridMismatch,
    IncompleteDecomposition,
    InsufficientSpan,
    InvalidGrid,
    InvalidSweep,
    MixedSignChi,
    NegativeSquare,
    NonIntegerShift,
    NoSpectrumAbove,
    OffManifold,
    OnlyTrivialSolution,
    ParseError,
    ProjectionDiverged,
    SeedDegenerate,
    ValidationError,
    VerificationFailed,
    WindowTooSmall,
    ZeroInSpectrum,
)
from .grid import (
    GridSpec,
    PeriodicCoefficient,
    PeriodicField,
    constant_field,
    dump_field,
    h1_norm,
    integrate,
    laplacian_apply,
    load_field,
    make_grid,
    translate_field,
    zero_field,
)
from .spectral import (
    BlochBands,
    PotentialSpec,
    SpectralDecomposition,
    SpectralGap,
    apply_operator,
    bloch_bands,
    eigendecompose,
    find_gap_at_zero,
    project_split,
    split_norm,
)
from .nonlinear import NonlinearitySpec, check_assumptions, eval_F, eval_f, eval_fprime
from .action import (
    ActionContext,
    NehariResidual,
    build_context,
    energy,
    gradient,
    hessian_apply,
    nehari_residual,
    nehari_value_identity,
)
from .solver import (
    SolveConfig,
    SolveResult,
    linking_seed,
    minimize_ground_state,
    project_to_manifold,
    verify_critical_point,
)
from .continuation import (
    DecayFit,
    EdgeSample,
    KSweepRecord,
    edge_scaling_probe,
    extend_to_doubled_cell,
    fit_decay_rate,
    k_sweep,
    recenter,
)
from .photonic import (
    PhotonicMedium,
    bifurcation_sweep,
    frequency_gap_map,
    reduce_to_nls,
    solve_gap_soliton,
)

__version__ = "0.1.0"
