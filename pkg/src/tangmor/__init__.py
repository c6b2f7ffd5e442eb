"""Interpolatory model reduction of large sparse MIMO LTI systems.

Reduces first- and second-order systems onto block tangential Krylov
subspaces built by a two-sided Lanczos-type recurrence, with interpolation
shifts and tangential directions chosen adaptively from reduced-cost
residual norms, and verifies approximation quality in the frequency domain.
"""

from .adaptive import (
    IterationRecord,
    ResidualEvaluator,
    ShiftSearchRegion,
    next_direction_left,
    next_direction_right,
    next_shift_left,
    next_shift_right,
    residual_norm_left,
    residual_norm_right,
    ritz_region,
    run_abtl,
)
from .errors import (
    BreakdownError,
    DeflationWarning,
    DegenerateResidualError,
    MatrixMarketError,
    SingularMassError,
    SingularShiftError,
    StructureLossError,
    TangmorError,
)
from .evaluation import (
    FrequencyGrid,
    FrequencyResponse,
    default_grid,
    error_curve,
    hinf_estimate,
    log_grid,
    response,
    write_csv,
)
from .lanczos import (
    HessenbergAssembly,
    ReductionState,
    assemble,
    extend,
    init,
    project,
)
from .problems import (
    BenchmarkBundle,
    FdmSpec,
    generate_fdm,
    load_matrix_market,
    load_reduced,
    save_reduced,
)
from .second_order import (
    LinearizedSystem,
    SecondOrderReducedModel,
    SecondOrderSystem,
    eval_second_order_transfer,
    linearize,
    normalize_mass,
    reduce_second_order,
)
from .solvers import ShiftedFactorization, SolverCache, factorize, solve, solve_transposed
from .systems import (
    FirstOrderSystem,
    ReducedModel,
    TransferSample,
    eval_reduced_transfer,
    eval_transfer,
    markov_parameter,
    moment,
    moment_reduced,
)

__version__ = "0.1.0"
