"""mimofb: multi-channel Markovian feedback mediated by diffusive measurements.

The package builds the unconditional closed-loop generator (directly and in
manifest Lindblad form), integrates conditioned stochastic trajectories with
their recorded currents, and evaluates two-time current correlations by the
quantum regression rule.
"""

__version__ = "0.1.0"

from .correlation import (
    CorrelationResult,
    current_correlation,
    current_correlation_measurement_only,
    empirical_current_correlation,
    steady_state,
)
from .errors import (
    DimensionMismatchError,
    EfficiencyError,
    FeedbackSimError,
    GridMismatchError,
    InvalidSquareRootError,
    InvalidStateError,
    NegativeLagError,
    NonSquareError,
    NoSteadyStateError,
    NotDiagonalError,
    NotHermitianError,
    NotPSDError,
    ParseError,
    StateDivergedError,
)
from .liouvillian import (
    CPReport,
    Superoperator,
    adjoint,
    cp_check,
    dissipator,
    evolve_unconditional,
    feedback_liouvillian,
    full_liouvillian,
    lindblad_form,
    measurement_liouvillian,
    trace_residual,
)
from .model import (
    Measurement,
    SystemModel,
    current_observables,
    heterodyne_model,
    homodyne_model,
    measured_channel_ops,
    measurement_efficiencies,
    noise_covariance,
)
from .modelio import (
    load_model,
    load_observable,
    load_state,
    save_model,
    save_state,
)
from .numkit import (
    GaussianStream,
    devectorize,
    expm_action,
    psd_sqrt,
    vectorize,
)
from .sme import (
    SMEConfig,
    TrajectoryRecord,
    average_expectations,
    average_states,
    expectation_values,
    h_superop,
    innovation_ops,
    run_trajectories,
    sme_step,
)

__all__ = [
    "__version__",
    "CorrelationResult",
    "CPReport",
    "DimensionMismatchError",
    "EfficiencyError",
    "FeedbackSimError",
    "GaussianStream",
    "GridMismatchError",
    "InvalidSquareRootError",
    "InvalidStateError",
    "Measurement",
    "NegativeLagError",
    "NonSquareError",
    "NoSteadyStateError",
    "NotDiagonalError",
    "NotHermitianError",
    "NotPSDError",
    "ParseError",
    "SMEConfig",
    "StateDivergedError",
    "Superoperator",
    "SystemModel",
    "TrajectoryRecord",
    "adjoint",
    "average_expectations",
    "average_states",
    "cp_check",
    "current_correlation",
    "current_correlation_measurement_only",
    "current_observables",
    "devectorize",
    "dissipator",
    "empirical_current_correlation",
    "evolve_unconditional",
    "expectation_values",
    "expm_action",
    "feedback_liouvillian",
    "full_liouvillian",
    "h_superop",
    "heterodyne_model",
    "homodyne_model",
    "innovation_ops",
    "lindblad_form",
    "load_model",
    "load_observable",
    "load_state",
    "measured_channel_ops",
    "measurement_efficiencies",
    "measurement_liouvillian",
    "noise_covariance",
    "psd_sqrt",
    "run_trajectories",
    "save_model",
    "save_state",
    "sme_step",
    "steady_state",
    "trace_residual",
    "vectorize",
]
