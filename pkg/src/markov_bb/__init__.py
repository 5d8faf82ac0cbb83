"""Transport metric and entropy flow for nonnegative measures on reversible Markov chains."""

from .action import (
    DiscretePath,
    L1Bounds,
    action_linsq,
    action_quad,
    continuity_residual,
    epsilon_lift,
    l1_bounds,
    reparameterize,
    three_phase_path,
)
from .calculus import log_mean, mobility
from .chain import MarkovChain, SpectrumReport, build_chain, random_reversible_chain, weighted_spectrum
from .distance import DistanceEstimate, estimate_distance
from .errors import (
    AtEquilibrium,
    ChainError,
    DomainError,
    IllConditioned,
    InsufficientData,
    InvalidParams,
    NegativeInput,
    NonConvergence,
    NotInRange,
    NotIrreducible,
    NotReversible,
    NotStrictlyPositive,
    RowSumError,
    StepSizeUnderflow,
)
from .flow import (
    DecayReport,
    FlowTrajectory,
    argmin_envelope_rate,
    entropy,
    entropy_gap,
    entropy_gradient,
    estimate_decay,
    heat_rhs,
    integrate_flow,
    lojasiewicz_ratio,
)
from .operators import (
    TangentDecomposition,
    TransportParams,
    assemble_A,
    assemble_B,
    decompose_tangent,
    default_params,
    make_params,
    metric_g,
    project_gradient,
    solve_B_restricted,
)

__version__ = "0.1.0"
