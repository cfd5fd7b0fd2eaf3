"""Capacity-cost and rate-distortion solvers driven by particle gradient descent.

The capacity solver represents the input law as a cloud of particles, moves
them along importance-sampled gradients of the constrained mutual-information
objective, and tracks the cost constraint with a projected dual ascent.  A
discrete fixed-point solver over quantized grids serves as an independent
cross-check, and a companion routine computes rate-distortion points by the
same particle transport applied to the reconstruction measure.
"""

from .core import (
    ChannelModel,
    ConfigurationError,
    CostModel,
    DualConfig,
    GaussianInit,
    IterationRecord,
    ParticleSet,
    PointInit,
    QuadraticCost,
    SolverConfig,
    StepSchedule,
    init_particles,
    load_particles,
    save_particles,
)
from .channels import (
    DiscreteChannel,
    FadingCsirChannel,
    FadingNoCsirChannel,
    MimoAwgnChannel,
    QuantizationError,
    awgn,
    quantize_channel,
    random_mimo_matrix,
)
from .estimator import (
    EstimatorError,
    ImportanceConfig,
    Objectives,
    PotentialEstimate,
    estimate_objectives,
    estimate_potential,
    estimate_potential_batch,
    mixture_output_logpdf,
    particle_rngs,
)
from .wgd import (
    NonFiniteGradientError,
    SolveAbort,
    SolveResult,
    StationaritySummary,
    dual_update,
    solve,
    stationarity_diagnostic,
    transport_step,
)
from .ba import BaResult, ba_prox_step, ba_solve, solve_for_budget, sweep_lambda
from .rd import (
    DistortionModel,
    RDProblem,
    RDResult,
    SquaredErrorDistortion,
    rd_first_variation_grad,
    rd_solve,
)
from .diagnostics import cluster_particles, grad_check, w2_1d

__version__ = "0.1.0"
