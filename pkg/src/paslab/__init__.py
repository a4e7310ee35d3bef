"""Few-parameter PCA-based correction of few-step probability-flow ODE samplers.

Everything runs on analytic Gaussian / Gaussian-mixture score fields, so the
exact trajectories (or a fine-grained teacher) are always available.
"""

from paslab.errors import (
    DegenerateDirectionError,
    DivergenceError,
    EmptyBasisError,
    IncompatibleTableError,
    InvalidArgumentError,
    UndefinedVarianceError,
    UnsupportedModelError,
)
from paslab.timegrid import TeacherRefinement, TimeSchedule, build_schedule, refine_for_teacher
from paslab.scorefield import (
    GaussianComponent,
    GaussianMixtureScoreModel,
    data_prediction,
    exact_trajectory,
    noise_prediction,
    score,
)
from paslab.solvers import (
    HistoryBuffer,
    SolverSpec,
    TrajectoryRecord,
    euler_step,
    generate_ground_truth,
    heun_step,
    ipndm_step,
    sample,
)
from paslab.subspace import (
    CoordinateVector,
    OrthonormalBasis,
    cumulative_variance,
    gram_schmidt,
    init_coordinates,
    pca_basis,
    reconstruct_direction,
)
from paslab.pas import (
    CorrectionEntry,
    CorrectionTable,
    TrainConfig,
    adaptive_accept,
    optimize_coordinates,
    sample_with_correction,
    train_pas,
)

__version__ = "0.1.0"
