"""romae: convolutional-autoencoder reduced-order models.

Trains autoencoders on randomized smooth functions (no full-order samples)
and steps the heat, wave, and Kuramoto-Sivashinsky equations in latent space
by minimizing time-discrete residuals (manifold least-squares projection).
"""

from .analysis import SingularSpectrum, pod_projection_error, rel_l2_error, singular_values
from .autoencoder import (
    AutoencoderSpec,
    JacobianMode,
    TrainedAutoencoder,
    build,
    gaussian_filter,
    load,
    save,
)
from .datagen import (
    SampleMethod,
    TrainingSet,
    TrigParams,
    bbp_sample,
    brownian_bridge,
    build_training_set,
    load_training_set,
    save_training_set,
    tensor2d_sample,
    trig_sample,
)
from .errors import FormatError, GaussNewtonError, NumericalError, RomSteppingError
from .fom import (
    BCKind,
    BoundaryCondition,
    HeatProblem,
    KsProblem,
    ResidualModel,
    WaveProblem1D,
    WaveProblem2D,
    bootstrap_second_state,
    heat_step,
    ks_step,
    make_residual,
    run_fom,
    wave1d_step,
    wave2d_step,
)
from .grid import (
    ExtendedMesh,
    Layout,
    Mesh1D,
    Mesh2D,
    SnapshotMatrix,
    StateVector,
    assemble_snapshots,
    extend_function,
    extend_mesh,
    make_mesh,
    read_snapshot_csv,
    truncate_function,
    write_snapshot_csv,
)
from .lspg import (
    GnResult,
    IdentityCoder,
    LatentTrajectory,
    LspgProblem,
    compute_x_ref,
    gauss_newton,
    lspg_step,
    run_rom,
    write_trajectory_csv,
)
from .neural import (
    AdamState,
    Network,
    StopReason,
    TrainConfig,
    TrainHistory,
    adam_step,
    mse_loss,
    train,
)

__version__ = "0.1.0"
