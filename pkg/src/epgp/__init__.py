"""Sparse spectral Gaussian processes on PDE characteristic varieties.

Realizations are finite weighted sums of trigonometric functions whose
frequencies lie on the characteristic variety of a linear PDE, so every
sample and every posterior mean solves the PDE exactly.  Training the
marginal likelihood over frequencies, prior variances and, optionally, the
PDE parameter itself turns the same model into a PDE parameter-identification
method.

Set the EPGP_THREADS environment variable to cap BLAS threading.
"""

from . import _threads  # noqa: F401  (must run before numpy spins up BLAS)

from .errors import (
    CheckpointError,
    ConfigurationError,
    EpgpError,
    InvalidArgumentError,
    NumericalError,
)
from .variety import (
    PDE_IDS,
    PdeParam,
    VarietySpec,
    make_spec,
    parametrize,
    parametrize_batch,
    sample_free_frequencies,
    symbol_residual,
)
from .basis import BasisMatrix, build_phi, pde_residual_of_basis
from .likelihood import (
    ModelState,
    NlmlGradient,
    Posterior,
    assemble_A,
    nlml,
    nlml_gradient,
    nlml_oracle_dense,
    nlml_value_and_gradient,
    posterior,
    predict,
)
from .training import (
    AdamState,
    TrainConfig,
    TrainReport,
    adam_step,
    train_direct,
    train_inverse_joint,
    train_inverse_staged,
)
from .experiments import (
    Dataset,
    ModelCheckpoint,
    SOLUTIONS,
    TrueSolution,
    export_error_grid,
    generate_dataset,
    get_solution,
    load_checkpoint,
    load_dataset,
    mae,
    rmse,
    run_benchmark,
    run_case,
    save_checkpoint,
    save_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BasisMatrix",
    "CheckpointError",
    "ConfigurationError",
    "Dataset",
    "EpgpError",
    "InvalidArgumentError",
    "ModelCheckpoint",
    "ModelState",
    "NlmlGradient",
    "NumericalError",
    "PDE_IDS",
    "PdeParam",
    "Posterior",
    "SOLUTIONS",
    "TrainConfig",
    "TrainReport",
    "TrueSolution",
    "VarietySpec",
    "adam_step",
    "assemble_A",
    "build_phi",
    "export_error_grid",
    "generate_dataset",
    "get_solution",
    "load_checkpoint",
    "load_dataset",
    "mae",
    "make_spec",
    "nlml",
    "nlml_gradient",
    "nlml_oracle_dense",
    "nlml_value_and_gradient",
    "parametrize",
    "parametrize_batch",
    "pde_residual_of_basis",
    "posterior",
    "predict",
    "rmse",
    "run_benchmark",
    "run_case",
    "sample_free_frequencies",
    "save_checkpoint",
    "save_dataset",
    "symbol_residual",
    "train_direct",
    "train_inverse_joint",
    "train_inverse_staged",
]
