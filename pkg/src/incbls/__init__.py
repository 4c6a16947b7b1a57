"""Incremental Broad Learning System training on added inputs."""

from .errors import *  # noqa: F401,F403
from .incremental import (
    BStrategy,
    IncrementBatch,
    PinvState,
    UpdateOutcome,
    add_inputs,
    c_norm_check,
    compute_B_cpinv,
    compute_B_existing,
    compute_B_large_q,
    compute_B_small_q,
    compute_C,
    compute_Dbar,
    compute_Dt,
    select_B_strategy,
    update_pinv,
    update_weights,
)
from .linalg import left_pinv, mp_conditions_check, solve_spd, svd_pinv
from .model import (
    Architecture,
    BlsModel,
    build_activations,
    increment_inputs,
    load_model,
    predict,
    save_model,
    train_initial,
)

__version__ = "0.1.0"
