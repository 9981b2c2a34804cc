"""Python bindings for the lbgan C++ core.

Images are float32 arrays shaped [3, H, W] with values in [-1, 1].
"""

import torch  # noqa: F401  loads the libtorch shared libraries first

from ._lbgan import (
    CheckpointError,
    ConfigError,
    InvalidInput,
    InvalidRequest,
    LbganError,
    Model,
    StateError,
    attention_l2,
    build_mask,
    csc_loss,
    d_e_loss,
    d_n_loss,
    dataset_digest,
    g_e_loss,
    g_n_loss,
    generate_synthetic_dataset,
    load_face,
    output_filename,
    remote_code,
    run_cli,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "InvalidInput",
    "InvalidRequest",
    "LbganError",
    "Model",
    "StateError",
    "attention_l2",
    "build_mask",
    "csc_loss",
    "d_e_loss",
    "d_n_loss",
    "dataset_digest",
    "g_e_loss",
    "g_n_loss",
    "generate_synthetic_dataset",
    "load_face",
    "output_filename",
    "remote_code",
    "run_cli",
]
