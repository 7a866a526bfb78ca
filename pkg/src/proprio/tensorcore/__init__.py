"""Minimal dense/conv neural-network substrate with hand-written gradients.

Everything trainable in this repo (VAE, backbone, reductor, regressor) is
built from these layers, the Adam optimizer, and the two loss functions.
Math runs in float64 by default so finite-difference gradient checks are
reliable; float32 can be enabled for speed via :func:`use_float32` or the
``PROPRIO_FLOAT32`` environment variable.
"""

import os

import numpy as np

_REAL_DTYPE = np.float32 if os.environ.get("PROPRIO_FLOAT32", "") == "1" else np.float64


def real_dtype():
    """Floating point dtype used for all parameters and activations."""
    return _REAL_DTYPE


def use_float32(enabled=True):
    """Switch the substrate to float32 (production speed mode).

    Affects layers constructed after the call; existing layers keep their
    dtype. Tests and gradient checks always run in float64.
    """
    global _REAL_DTYPE
    _REAL_DTYPE = np.float32 if enabled else np.float64


from .layers import (  # noqa: E402
    Conv2d,
    ConvTranspose2d,
    Dense,
    Flatten,
    LeakyReLU,
    Param,
    Reshape,
    Sequential,
    Sigmoid,
)
from .losses import kl_diag_gaussian, mse_loss  # noqa: E402
from .optim import Adam, zero_grads  # noqa: E402
from .checkpoint import load_params, save_params  # noqa: E402

__all__ = [
    "Adam",
    "Conv2d",
    "ConvTranspose2d",
    "Dense",
    "Flatten",
    "LeakyReLU",
    "Param",
    "Reshape",
    "Sequential",
    "Sigmoid",
    "kl_diag_gaussian",
    "load_params",
    "mse_loss",
    "real_dtype",
    "save_params",
    "use_float32",
    "zero_grads",
]
