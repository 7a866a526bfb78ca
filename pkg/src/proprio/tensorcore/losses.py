"""Loss functions returning (value, gradient...) pairs."""

import numpy as np

from ..errors import DimensionError


def mse_loss(pred, target):
    """Mean squared error and its gradient w.r.t. ``pred``.

    Works on vectors or batches; the mean runs over all elements, so the
    gradient is ``2 (pred - target) / n`` with n the total element count.
    """
    pred = np.asarray(pred, dtype=np.result_type(pred, np.float64))
    target = np.asarray(target, dtype=pred.dtype)
    if pred.shape != target.shape:
        raise DimensionError(f"mse: pred shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, (2.0 / diff.size) * diff


def kl_diag_gaussian(mu, logvar):
    """KL( N(mu, exp(logvar)) || N(0, I) ) for a diagonal Gaussian.

    Returns (kl, d_kl/d_mu, d_kl/d_logvar). ``mu`` and ``logvar`` may be
    vectors or batches; the KL is summed over all entries.
    """
    mu = np.asarray(mu, dtype=np.result_type(mu, np.float64))
    logvar = np.asarray(logvar, dtype=mu.dtype)
    if mu.shape != logvar.shape:
        raise DimensionError(f"kl: mu shape {mu.shape} != logvar shape {logvar.shape}")
    var = np.exp(logvar)
    kl = 0.5 * float(np.sum(mu * mu + var - 1.0 - logvar))
    return kl, mu.copy(), 0.5 * (var - 1.0)
