"""Central finite-difference gradient checking utilities (test support)."""

import numpy as np

from .optim import zero_grads


def numeric_gradient(f, x, eps=1e-5):
    """Central-difference gradient of scalar ``f()`` w.r.t. array ``x`` in place."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + eps
        fp = f()
        x[idx] = orig - eps
        fm = f()
        x[idx] = orig
        g[idx] = (fp - fm) / (2.0 * eps)
        it.iternext()
    return g


def max_relative_error(analytic, numeric, abs_floor=1e-9):
    """Worst-case relative disagreement; tiny absolute differences pass."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    diff = np.abs(a - n)
    denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
    rel = np.where(diff < abs_floor, 0.0, diff / denom)
    return float(rel.max()) if rel.size else 0.0


def check_layer_gradients(layer, x, rng, eps=1e-5):
    """Check input and parameter gradients of a layer against finite differences.

    The scalar objective is sum(forward(x) * r) with a fixed random weighting
    r, which keeps all gradients well scaled. Returns the worst relative
    error over the input gradient and every parameter gradient.
    """
    y = layer.forward(x)
    r = rng.standard_normal(y.shape)

    def loss():
        return float(np.sum(layer.forward(x) * r))

    zero_grads(layer.params())
    layer.forward(x)
    gx = layer.backward(r)

    worst = max_relative_error(gx, numeric_gradient(loss, x, eps))
    for p in layer.params():
        worst = max(worst, max_relative_error(p.grad, numeric_gradient(loss, p.value, eps)))
    return worst
