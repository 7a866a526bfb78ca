"""Finite-difference gradient checks for every layer and loss.

Each layer is checked at multiple random seeds against central differences;
the worst relative error over input and parameter gradients must stay below
1e-4 in float64.
"""

import numpy as np
import pytest

from proprio import tensorcore as tc
from proprio.tensorcore.gradcheck import (check_layer_gradients, max_relative_error,
                                          numeric_gradient)

TOL = 1e-4
SEEDS = range(10)


def _check(make_layer, shape, seed):
    rng = np.random.default_rng(seed)
    layer = make_layer(rng)
    x = rng.standard_normal(shape)
    err = check_layer_gradients(layer, x, rng)
    assert err < TOL, f"relative error {err:.3e} at seed {seed}"


@pytest.mark.parametrize("seed", SEEDS)
def test_dense_gradients(seed):
    _check(lambda rng: tc.Dense(5, 4, rng), (3, 5), seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_conv_gradients(seed):
    _check(lambda rng: tc.Conv2d(2, 3, 3, rng), (2, 2, 6, 6), seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_conv_strided_padded_gradients(seed):
    _check(lambda rng: tc.Conv2d(2, 3, 3, rng, stride=2, padding=1), (2, 2, 6, 6), seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_conv_transpose_gradients(seed):
    _check(lambda rng: tc.ConvTranspose2d(3, 2, 3, rng), (2, 3, 4, 4), seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_conv_transpose_strided_gradients(seed):
    _check(
        lambda rng: tc.ConvTranspose2d(3, 2, 3, rng, stride=2, padding=1, output_padding=1),
        (2, 3, 4, 4),
        seed,
    )


@pytest.mark.parametrize("seed", SEEDS)
def test_leaky_relu_gradients(seed):
    # Shift inputs away from the kink at 0 so finite differences are clean.
    rng = np.random.default_rng(seed)
    layer = tc.LeakyReLU()
    x = rng.standard_normal((4, 6))
    x[np.abs(x) < 1e-3] += 0.1
    err = check_layer_gradients(layer, x, rng)
    assert err < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_sigmoid_gradients(seed):
    _check(lambda rng: tc.Sigmoid(), (4, 6), seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_flatten_gradients(seed):
    _check(lambda rng: tc.Flatten(), (3, 2, 4, 4), seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_reshape_gradients(seed):
    _check(lambda rng: tc.Reshape((2, 3, 2)), (3, 12), seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_sequential_composite_gradients(seed):
    def make(rng):
        return tc.Sequential([
            tc.Conv2d(1, 4, 3, rng, stride=2, padding=1, name="c0"),
            tc.LeakyReLU(),
            tc.Flatten(),
            tc.Dense(4 * 4 * 4, 6, rng, name="fc"),
        ])

    _check(make, (2, 1, 8, 8), seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_mse_gradient(seed):
    rng = np.random.default_rng(seed)
    pred = rng.standard_normal((3, 5))
    target = rng.standard_normal((3, 5))
    _, grad = tc.mse_loss(pred, target)
    num = numeric_gradient(lambda: tc.mse_loss(pred, target)[0], pred)
    assert max_relative_error(grad, num) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_kl_gradients(seed):
    rng = np.random.default_rng(seed)
    mu = rng.standard_normal((2, 4))
    logvar = rng.uniform(-2, 2, (2, 4))
    _, d_mu, d_logvar = tc.kl_diag_gaussian(mu, logvar)
    num_mu = numeric_gradient(lambda: tc.kl_diag_gaussian(mu, logvar)[0], mu)
    num_lv = numeric_gradient(lambda: tc.kl_diag_gaussian(mu, logvar)[0], logvar)
    assert max_relative_error(d_mu, num_mu) < TOL
    assert max_relative_error(d_logvar, num_lv) < TOL
