"""Adam optimizer with optional decoupled weight decay."""

import numpy as np

from ..errors import TrainingError


def zero_grads(params):
    for p in params:
        p.grad[...] = 0.0


class Adam:
    """Bias-corrected Adam over a fixed parameter list.

    Weight decay, when nonzero, is applied decoupled from the gradient
    (AdamW style). ``step_count`` increments by exactly one per ``step``.
    """

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8, weight_decay=0.0):
        self.params = list(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.weight_decay = weight_decay
        self.step_count = 0
        self.first_moment = [np.zeros_like(p.value) for p in self.params]
        self.second_moment = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, m, v in zip(self.params, self.first_moment, self.second_moment):
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient in {p.name}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            if self.weight_decay:
                p.value -= self.learning_rate * self.weight_decay * p.value
            p.value -= self.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + self.epsilon)

    def zero_grad(self):
        zero_grads(self.params)
