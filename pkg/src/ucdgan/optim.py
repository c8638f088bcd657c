"""Bias-corrected Adam over tensor-engine parameters."""

import numpy as np

from .errors import ContractError


class Adam:
    """Adam with GAN-customary low beta1 by default.

    ``step`` applies the bias-corrected update to every parameter and
    clears their grads; a parameter without a populated grad is a
    contract violation.
    """

    def __init__(self, params, lr, beta1=0.0, beta2=0.99, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise ContractError(f"adam: parameter {i} has no grad (shape {p.data.shape})")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad
            m, v = self.m[i], self.v[i]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = np.asarray(np.sqrt(v / bc2))
            update += self.eps
            np.divide(m, update, out=update)
            update *= self.lr / bc1
            p.data -= update
            p.grad = None

    def zero_grad(self):
        for p in self.params:
            p.grad = None
