"""Adam optimizer and finite-difference gradient checking."""
from __future__ import annotations

import numpy as np

from .autodiff import Tensor, backward


class NumericError(RuntimeError):
    pass


class Adam:
    """Bias-corrected Adam over a dict of named parameter tensors."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.value) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.value) for k, p in params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self):
        self.step_count += 1
        t = self.step_count
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for parameter '{name}'")
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / (1 - self.beta1 ** t)
            v_hat = self.v[name] / (1 - self.beta2 ** t)
            p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def finite_difference_grads(fn, params, h=1e-5):
    """Central-difference gradients of scalar fn(params) for each tensor."""
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p.value)
        flat = p.value.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(fn(params).value)
            flat[i] = orig - h
            down = float(fn(params).value)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        grads[name] = g
    return grads


def check_gradients(fn, params, h=1e-5, rtol=1e-4):
    """Compare analytic gradients of fn against central differences.

    Returns the worst relative error over all parameter entries. The
    relative error is |a - n| / max(1, |a|, |n|), which degrades to an
    absolute comparison near zero.
    """
    for p in params.values():
        p.zero_grad()
    loss = fn(params)
    backward(loss)
    numeric = finite_difference_grads(fn, params, h=h)
    worst = 0.0
    for name, p in params.items():
        a = p.grad if p.grad is not None else np.zeros_like(p.value)
        n = numeric[name]
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
        err = float(np.max(np.abs(a - n) / denom)) if a.size else 0.0
        worst = max(worst, err)
        if err > rtol:
            raise NumericError(f"gradient check failed for '{name}': rel err {err:.3e}")
    return worst


def make_params(arrays):
    """Wrap a dict of numpy arrays as trainable tensors."""
    return {k: Tensor(np.array(v, dtype=np.float64), requires_grad=True)
            for k, v in arrays.items()}
