"""Finite-difference gradient oracle shared by the numerics tests.

Central differences with h=1e-3 in 64-bit; relative error uses
|a - n| / max(|a| + |n|, 1e-6) so tiny gradients don't explode the ratio.
"""

import numpy as np

from taxfill.autodiff import Tensor, no_grad


def numeric_gradient(forward, t: Tensor, h: float = 1e-3) -> np.ndarray:
    """d forward() / d t by central differences, perturbing t in place."""
    grad = np.zeros_like(t.data)
    flat = t.data.reshape(-1)
    gflat = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            up = float(forward().data)
            flat[i] = original - h
            down = float(forward().data)
            flat[i] = original
            gflat[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
    return float((np.abs(analytic - numeric) / denom).max())


def assert_gradients_match(forward, tensors, tol: float = 1e-4, h: float = 1e-3):
    """Backprop through forward() once and compare every tensor's gradient
    against the finite-difference oracle."""
    for t in tensors:
        t.grad = None
    loss = forward()
    loss.backward()
    for i, t in enumerate(tensors):
        assert t.grad is not None, f"tensor {i} got no gradient"
        err = relative_error(t.grad, numeric_gradient(forward, t, h))
        assert err <= tol, f"tensor {i}: gradient mismatch, rel err {err:.3g}"
