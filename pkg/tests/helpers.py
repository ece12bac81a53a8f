"""Shared test oracles: central finite differences and error metrics.

The differencing here is intentionally independent of the autodiff backward
path; it only re-evaluates forward passes at perturbed parameter values.
"""

import numpy as np


def finite_difference_grads(loss_fn, params, h: float = 1e-5):
    """Central-difference gradient of ``loss_fn()`` wrt each Tensor in params.

    ``loss_fn`` must re-run the forward computation from the tensors' current
    ``.data``; entries are perturbed in place and restored.
    """
    grads = []
    for p in params:
        grad = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(loss_fn())
            flat[i] = orig - h
            down = float(loss_fn())
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(grad)
    return grads


def max_rel_error(analytic, numeric) -> float:
    """Worst relative gradient discrepancy over all parameter entries."""
    worst = 0.0
    for a, b in zip(analytic, numeric):
        if a is None:
            a = np.zeros_like(b)
        err = np.abs(a - b) / (np.abs(a) + np.abs(b) + 1e-4)
        worst = max(worst, float(err.max()))
    return worst


def check_gradients(build_loss, params, tol: float = 1e-4, h: float = 1e-5) -> float:
    """Backward pass vs finite differences; returns the worst relative error.

    ``build_loss`` constructs a fresh scalar loss Tensor from the params'
    current data each call.
    """
    for p in params:
        p.grad = None
    loss = build_loss()
    loss.backward()
    analytic = [p.grad for p in params]
    numeric = finite_difference_grads(lambda: build_loss().data, params, h=h)
    err = max_rel_error(analytic, numeric)
    assert err < tol, f"gradient mismatch: max relative error {err:.3e} >= {tol}"
    return err
