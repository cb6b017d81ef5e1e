"""Finite-difference verification of tape gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tape, Tensor


def grad_check(fn, params: list[Tensor], step: float = 1e-5) -> float:
    """Compare tape gradients of a scalar-valued fn against central differences.

    fn is called with no arguments and must rebuild its graph from the current
    contents of ``params`` each time. Returns the max relative error over all
    coordinates of all params.
    """
    for p in params:
        p.grad = None
    with Tape() as tape:
        loss = fn()
    if loss.data.ndim != 0:
        raise ValueError("grad_check needs a scalar-valued function")
    tape.backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]

    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = float(fn().data)
            flat[i] = orig - step
            down = float(fn().data)
            flat[i] = orig
            num = (up - down) / (2.0 * step)
            a = ana.reshape(-1)[i]
            denom = max(abs(num), abs(a), 1e-8)
            worst = max(worst, abs(num - a) / denom)
    return worst
