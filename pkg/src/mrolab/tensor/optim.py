"""Adam with bias correction over a ParamSet."""

from __future__ import annotations

import numpy as np

from .nn import MissingGradientError, ParamSet


def adam_step(
    params: ParamSet,
    learning_rate: float,
    betas: tuple[float, float] = (0.9, 0.999),
    epsilon: float = 1e-8,
) -> None:
    """One in-place Adam update; clears gradients afterwards.

    Every parameter must carry a gradient (a fully zero gradient is fine,
    a missing one is a bug in the caller's backward pass).
    """
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    b1, b2 = betas
    if not (0.0 < b1 < 1.0 and 0.0 < b2 < 1.0):
        raise ValueError("betas must lie in (0, 1)")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    missing = [k for k, t in params.params.items() if t.grad is None]
    if missing:
        raise MissingGradientError(f"missing gradients for: {', '.join(sorted(missing))}")

    params.step += 1
    t = params.step
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    for name, p in params.params.items():
        g = p.grad
        m = params.m[name]
        v = params.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= learning_rate * (m / corr1) / (np.sqrt(v / corr2) + epsilon)
        p.grad = None
