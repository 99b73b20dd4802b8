"""Parameter containers, initializers, and the grad-check oracle."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor


class MissingGradientError(RuntimeError):
    """An optimizer step was requested before all gradients were populated."""


class ParamSet:
    """Named parameter tensors plus per-parameter Adam moments.

    The moment buffers always mirror the parameter shapes; `step` counts
    optimizer updates and is shared by all parameters of the set.
    """

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, values: np.ndarray) -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)
        self.params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list[str]:
        return list(self.params.keys())

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def n_values(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def copy_values(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.params.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for k, arr in values.items():
            if k not in self.params:
                raise KeyError(f"unknown parameter {k!r}")
            if self.params[k].data.shape != arr.shape:
                raise ValueError(f"shape mismatch for {k!r}")
            self.params[k].data = np.asarray(arr, dtype=np.float64).copy()


def dense_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform weights scaled by 1/sqrt(fan_in); the conventional default."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def embedding_init(rng: np.random.Generator, rows: int, width: int, std: float = 0.02) -> np.ndarray:
    return rng.normal(0.0, std, size=(rows, width))


def grad_check(fn: Callable[[], Tensor], params: ParamSet, step: float = 1e-5) -> float:
    """Max relative error between autodiff and central finite differences.

    `fn` must rebuild the scalar loss from `params` deterministically. All
    parameter entries are probed; non-finite values abort the check.
    """
    params.zero_grad()
    out = fn()
    if not np.isfinite(out.data).all():
        raise FloatingPointError("grad_check: non-finite function value")
    out.backward()
    analytic = {}
    for name, t in params.params.items():
        if t.grad is None:
            analytic[name] = np.zeros_like(t.data)
        else:
            analytic[name] = t.grad.copy()

    worst = 0.0
    for name, t in params.params.items():
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = float(fn().data)
            flat[i] = orig - step
            f_minus = float(fn().data)
            flat[i] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise FloatingPointError("grad_check: non-finite probe value")
            numeric = (f_plus - f_minus) / (2.0 * step)
            a = analytic[name].reshape(-1)[i]
            denom = max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, abs(a - numeric) / denom)
    params.zero_grad()
    return worst
