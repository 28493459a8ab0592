"""Analytic-vs-finite-difference gradient verification."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .params import NetworkParams

LossAndGrad = Callable[[NetworkParams], tuple[float, NetworkParams]]

# Below this magnitude the error is measured absolutely (relative error of a
# vanishing gradient is meaningless).
REL_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    worst_index: tuple[int, ...]
    analytic: float
    numeric: float
    checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def relative_error(a, n) -> np.ndarray:
    a, n = np.asarray(a, dtype=np.float64), np.asarray(n, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), REL_FLOOR)


def grad_check(loss_and_grad: LossAndGrad, params: NetworkParams, tolerance: float = 1e-4,
               eps: float = 1e-5, max_entries: int | None = None,
               rng: np.random.Generator | None = None, refine: bool = True) -> GradCheckReport:
    """Compare ``loss_and_grad``'s gradient to central differences in float64.

    ``max_entries`` caps the number of coordinates probed per tensor (chosen with
    ``rng``); ``None`` probes every coordinate. With ``refine`` a coordinate that
    misses the tolerance is probed again with step ``eps / 100`` and the closer
    estimate is kept: a ReLU kink inside the probe interval biases the wider
    difference while a wrong gradient stays wrong at every step size.
    """
    params = params.astype(np.float64)
    _, analytic = loss_and_grad(params)
    rng = rng or np.random.default_rng(0)
    worst = GradCheckReport(0.0, "", (), 0.0, 0.0, 0, tolerance)
    checked = 0
    for name in params.names():
        tensor = params.tensors[name]
        flat_idx = np.arange(tensor.size)
        if max_entries is not None and tensor.size > max_entries:
            flat_idx = np.sort(rng.choice(tensor.size, size=max_entries, replace=False))
        for k in flat_idx:
            idx = np.unravel_index(int(k), tensor.shape)
            a = float(analytic.tensors[name][idx])
            numeric = _central_difference(loss_and_grad, params, tensor, idx, eps)
            err = float(relative_error(a, numeric))
            if refine and err > tolerance:
                fine = _central_difference(loss_and_grad, params, tensor, idx, eps / 100)
                fine_err = float(relative_error(a, fine))
                if fine_err < err:
                    numeric, err = fine, fine_err
            checked += 1
            if err > worst.max_rel_error or not worst.worst_param:
                worst = GradCheckReport(err, name, tuple(int(i) for i in idx), a, float(numeric), 0, tolerance)
    worst.checked = checked
    return worst


def _central_difference(loss_and_grad: LossAndGrad, params: NetworkParams, tensor: np.ndarray, idx, eps: float) -> float:
    original = tensor[idx]
    tensor[idx] = original + eps
    plus, _ = loss_and_grad(params)
    tensor[idx] = original - eps
    minus, _ = loss_and_grad(params)
    tensor[idx] = original
    return float((plus - minus) / (2 * eps))
