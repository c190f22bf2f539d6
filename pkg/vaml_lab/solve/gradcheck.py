# vaml_lab/solve/gradcheck.py
from __future__ import annotations

from typing import Callable, Tuple

import numpy as np

from vaml_lab.model.low_rank import Gradients, LowRankModel


def numerical_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Gradiente por diferencias centrales, entrada por entrada.

    Args:
        fn: Función escalar de un arreglo (no debe guardar referencias a `x`).
        x: Punto de evaluación; no se modifica.
        eps: Paso de la diferencia.

    Returns:
        Arreglo de la misma forma que `x`.
    """
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        plus = fn(x)
        flat[i] = orig - eps
        minus = fn(x)
        flat[i] = orig
        out[i] = (plus - minus) / (2.0 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """‖a − n‖ / max(‖a‖, ‖n‖, floor)."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    denom = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), floor)
    return float(np.linalg.norm(analytic - numeric)) / denom


def model_gradient_error(
    model: LowRankModel,
    loss_fn: Callable[[LowRankModel], Tuple[float, Gradients]],
    eps: float = 1e-5,
) -> float:
    """Error relativo entre el gradiente analítico de (φ, ψ) y diferencias centrales."""
    _, grads = loss_fn(model)
    num_phi = numerical_gradient(lambda phi: loss_fn(LowRankModel(phi, model.psi))[0], model.phi, eps)
    num_psi = numerical_gradient(lambda psi: loss_fn(LowRankModel(model.phi, psi))[0], model.psi, eps)
    analytic = np.concatenate([grads.d_phi.ravel(), grads.d_psi.ravel()])
    numeric = np.concatenate([num_phi.ravel(), num_psi.ravel()])
    return relative_error(analytic, numeric)
