# vaml_lab/losses/td.py
from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np


def td_loss(
    v_hat: np.ndarray,
    v_tar: np.ndarray,
    x: int,
    x_next: int,
    reward: float,
    gamma: float,
) -> Tuple[float, np.ndarray]:
    """Error TD al cuadrado con target congelado r + γ V_tar(x').

    `x_next` puede venir del entorno (TD libre de modelo) o del modelo (TD
    basado en modelo); el gradiente solo es distinto de cero en la entrada x.

    Returns:
        (pérdida, gradiente respecto de V̂).
    """
    n = len(v_hat)
    if not (0 <= x < n and 0 <= x_next < n):
        raise ValueError(f"Estados inválidos: x={x}, x_next={x_next}")
    delta = float(v_hat[x]) - (reward + gamma * float(v_tar[x_next]))
    grad = np.zeros(n)
    grad[x] = 2.0 * delta
    return delta**2, grad


def expected_td_loss(
    kernel: np.ndarray,
    reward: np.ndarray,
    gamma: float,
    v_hat: np.ndarray,
    v_tar: np.ndarray,
    states: Optional[Sequence[int]] = None,
) -> Tuple[float, np.ndarray]:
    """Esperanza exacta del TD de un paso con x' ~ kernel(·|x), promediada sobre el lote.

    E[(V̂(x) − r(x) − γV_tar(x'))²] = (V̂(x) − r(x) − γ(KV_tar)(x))² + γ² Var_K[V_tar].

    Args:
        kernel: Kernel de sucesores (del modelo para TD basado en modelo, real si no).
        reward: r(x) verdadera.
        gamma: Descuento.
        v_hat: Estimación actual.
        v_tar: Target congelado.
        states: Lote de estados (todos por defecto).

    Returns:
        (pérdida media, gradiente respecto de V̂).
    """
    n = len(v_hat)
    batch = np.arange(n) if states is None else np.asarray(states, dtype=np.int64)
    cont = kernel[batch] @ v_tar
    var = kernel[batch] @ v_tar**2 - cont**2
    delta = v_hat[batch] - reward[batch] - gamma * cont
    loss = np.mean(delta**2 + gamma**2 * var)
    grad = np.zeros(n)
    np.add.at(grad, batch, 2.0 * delta / len(batch))
    return float(loss), grad
