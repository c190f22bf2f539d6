# vaml_lab/losses/kl.py
from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import rel_entr

from vaml_lab.core.mdp import FiniteMdp
from vaml_lab.model.low_rank import Gradients, LowRankModel, logits_vjp


def kl_rows(target: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """KL(p‖p̂) por fila con la convención 0·log 0 = 0.

    Raises:
        FloatingPointError: Si p̂ = 0 donde p > 0.
    """
    kl = rel_entr(target, predicted).sum(axis=-1)
    if not np.all(np.isfinite(kl)):
        raise FloatingPointError("El modelo asigna probabilidad 0 a un sucesor con masa real")
    return kl


def kl_loss_batch(
    model: LowRankModel,
    target: np.ndarray,
    states: Optional[Sequence[int]] = None,
) -> Tuple[float, Gradients]:
    """Media de KL(p_x‖p̂_x) sobre el lote; dL/dω̂_x = (p̂_x − p_x)/|lote|."""
    n = model.n_states
    batch = np.arange(n) if states is None else np.asarray(states, dtype=np.int64)
    predicted = model.kernel()
    loss = float(kl_rows(target[batch], predicted[batch]).mean())
    d_logits = np.zeros_like(predicted)
    d_logits[batch] = (predicted[batch] - target[batch]) / len(batch)
    return loss, logits_vjp(model, d_logits)


def kl_loss(model: LowRankModel, mdp: FiniteMdp, state: int) -> Tuple[float, Gradients]:
    """KL entre la fila verdadera de `state` y la del modelo (línea base con oráculo)."""
    return kl_loss_batch(model, mdp.transition, [state])
