# vaml_lab/model/optimizer.py
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Tuple

import numpy as np

from vaml_lab.model.low_rank import Gradients, LowRankModel


class DivergenceError(FloatingPointError):
    """Gradiente o pérdida no finita: el entrenamiento divergió."""


@dataclass(frozen=True)
class OptimizerState:
    """Estado de Adam por parámetro (momentos), paso y constantes."""

    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_update(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: OptimizerState,
) -> Tuple[Dict[str, np.ndarray], OptimizerState]:
    """Un paso de Adam sobre un diccionario de parámetros.

    Args:
        params: Parámetros por nombre.
        grads: Gradientes con las mismas claves y formas.
        state: Estado previo (no se modifica).

    Returns:
        (parámetros nuevos, estado nuevo).

    Raises:
        DivergenceError: Si algún gradiente no es finito.
        ValueError: Si claves o formas no calzan.
    """
    if params.keys() != grads.keys():
        raise ValueError(f"Claves distintas: {sorted(params)} vs {sorted(grads)}")
    step = state.step + 1
    new_params: Dict[str, np.ndarray] = {}
    m_out: Dict[str, np.ndarray] = dict(state.first_moment)
    v_out: Dict[str, np.ndarray] = dict(state.second_moment)
    for name, value in params.items():
        g = grads[name]
        if g.shape != value.shape:
            raise ValueError(f"Gradiente de '{name}' con forma {g.shape}, se esperaba {value.shape}")
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"Gradiente no finito en '{name}' (paso {step})")
        m = state.first_moment.get(name, np.zeros_like(value))
        v = state.second_moment.get(name, np.zeros_like(value))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**step)
        v_hat = v / (1.0 - state.beta2**step)
        new_params[name] = value - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        m_out[name] = m
        v_out[name] = v
    return new_params, replace(state, step=step, first_moment=m_out, second_moment=v_out)


def optimizer_step(
    model: LowRankModel, grads: Gradients, state: OptimizerState
) -> Tuple[LowRankModel, OptimizerState]:
    """Actualiza (φ, ψ) con Adam; gradiente cero deja los parámetros intactos."""
    params, state = adam_update(
        {"phi": model.phi, "psi": model.psi},
        {"phi": grads.d_phi, "psi": grads.d_psi},
        state,
    )
    return LowRankModel(params["phi"], params["psi"]), state
