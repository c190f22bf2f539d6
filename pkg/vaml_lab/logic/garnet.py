# vaml_lab/logic/garnet.py
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from vaml_lab.core.mdp import FiniteMdp

# Logit de los no-sucesores. No se divide por τ: con τ pequeño el "mínimo de
# punto flotante" desbordaría y la softmax daría NaN.
NON_SUCCESSOR_LOGIT: float = -1e30


@dataclass(frozen=True)
class GarnetSpec:
    """Parámetros de un problema Garnet.

    Attributes:
        n_states: Tamaño del espacio de estados n.
        n_successors: Sucesores k por estado (sin reemplazo).
        temperature: Temperatura τ de la softmax (τ pequeño ⇒ casi determinista).
        seed: Semilla de 64 bits.
        discount: Descuento γ del problema de evaluación.
    """

    n_states: int = 50
    n_successors: int = 10
    temperature: float = 1.0
    seed: int = 0
    discount: float = 0.9

    def __post_init__(self) -> None:
        if self.n_states < 1:
            raise ValueError(f"n_states debe ser >= 1: {self.n_states}")
        if not (1 <= self.n_successors <= self.n_states):
            raise ValueError(f"n_successors fuera de [1, {self.n_states}]: {self.n_successors}")
        if not (math.isfinite(self.temperature) and self.temperature > 0.0):
            raise ValueError(f"Temperatura inválida: {self.temperature}")


def garnet_logits(spec: GarnetSpec) -> np.ndarray:
    """Logits ω/τ del Garnet (fila = estado de origen), con centinela fuera del soporte.

    Se consumen los mismos números aleatorios para cualquier τ, así que dos specs
    que solo difieren en la temperatura comparten sucesores y pesos.
    """
    rng = np.random.default_rng([int(spec.seed) % 2**64, 0])
    n, k = spec.n_states, spec.n_successors
    logits = np.full((n, n), NON_SUCCESSOR_LOGIT)
    for state in range(n):
        successors = rng.choice(n, size=k, replace=False)
        weights = rng.standard_normal(k)
        logits[state, successors] = weights / spec.temperature
    return logits


def generate_garnet(spec: GarnetSpec) -> FiniteMdp:
    """Genera un Garnet: k sucesores por estado, pesos N(0,1), recompensas N(0,1).

    Args:
        spec: Parámetros del problema.

    Returns:
        FiniteMdp con filas softmax(ω/τ) y r(x) ~ N(0, 1). Determinista dado `spec`.
    """
    logits = garnet_logits(spec)
    transition = softmax(logits, axis=1)
    reward_rng = np.random.default_rng([int(spec.seed) % 2**64, 1])
    reward = reward_rng.standard_normal(spec.n_states)
    return FiniteMdp(transition, reward, spec.discount)


def random_mdp(rng: np.random.Generator, n_states: int, discount: float = 0.9, concentration: float = 1.0) -> FiniteMdp:
    """MDP denso pequeño: filas Dirichlet(concentration), recompensas N(0, 1).

    Lo usan los oráculos de verificación, donde interesa que todo sucesor tenga masa.
    """
    if n_states < 1:
        raise ValueError(f"n_states debe ser >= 1: {n_states}")
    transition = rng.dirichlet(np.full(n_states, concentration), size=n_states)
    reward = rng.standard_normal(n_states)
    return FiniteMdp(transition, reward, discount)
