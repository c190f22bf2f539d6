# vaml_lab/core/sampling.py
from __future__ import annotations

import numpy as np


def categorical(rng: np.random.Generator, probs: np.ndarray, size: int | None = None) -> np.ndarray | int:
    """Muestrea índices de una distribución categórica por CDF inversa.

    Args:
        rng: Flujo aleatorio explícito (cada llamador trae el suyo).
        probs: Vector de probabilidades (no negativo, suma 1).
        size: Cantidad de muestras; None devuelve un entero.

    Returns:
        Índice (o arreglo de índices) en [0, len(probs)).
    """
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    u = rng.random(size)
    idx = np.searchsorted(cdf, u, side="right")
    idx = np.minimum(idx, len(probs) - 1)
    if size is None:
        return int(idx)
    return idx


def rollout(rng: np.random.Generator, kernel: np.ndarray, start: int, steps: int) -> list[int]:
    """Genera una secuencia de estados siguiendo una matriz de transición."""
    states = [int(start)]
    for _ in range(steps):
        states.append(categorical(rng, kernel[states[-1]]))
    return states
