# vaml_lab/model/low_rank.py
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from vaml_lab.core.sampling import categorical


@dataclass(frozen=True)
class Gradients:
    """Gradientes respecto de las matrices factor (misma forma que el modelo)."""

    d_phi: np.ndarray
    d_psi: np.ndarray

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.d_phi)) and np.all(np.isfinite(self.d_psi)))

    @classmethod
    def zeros_like(cls, model: "LowRankModel") -> "Gradients":
        return cls(np.zeros_like(model.phi), np.zeros_like(model.psi))


@dataclass(frozen=True)
class LowRankModel:
    """Modelo de transición softmax de rango j.

    Representación:
        - `phi` y `psi` son matrices j×n.
        - El logit del sucesor i desde el estado l es ω̂[l, i] = φ_i · ψ_l
          (columna i de φ con columna l de ψ), es decir `logits = ψᵀ φ`.
        - La fila l del kernel predicho es softmax_i(ω̂[l, i]).
    """

    phi: np.ndarray
    psi: np.ndarray

    def __post_init__(self) -> None:
        if self.phi.shape != self.psi.shape or self.phi.ndim != 2:
            raise ValueError(f"Formas incompatibles: phi {self.phi.shape}, psi {self.psi.shape}")

    @property
    def rank(self) -> int:
        return self.phi.shape[0]

    @property
    def n_states(self) -> int:
        return self.phi.shape[1]

    def logits(self) -> np.ndarray:
        return self.psi.T @ self.phi

    def kernel(self) -> np.ndarray:
        """Kernel predicho completo (n×n), estabilizado restando el máximo por fila."""
        return softmax(self.logits(), axis=1)


def init_model(n: int, rank: int, init_scale: float, rng: np.random.Generator) -> LowRankModel:
    """Inicializa φ y ψ con entradas N(0, σ₀²); el kernel inicial queda casi uniforme.

    Args:
        n: Número de estados.
        rank: Rango j (1 <= j <= n).
        init_scale: Desviación estándar σ₀ > 0.
        rng: Flujo aleatorio.

    Raises:
        ValueError: Si el rango o la escala son inválidos.
    """
    if not (1 <= rank <= n):
        raise ValueError(f"Rango fuera de [1, {n}]: {rank}")
    if init_scale <= 0.0:
        raise ValueError(f"init_scale debe ser > 0: {init_scale}")
    phi = rng.normal(0.0, init_scale, size=(rank, n))
    psi = rng.normal(0.0, init_scale, size=(rank, n))
    return LowRankModel(phi, psi)


def predict_row(model: LowRankModel, state: int) -> np.ndarray:
    """Distribución predicha sobre sucesores de `state`."""
    if not (0 <= state < model.n_states):
        raise ValueError(f"Estado inválido: {state}")
    return softmax(model.psi[:, state] @ model.phi)


def sample_model(model: LowRankModel, state: int, m: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Muestrea k secuencias x̂^(1..m) del modelo desde `state`.

    Returns:
        Arreglo entero de forma (k, m).
    """
    if m < 1 or k < 1:
        raise ValueError(f"Se requiere m >= 1 y k >= 1 (m={m}, k={k})")
    kernel = model.kernel()
    out = np.empty((k, m), dtype=np.int64)
    for i in range(k):
        x = state
        for t in range(m):
            x = categorical(rng, kernel[x])
            out[i, t] = x
    return out


# --------------------------
# Productos vector-Jacobiano
# --------------------------
def softmax_vjp(probs: np.ndarray, d_probs: np.ndarray) -> np.ndarray:
    """dL/dlogits por fila: p ⊙ (g − <p, g>)."""
    inner = np.sum(probs * d_probs, axis=-1, keepdims=True)
    return probs * (d_probs - inner)


def logits_vjp(model: LowRankModel, d_logits: np.ndarray) -> Gradients:
    """Propaga dL/dω̂ hacia φ y ψ."""
    return Gradients(model.psi @ d_logits, model.phi @ d_logits.T)


def kernel_power(kernel: np.ndarray, m: int) -> np.ndarray:
    return np.linalg.matrix_power(kernel, m)


def kernel_power_vjp(kernel: np.ndarray, m: int, d_power: np.ndarray) -> np.ndarray:
    """dL/dP a partir de dL/dP^m: Σ_t (P^t)ᵀ G (P^{m-1-t})ᵀ."""
    if m < 1:
        raise ValueError(f"m debe ser >= 1: {m}")
    powers = [np.eye(kernel.shape[0])]
    for _ in range(m - 1):
        powers.append(powers[-1] @ kernel)
    d_kernel = np.zeros_like(kernel)
    for t in range(m):
        d_kernel += powers[t].T @ d_power @ powers[m - 1 - t].T
    return d_kernel


def kernel_vjp(model: LowRankModel, d_kernel: np.ndarray, kernel: np.ndarray | None = None) -> Gradients:
    """Gradiente respecto de (φ, ψ) dado dL/dP̂ del kernel de un paso."""
    if kernel is None:
        kernel = model.kernel()
    return logits_vjp(model, softmax_vjp(kernel, d_kernel))


def score_function_logits(kernel: np.ndarray, start: int, sequence: np.ndarray) -> np.ndarray:
    """∇_ω̂ log p̂(x̂^(1..m) | start) para una secuencia muestreada."""
    d_logits = np.zeros_like(kernel)
    prev = start
    for x in sequence:
        d_logits[prev] -= kernel[prev]
        d_logits[prev, x] += 1.0
        prev = int(x)
    return d_logits
