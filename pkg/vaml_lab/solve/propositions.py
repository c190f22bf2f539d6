# vaml_lab/solve/propositions.py
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from vaml_lab.core.mdp import FiniteMdp, bellman_operator
from vaml_lab.model.low_rank import kernel_power
from vaml_lab.solve.g_objective import DiscreteInstance, g_min_closed_form, g_objective, g_objective_many
from vaml_lab.solve.simplex_grid import SimplexGrid


@dataclass(frozen=True)
class GMinResult:
    """Minimizador de g sobre una grilla del símplex."""

    q: np.ndarray
    value: float
    mean: float
    mean_matches: bool
    index: int


@dataclass(frozen=True)
class WitnessReport:
    """Minimizador sesgado de la pérdida sin calibrar en un estado."""

    state: int
    k: int
    true_mean: float
    uncalibrated_min_mean: float
    gap: float
    g_at_true: float
    g_min: float
    assumption_holds: bool

    @property
    def biased(self) -> bool:
        return self.g_min < self.g_at_true - 1e-12 and self.gap > 0.0


@dataclass(frozen=True)
class BiasReport:
    brm_minimizer: np.ndarray
    surrogate_minimizer: np.ndarray
    bias_norm: float


# --------------------------
# Oráculos por enumeración
# --------------------------
def tuple_table(probs: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Todas las tuplas de k índices con probabilidad positiva y su peso.

    Returns:
        (tuplas de forma (N, k), pesos de largo N que suman 1).
    """
    probs = np.asarray(probs, dtype=float)
    if k < 1:
        raise ValueError(f"k debe ser >= 1: {k}")
    support = np.flatnonzero(probs > 0.0)
    tuples = np.array(list(itertools.product(support, repeat=k)), dtype=np.int64).reshape(-1, k)
    return tuples, np.prod(probs[tuples], axis=1)


def expectation_over_tuples(fn: Callable[[np.ndarray], float], probs: np.ndarray, k: int) -> float:
    """E[fn(X_1..X_k)] con X_i i.i.d. ~ probs, por enumeración exhaustiva."""
    tuples, weights = tuple_table(probs, k)
    return float(sum(w * float(fn(t)) for t, w in zip(tuples, weights)))


def brute_force_g_min(
    instance: DiscreteInstance,
    grid: SimplexGrid,
    calibrated: bool = False,
    tolerance: Optional[float] = None,
    chunk_size: int = 4096,
) -> GMinResult:
    """Búsqueda exhaustiva del mínimo de g en la grilla.

    Los bloques se reducen en orden; ante empate gana el menor índice de grilla.

    Args:
        instance: Instancia (f, p, k).
        grid: Grilla sobre el mismo soporte.
        calibrated: Minimiza el objetivo sin el término Var_q/k.
        tolerance: Tolerancia para declarar E_q f = E_p f; por defecto una celda
            de la grilla, (max f − min f)/R.
        chunk_size: Tamaño de bloque de evaluación.

    Raises:
        ValueError: Si la grilla no corresponde al soporte de la instancia.
    """
    if grid.support_size != instance.support_size:
        raise ValueError(f"Grilla de soporte {grid.support_size} para una instancia de soporte {instance.support_size}")
    best_value, best_index, q = np.inf, -1, None
    for start, block in grid.chunks(chunk_size):
        values = g_objective_many(instance, block, calibrated=calibrated)
        local = int(np.argmin(values))
        if values[local] < best_value:
            best_value, best_index, q = float(values[local]), start + local, block[local]
    mean = float(q @ instance.f_values)
    if tolerance is None:
        spread = float(np.ptp(instance.f_values))
        tolerance = spread / grid.resolution if spread > 0.0 else 1e-12
    return GMinResult(q.copy(), best_value, mean, abs(mean - instance.true_mean) <= tolerance, best_index)


# --------------------------
# Mínimo sesgado de la pérdida sin calibrar
# --------------------------
def prop21_witness(mdp: FiniteMdp, v: np.ndarray, k: int, state: int = 0, m: int = 1) -> WitnessReport:
    """Reduce la pérdida de k muestras en `state` al problema de g y resuelve su mínimo.

    La fila P^m(·|state) hace de p y V de f. Si la instancia viola la
    suposición de que ningún f(x) coincide con E_p f, se informa en
    `assumption_holds` y el cálculo sigue.

    Raises:
        ValueError: Si el MDP tiene más de 6 estados.
    """
    if mdp.n_states > 6:
        raise ValueError(f"prop21_witness admite n <= 6: {mdp.n_states}")
    row = kernel_power(mdp.transition, m)[state]
    row = row / row.sum()
    instance = DiscreteInstance(np.asarray(v, dtype=float), row, k)
    min_mean, g_min = g_min_closed_form(instance)
    true_mean = instance.true_mean
    return WitnessReport(
        state=state,
        k=k,
        true_mean=true_mean,
        uncalibrated_min_mean=min_mean,
        gap=abs(min_mean - true_mean),
        g_at_true=g_objective(instance, instance.p),
        g_min=g_min,
        assumption_holds=instance.satisfies_assumption(),
    )


# --------------------------
# Dirección de descenso y sesgo del valor
# --------------------------
def lemma_a4_loss(f: np.ndarray, g: np.ndarray, mu: np.ndarray) -> float:
    """L(f) = E_μ[(f − g)²] + E_μ[f·g] − E_μ[f]·E_μ[g]."""
    f, g, mu = (np.asarray(a, dtype=float) for a in (f, g, mu))
    return float(mu @ (f - g) ** 2 + mu @ (f * g) - (mu @ f) * (mu @ g))


def lemma_a4_descent(g: np.ndarray, mu: np.ndarray) -> float:
    """dL(g − εg)/dε en ε = 0, igual a −Var_μ[g] (nunca positivo)."""
    g, mu = np.asarray(g, dtype=float), np.asarray(mu, dtype=float)
    if np.any(mu < 0.0) or abs(mu.sum() - 1.0) > 1e-9:
        raise ValueError("μ no es una distribución")
    centered = g - mu @ g
    return -float(mu @ centered**2)


def _weights(mdp: FiniteMdp, weights: Optional[np.ndarray]) -> np.ndarray:
    if weights is None:
        return np.full(mdp.n_states, 1.0 / mdp.n_states)
    w = np.asarray(weights, dtype=float)
    if w.shape != (mdp.n_states,) or np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("Los pesos de los estados de partida no forman una distribución")
    return w


def _surrogate_terms(mdp: FiniteMdp, v_tar: np.ndarray, weights: np.ndarray):
    """Probabilidad conjunta [x, ŷ, x2] y target r(ŷ) + γ V_tar(x2)."""
    p = mdp.transition
    # x1 solo entra a través de x2, así que se marginaliza: P(x2|x) = (P²)[x, x2]
    two_step = p @ p
    prob = weights[:, None, None] * p[:, :, None] * two_step[:, None, :]
    target = mdp.reward[:, None] + mdp.discount * np.asarray(v_tar, dtype=float)[None, :]
    return prob, target


def muzero_surrogate_expectation(
    mdp: FiniteMdp, v_hat: np.ndarray, v_tar: np.ndarray, weights: Optional[np.ndarray] = None
) -> float:
    """Esperanza enumerada de la pérdida (1,1) con el modelo perfecto.

    Suma sobre x ~ w, ŷ ~ P(·|x) y x2 ~ P²(·|x) de (V̂(ŷ) − r(ŷ) − γ V_tar(x2))².
    """
    w = _weights(mdp, weights)
    prob, target = _surrogate_terms(mdp, v_tar, w)
    sq = (np.asarray(v_hat, dtype=float)[:, None] - target) ** 2
    return float(np.einsum("xyc,yc->", prob, sq))


def prop23_value_bias(mdp: FiniteMdp, v_tar: np.ndarray, weights: Optional[np.ndarray] = None) -> BiasReport:
    """Minimizador tabular del sustituto MuZero frente a T V_tar.

    La pérdida enumerada es cuadrática y separable en V̂(y); el punto
    estacionario es r(y) + γ Σ_x w(x)P(y|x)(P²V_tar)(x) / Σ_x w(x)P(y|x).
    Los estados sin masa de predecesores quedan en el valor de Bellman.

    Raises:
        ValueError: Si el MDP tiene más de 8 estados.
    """
    if mdp.n_states > 8:
        raise ValueError(f"prop23_value_bias admite n <= 8: {mdp.n_states}")
    v_tar = np.asarray(v_tar, dtype=float)
    w = _weights(mdp, weights)
    p = mdp.transition
    brm = bellman_operator(mdp, v_tar, 1)
    mass = w @ p
    two_step_value = p @ (p @ v_tar)
    weighted = (w * two_step_value) @ p
    surrogate = brm.copy()
    reached = mass > 0.0
    surrogate[reached] = mdp.reward[reached] + mdp.discount * weighted[reached] / mass[reached]
    return BiasReport(brm, surrogate, float(np.max(np.abs(surrogate - brm))))


def prop23_grid_oracle(
    mdp: FiniteMdp, v_tar: np.ndarray, weights: Optional[np.ndarray] = None, step: float = 1e-4
) -> np.ndarray:
    """Minimiza el sustituto enumerado coordenada por coordenada sobre una grilla de V̂.

    Como el sustituto es separable por estado predicho, una pasada por
    coordenada alcanza el mínimo de la grilla.
    """
    v_tar = np.asarray(v_tar, dtype=float)
    w = _weights(mdp, weights)
    prob, target = _surrogate_terms(mdp, v_tar, w)
    lo, hi = float(target.min()) - 1.0, float(target.max()) + 1.0
    grid = np.arange(lo, hi + step, step)
    out = bellman_operator(mdp, v_tar, 1)
    for y in range(mdp.n_states):
        mass = prob[:, y, :].sum(axis=0)
        if mass.sum() <= 0.0:
            continue
        objective = ((grid[:, None] - target[y][None, :]) ** 2) @ mass
        out[y] = grid[int(np.argmin(objective))]
    return out
