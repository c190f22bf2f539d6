# vaml_lab/core/mdp.py
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy import linalg

from vaml_lab.core.sampling import rollout

ROW_TOL = 1e-12


def _check_stochastic(matrix: np.ndarray, what: str) -> None:
    if np.any(matrix < 0.0) or not np.all(np.isfinite(matrix)):
        raise ValueError(f"{what}: hay entradas negativas o no finitas")
    sums = matrix.sum(axis=-1)
    if np.max(np.abs(sums - 1.0)) > ROW_TOL:
        raise ValueError(f"{what}: las filas no suman 1 (error {np.max(np.abs(sums - 1.0)):.3e})")


@dataclass(frozen=True)
class FiniteMdp:
    """Cadena de Markov con recompensa inducida por una política fija.

    Representación:
        - `transition[x, x']` es P^π(x'|x); cada fila es una distribución.
        - `reward[x]` es r(x) (recompensas solo de estado).
        - `discount` es γ en [0, 1).

    Es un objeto de valor inmutable: los arreglos se copian y se marcan como
    solo lectura al construir.
    """

    transition: np.ndarray
    reward: np.ndarray
    discount: float

    def __post_init__(self) -> None:
        p = np.array(self.transition, dtype=float)
        r = np.array(self.reward, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
            raise ValueError(f"Matriz de transición inválida: forma {p.shape}")
        if r.shape != (p.shape[0],):
            raise ValueError(f"Recompensa de largo {r.shape} para {p.shape[0]} estados")
        if not (0.0 <= self.discount < 1.0):
            raise ValueError(f"Descuento fuera de [0, 1): {self.discount}")
        _check_stochastic(p, "FiniteMdp")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]


@dataclass(frozen=True)
class ControlMdp:
    """MDP con acciones: `transition[a, x, x']` = P(x'|x, a)."""

    transition: np.ndarray
    reward: np.ndarray
    discount: float

    def __post_init__(self) -> None:
        p = np.array(self.transition, dtype=float)
        r = np.array(self.reward, dtype=float)
        if p.ndim != 3 or p.shape[1] != p.shape[2] or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"Tensor de transición inválido: forma {p.shape}")
        if r.shape != (p.shape[1],):
            raise ValueError(f"Recompensa de largo {r.shape} para {p.shape[1]} estados")
        if not (0.0 <= self.discount < 1.0):
            raise ValueError(f"Descuento fuera de [0, 1): {self.discount}")
        _check_stochastic(p, "ControlMdp")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return self.transition.shape[1]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[0]


@dataclass
class ValueTable:
    """Estimación tabular del valor y su copia congelada (target)."""

    values: np.ndarray
    target_values: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.values = np.array(self.values, dtype=float)
        if self.target_values is None:
            self.target_values = self.values.copy()
        else:
            self.target_values = np.array(self.target_values, dtype=float)
        if self.values.shape != self.target_values.shape:
            raise ValueError("values y target_values deben tener el mismo largo")
        if not (np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.target_values))):
            raise ValueError("La tabla de valores contiene entradas no finitas")

    @classmethod
    def zeros(cls, n_states: int) -> "ValueTable":
        return cls(np.zeros(n_states))

    def refresh_target(self) -> None:
        """Copia completa de `values` sobre `target_values`."""
        self.target_values = self.values.copy()


@dataclass(frozen=True)
class Trajectory:
    """Rollout del entorno: estados x^(0..L) y recompensas r^(0..L-1)."""

    states: Tuple[int, ...]
    rewards: Tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.states) != len(self.rewards) + 1:
            raise ValueError("Trayectoria inconsistente: se esperan L+1 estados y L recompensas")

    @property
    def length(self) -> int:
        return len(self.rewards)


# --------------------------
# Operadores y solvers exactos
# --------------------------
def exact_value(mdp: FiniteMdp) -> np.ndarray:
    """Resuelve (I − γP)V = r por factorización LU densa.

    Args:
        mdp: Problema de evaluación.

    Returns:
        V^π como vector de largo n.

    Raises:
        numpy.linalg.LinAlgError: Si la solución no cumple el residuo de Bellman
            (colapso numérico; no debería ocurrir con γ < 1).
    """
    n = mdp.n_states
    a = np.eye(n) - mdp.discount * mdp.transition
    lu, piv = linalg.lu_factor(a, check_finite=True)
    v = linalg.lu_solve((lu, piv), mdp.reward)
    residual = np.max(np.abs(v - bellman_operator(mdp, v, 1)))
    scale = max(1.0, float(np.max(np.abs(v))))
    if not np.isfinite(residual) or residual > 1e-10 * scale:
        raise np.linalg.LinAlgError(f"Residuo de Bellman {residual:.3e} tras la solución lineal")
    return v


def bellman_operator(mdp: FiniteMdp, v: np.ndarray, b: int) -> np.ndarray:
    """Aplica b veces el operador de Bellman: T^b V = r + γ P T^{b-1} V.

    Args:
        mdp: Problema.
        v: Vector de valores de largo n.
        b: Número de pasos (b = 0 devuelve una copia de `v`).

    Raises:
        ValueError: Si b < 0 o las dimensiones no calzan.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (mdp.n_states,):
        raise ValueError(f"Vector de valores de forma {v.shape}, se esperaba ({mdp.n_states},)")
    if b < 0:
        raise ValueError(f"Número de pasos negativo: {b}")
    out = v.copy()
    for _ in range(b):
        out = mdp.reward + mdp.discount * (mdp.transition @ out)
    return out


def sample_trajectory(mdp: FiniteMdp, start: int, length: int, rng: np.random.Generator) -> Trajectory:
    """Muestrea un rollout de largo L desde `start`.

    La recompensa r^(n) se lee en el estado visitado x^(n).
    """
    if not (0 <= start < mdp.n_states):
        raise ValueError(f"Estado inicial inválido: {start}")
    if length < 0:
        raise ValueError(f"Largo negativo: {length}")
    states = rollout(rng, mdp.transition, start, length)
    rewards = tuple(float(mdp.reward[x]) for x in states[:-1])
    return Trajectory(tuple(states), rewards)


def induce_policy_kernel(cmdp: ControlMdp, policy: np.ndarray) -> FiniteMdp:
    """P^π(x'|x) = Σ_a π(a|x) P(x'|x, a)."""
    policy = np.asarray(policy, dtype=float)
    if policy.shape != (cmdp.n_states, cmdp.n_actions):
        raise ValueError(f"Política de forma {policy.shape}, se esperaba {(cmdp.n_states, cmdp.n_actions)}")
    _check_stochastic(policy, "Política")
    kernel = np.einsum("xa,axy->xy", policy, cmdp.transition)
    # renormalización por redondeo acumulado en la suma
    kernel /= kernel.sum(axis=1, keepdims=True)
    return FiniteMdp(kernel, cmdp.reward, cmdp.discount)


def uniform_policy(cmdp: ControlMdp) -> np.ndarray:
    return np.full((cmdp.n_states, cmdp.n_actions), 1.0 / cmdp.n_actions)


def policy_evaluation(cmdp: ControlMdp, policy: np.ndarray) -> np.ndarray:
    """Evalúa exactamente una política sobre el MDP verdadero."""
    return exact_value(induce_policy_kernel(cmdp, policy))


def action_values(cmdp: ControlMdp, v: np.ndarray) -> np.ndarray:
    """Q(x, a) = r(x) + γ Σ_x' P(x'|x, a) V(x'), forma (n, n_actions)."""
    cont = np.einsum("axy,y->xa", cmdp.transition, v)
    return cmdp.reward[:, None] + cmdp.discount * cont


def greedy_policy(q: np.ndarray) -> np.ndarray:
    """Política determinista greedy; empates resueltos por el menor índice de acción."""
    policy = np.zeros_like(q)
    policy[np.arange(q.shape[0]), np.argmax(q, axis=1)] = 1.0
    return policy


def exact_policy_iteration(cmdp: ControlMdp, max_iterations: int = 1000) -> Tuple[np.ndarray, np.ndarray, List[np.ndarray]]:
    """Iteración de políticas exacta (oráculo).

    Args:
        cmdp: MDP de control.
        max_iterations: Tope de mejoras.

    Returns:
        (política final, valores, historial de vectores de valor por iteración).
    """
    policy = uniform_policy(cmdp)
    history: List[np.ndarray] = []
    for _ in range(max_iterations):
        v = policy_evaluation(cmdp, policy)
        history.append(v)
        new_policy = greedy_policy(action_values(cmdp, v))
        if np.array_equal(new_policy, policy):
            break
        policy = new_policy
    return policy, history[-1], history
