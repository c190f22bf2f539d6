# vaml_lab/logic/cliffwalk.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from vaml_lab.core.mdp import ControlMdp

GRID_SIZE: int = 5
ACTIONS: List[str] = ["up", "down", "left", "right"]
MOVES: Dict[str, Tuple[int, int]] = {
    "up": (-1, 0),
    "down": (1, 0),
    "left": (0, -1),
    "right": (0, 1),
}

STEP_REWARD: float = -1.0
CLIFF_REWARD: float = -100.0
GOAL_REWARD: float = 0.0


@dataclass(frozen=True)
class CliffwalkSpec:
    """Cliffwalk 5x5 con deslizamiento.

    Attributes:
        move_prob: Probabilidad de moverse en la dirección elegida ("temp").
        discount: Descuento γ.
    """

    move_prob: float = 0.99
    discount: float = 0.9

    def __post_init__(self) -> None:
        if not (0.0 < self.move_prob <= 1.0):
            raise ValueError(f"move_prob fuera de (0, 1]: {self.move_prob}")
        if not (0.0 <= self.discount < 1.0):
            raise ValueError(f"Descuento fuera de [0, 1): {self.discount}")


def state_index(row: int, col: int) -> int:
    return row * GRID_SIZE + col


def state_coords(state: int) -> Tuple[int, int]:
    return state // GRID_SIZE, state % GRID_SIZE


START: int = state_index(GRID_SIZE - 1, 0)
GOAL: int = state_index(GRID_SIZE - 1, GRID_SIZE - 1)
CLIFF: Tuple[int, ...] = tuple(state_index(GRID_SIZE - 1, c) for c in range(1, GRID_SIZE - 1))


def action_index(name: str) -> int:
    """Índice de una acción por nombre ("up", "down", "left", "right").

    Raises:
        ValueError: Si la acción no existe.
    """
    name = name.strip().lower()
    if name not in MOVES:
        raise ValueError(f"Acción no soportada: {name}")
    return ACTIONS.index(name)


def _destination(state: int, direction: str) -> int:
    """Celda destino; salir de la grilla deja al agente en su lugar."""
    r, c = state_coords(state)
    dr, dc = MOVES[direction]
    r2, c2 = r + dr, c + dc
    if not (0 <= r2 < GRID_SIZE and 0 <= c2 < GRID_SIZE):
        return state
    return state_index(r2, c2)


def generate_cliffwalk(spec: CliffwalkSpec) -> ControlMdp:
    """Construye el cliffwalk 5x5: inicio abajo-izquierda, meta abajo-derecha.

    - La acción elegida se ejecuta con probabilidad `move_prob`; cada una de las
      otras tres direcciones recibe (1 − move_prob)/3.
    - Las celdas del acantilado (fila inferior entre inicio y meta) devuelven al
      inicio con recompensa −100.
    - La meta es absorbente con recompensa 0; el resto de las celdas da −1.

    Returns:
        ControlMdp con 25 estados y 4 acciones.
    """
    n = GRID_SIZE * GRID_SIZE
    slip = (1.0 - spec.move_prob) / 3.0
    transition = np.zeros((len(ACTIONS), n, n))
    reward = np.full(n, STEP_REWARD)
    reward[list(CLIFF)] = CLIFF_REWARD
    reward[GOAL] = GOAL_REWARD

    for a, intended in enumerate(ACTIONS):
        for state in range(n):
            if state == GOAL:
                transition[a, state, GOAL] = 1.0
                continue
            if state in CLIFF:
                transition[a, state, START] = 1.0
                continue
            for direction in ACTIONS:
                prob = spec.move_prob if direction == intended else slip
                transition[a, state, _destination(state, direction)] += prob

    return ControlMdp(transition, reward, spec.discount)
