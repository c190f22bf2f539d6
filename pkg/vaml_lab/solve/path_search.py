# vaml_lab/solve/path_search.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Set, Tuple

import numpy as np

from vaml_lab.core.mdp import ControlMdp

OnDepthCallback = Callable[[int], None]
ShouldCancelCallback = Callable[[], bool]


@dataclass(frozen=True)
class PathResult:
    """Camino más corto a la meta y su retorno descontado."""

    actions: Tuple[int, ...]
    states: Tuple[int, ...]
    discounted_return: float


def _successors(cmdp: ControlMdp) -> np.ndarray:
    """Tabla determinista (acción, estado) → sucesor.

    Raises:
        ValueError: Si alguna transición no es determinista.
    """
    if not np.all(np.isclose(cmdp.transition.max(axis=2), 1.0, rtol=0.0, atol=1e-12)):
        raise ValueError("La búsqueda exhaustiva requiere transiciones deterministas (move_prob = 1)")
    return np.argmax(cmdp.transition, axis=2)


def _path_return(cmdp: ControlMdp, states: List[int]) -> float:
    """Σ_t γ^t r(x_t) hasta la meta, más el valor absorbente r(meta)/(1 − γ)."""
    gamma = cmdp.discount
    total = 0.0
    for t, x in enumerate(states[:-1]):
        total += gamma**t * float(cmdp.reward[x])
    goal = states[-1]
    return total + gamma ** (len(states) - 1) * float(cmdp.reward[goal]) / (1.0 - gamma)


def brute_force_optimal_return(
    cmdp: ControlMdp,
    start: int,
    goal: int,
    max_depth: int = 16,
    on_depth: Optional[OnDepthCallback] = None,
    should_cancel: Optional[ShouldCancelCallback] = None,
) -> Optional[PathResult]:
    """Busca el camino más corto a la meta con IDDFS (profundidad iterativa).

    El límite de profundidad crece desde 1 hasta `max_depth`; en el primer límite
    con solución se recorren todos los caminos de ese largo y se devuelve el de
    mayor retorno (el primero encontrado ante empate). Dentro de una rama no se
    repiten estados, así que quedarse en el lugar o volver al inicio se poda.

    Es el retorno óptimo cuando todo paso fuera de la meta cuesta lo mismo, como
    en el cliffwalk determinista.

    Args:
        cmdp: MDP de control con transiciones deterministas.
        start: Estado inicial.
        goal: Estado meta (absorbente).
        max_depth: Largo máximo de camino a probar.
        on_depth: Callback opcional con la profundidad actual.
        should_cancel: Callback opcional de cancelación.

    Returns:
        PathResult, o None si no hay camino dentro de `max_depth` o se canceló.

    Raises:
        ValueError: Si las transiciones no son deterministas.
    """
    successors = _successors(cmdp)
    if start == goal:
        return PathResult((), (start,), _path_return(cmdp, [start]))

    for depth_limit in range(1, max_depth + 1):
        if should_cancel is not None and should_cancel():
            return None

        if on_depth is not None:
            on_depth(depth_limit)

        best: List[Optional[PathResult]] = [None]
        _dfs(cmdp, successors, goal, depth_limit, [], [start], {start}, best, should_cancel)
        if best[0] is not None:
            return best[0]

    return None


def _dfs(
    cmdp: ControlMdp,
    successors: np.ndarray,
    goal: int,
    remaining: int,
    actions: List[int],
    states: List[int],
    seen_on_path: Set[int],
    best: List[Optional[PathResult]],
    should_cancel: Optional[ShouldCancelCallback] = None,
) -> None:
    """DFS limitado en profundidad; deja en `best[0]` el mejor camino que llega a la meta."""
    if should_cancel is not None and should_cancel():
        return

    if states[-1] == goal:
        ret = _path_return(cmdp, states)
        if best[0] is None or ret > best[0].discounted_return:
            best[0] = PathResult(tuple(actions), tuple(states), ret)
        return

    if remaining == 0:
        return

    for a in range(cmdp.n_actions):
        child = int(successors[a, states[-1]])

        # Evitar ciclos dentro de la misma rama
        if child in seen_on_path:
            continue

        actions.append(a)
        states.append(child)
        seen_on_path.add(child)

        _dfs(cmdp, successors, goal, remaining - 1, actions, states, seen_on_path, best, should_cancel)

        # Backtrack
        seen_on_path.remove(child)
        states.pop()
        actions.pop()
