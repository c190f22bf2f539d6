# vaml_lab/app/sweep_worker.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Callable, List, Optional, Sequence, Tuple, Union

from vaml_lab.app.config import AlgorithmSpec, PiConfig, SweepConfig
from vaml_lab.app.garnet_cell import ExperimentRecord, run_garnet_cell
from vaml_lab.app.policy_iteration import run_policy_iteration

logger = logging.getLogger(__name__)

OnProgressCallback = Callable[[int, int], None]
ShouldCancelCallback = Callable[[], bool]


@dataclass(frozen=True)
class SweepTask:
    """Una tarea (celda, problema); lleva todo lo que el proceso hijo necesita."""

    index: int
    config: Union[SweepConfig, PiConfig]
    outer: float
    rank: int
    algorithm: AlgorithmSpec
    problem_index: int


def _run_task(task: SweepTask) -> ExperimentRecord:
    if isinstance(task.config, SweepConfig):
        return run_garnet_cell(task.config, task.outer, task.rank, task.algorithm, task.problem_index)
    return run_policy_iteration(task.config, task.outer, task.rank, task.algorithm, task.problem_index)


def build_tasks(config: Union[SweepConfig, PiConfig]) -> List[SweepTask]:
    """Producto completo de la grilla en orden fijo: τ (o move_prob), rango, algoritmo, problema."""
    outer: Sequence[float] = config.temperature_grid if isinstance(config, SweepConfig) else config.move_prob_grid
    tasks: List[SweepTask] = []
    for value in outer:
        for rank in config.rank_grid:
            for algorithm in config.algorithms:
                for problem_index in range(config.n_problems):
                    tasks.append(SweepTask(len(tasks), config, float(value), int(rank), algorithm, problem_index))
    return tasks


class SweepRunner:
    """Ejecuta un barrido completo, en serie o con un pool de procesos.

    Los registros vuelven ordenados por índice de tarea para cualquier número de
    procesos, así que el CSV resultante no depende de `jobs`.

    Callbacks:
        on_progress(done, total): Se llama tras cada registro recibido.
        should_cancel(): Si retorna True, no se despachan más tareas y se
            devuelven los registros reunidos hasta ese momento.
    """

    def __init__(
        self,
        config: Union[SweepConfig, PiConfig],
        jobs: int = 1,
        on_progress: Optional[OnProgressCallback] = None,
        should_cancel: Optional[ShouldCancelCallback] = None,
    ) -> None:
        if jobs < 1:
            raise ValueError(f"jobs debe ser >= 1: {jobs}")
        self.config = config
        self.jobs = jobs
        self.on_progress = on_progress
        self.should_cancel = should_cancel
        self.cancelled = False

    def run(self) -> List[ExperimentRecord]:
        tasks = build_tasks(self.config)
        total = len(tasks)
        logger.info("Barrido de %d tareas con %d proceso(s)", total, self.jobs)
        records: List[ExperimentRecord] = []

        if self.jobs == 1:
            for task in tasks:
                if self._cancel_requested():
                    break
                records.append(_run_task(task))
                self._progress(len(records), total)
        else:
            with Pool(self.jobs) as pool:
                # imap conserva el orden de las tareas; chunksize=1 reparte de a una
                for record in pool.imap(_run_task, tasks, chunksize=1):
                    records.append(record)
                    self._progress(len(records), total)
                    if self._cancel_requested():
                        pool.terminate()
                        break

        logger.info(summary_line(records)[2])
        return records

    def _progress(self, done: int, total: int) -> None:
        if self.on_progress is not None:
            self.on_progress(done, total)

    def _cancel_requested(self) -> bool:
        if self.should_cancel is not None and self.should_cancel():
            self.cancelled = True
            logger.warning("Barrido cancelado")
            return True
        return False


def summary_line(records: Sequence[ExperimentRecord]) -> Tuple[int, int, str]:
    """(registros, fallidos, texto 'N registros, F fallidos')."""
    failed = sum(1 for r in records if r.failed)
    return len(records), failed, f"{len(records)} registros, {failed} fallidos"
