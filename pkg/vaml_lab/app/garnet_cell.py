# vaml_lab/app/garnet_cell.py
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from vaml_lab.app.config import AlgorithmSpec, SweepConfig, TrainingConfig
from vaml_lab.core.mdp import FiniteMdp, ValueTable, exact_value, sample_trajectory
from vaml_lab.logic.garnet import generate_garnet
from vaml_lab.losses.expected import expected_muzero_loss, expected_vaml_loss
from vaml_lab.losses.kl import kl_loss, kl_loss_batch
from vaml_lab.losses.sampled import muzero_loss, sampled_vaml_loss
from vaml_lab.losses.spec import LossReport
from vaml_lab.losses.td import expected_td_loss, td_loss
from vaml_lab.model.low_rank import Gradients, LowRankModel, init_model, sample_model
from vaml_lab.model.optimizer import DivergenceError, OptimizerState, adam_update, optimizer_step

logger = logging.getLogger(__name__)

# Fallas numéricas que se registran en vez de abortar el barrido
TRAINING_FAILURES = (DivergenceError, FloatingPointError, np.linalg.LinAlgError)


@dataclass
class ExperimentRecord:
    """Resultado de una tarea del barrido.

    Un registro Garnet tiene `value_mse`; uno de iteración de políticas tiene
    `returns` (retorno exacto por iteración, empezando por la política uniforme).
    En ese caso `tau` guarda el move_prob de la celda.
    """

    problem_seed: int
    tau: float
    rank: int
    algorithm: str
    value_mse: float = math.nan
    returns: Tuple[float, ...] = ()
    steps: int = 0
    wall_time: float = 0.0
    failed: bool = False
    error: str = ""

    def metric_rows(self) -> Tuple[Tuple[str, float, int], ...]:
        """(métrica, valor, paso) por fila del CSV."""
        if self.returns:
            return tuple(("return", float(r), i) for i, r in enumerate(self.returns))
        return (("value_mse", float(self.value_mse), self.steps),)


def derive_problem_seed(master_seed: int, problem_index: int) -> int:
    """Semilla de 64 bits del problema, derivada de (master_seed, problem_index).

    No depende de τ, rango ni algoritmo: todas las celdas comparten los mismos
    problemas y la misma inicialización, y las comparaciones quedan pareadas.
    """
    seq = np.random.SeedSequence([int(master_seed), int(problem_index)])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass
class Learner:
    """Modelo, tabla de valores y estados de Adam de una corrida."""

    model: LowRankModel
    values: ValueTable
    model_opt: OptimizerState
    value_opt: OptimizerState
    last_loss: float = math.nan
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def create(cls, n_states: int, rank: int, training: TrainingConfig, rng: np.random.Generator) -> "Learner":
        return cls(
            model=init_model(n_states, rank, training.init_scale, rng),
            values=ValueTable.zeros(n_states),
            model_opt=make_optimizer(training, training.learning_rate),
            value_opt=make_optimizer(training, training.value_learning_rate),
        )

    def apply(self, model_grads: Optional[Gradients], value_grads: Optional[np.ndarray]) -> None:
        if model_grads is not None:
            self.model, self.model_opt = optimizer_step(self.model, model_grads, self.model_opt)
        if value_grads is not None:
            params, self.value_opt = adam_update({"values": self.values.values}, {"values": value_grads}, self.value_opt)
            self.values.values = params["values"]


def make_optimizer(training: TrainingConfig, learning_rate: float) -> OptimizerState:
    return OptimizerState(learning_rate=learning_rate, beta1=training.beta1, beta2=training.beta2, eps=training.eps)


def _check(loss: float, report: Optional[LossReport] = None) -> None:
    finite = math.isfinite(loss) and (report is None or report.is_finite())
    if not finite:
        raise DivergenceError(f"Pérdida o gradiente no finito (pérdida={loss})")


# --------------------------
# Pasos de entrenamiento
# --------------------------
def exact_step(learner: Learner, mdp: FiniteMdp, algorithm: AlgorithmSpec) -> None:
    """Un paso con las pérdidas en esperanza exacta sobre todos los estados."""
    spec = algorithm.loss
    model_grads: Optional[Gradients] = None
    value_grads: Optional[np.ndarray] = None
    v_hat, v_tar = learner.values.values, learner.values.target_values

    if spec.updates_model:
        if algorithm.model_loss == "kl":
            loss, model_grads = kl_loss_batch(learner.model, mdp.transition)
            _check(loss)
        else:
            if spec.b == 0:
                report = expected_vaml_loss(learner.model, mdp, v_hat, spec)
            else:
                report = expected_muzero_loss(learner.model, mdp, v_hat, v_tar, spec)
            _check(report.loss_value, report)
            loss, model_grads, value_grads = report.loss_value, report.model_grads, report.value_grads
            learner.diagnostics = report.diagnostics
        learner.last_loss = loss

    if spec.value_update in ("td_model_based", "td_model_free"):
        kernel = learner.model.kernel() if spec.value_update == "td_model_based" else mdp.transition
        td, value_grads = expected_td_loss(kernel, mdp.reward, mdp.discount, v_hat, v_tar)
        _check(td)
    elif spec.value_update == "none":
        value_grads = None

    learner.apply(model_grads, value_grads)


def sampled_step(learner: Learner, mdp: FiniteMdp, algorithm: AlgorithmSpec, rng: np.random.Generator) -> None:
    """Un paso con un estado uniforme, un rollout real y k muestras del modelo."""
    spec = algorithm.loss
    x = int(rng.integers(mdp.n_states))
    trajectory = sample_trajectory(mdp, x, max(spec.m + spec.b, 1), rng)
    model_grads: Optional[Gradients] = None
    value_grads: Optional[np.ndarray] = None
    v_hat, v_tar = learner.values.values, learner.values.target_values

    if spec.updates_model:
        if algorithm.model_loss == "kl":
            loss, model_grads = kl_loss(learner.model, mdp, x)
            _check(loss)
        else:
            if spec.b == 0:
                report = sampled_vaml_loss(learner.model, v_hat, spec, trajectory, rng)
            else:
                report = muzero_loss(learner.model, mdp, v_hat, v_tar, spec, trajectory, rng)
            _check(report.loss_value, report)
            loss, model_grads, value_grads = report.loss_value, report.model_grads, report.value_grads
        learner.last_loss = loss

    if spec.value_update in ("td_model_based", "td_model_free"):
        if spec.value_update == "td_model_based":
            x_next = int(sample_model(learner.model, x, 1, 1, rng)[0, 0])
        else:
            x_next = trajectory.states[1]
        td, value_grads = td_loss(v_hat, v_tar, x, x_next, float(mdp.reward[x]), mdp.discount)
        _check(td)
    elif spec.value_update == "none":
        value_grads = None

    learner.apply(model_grads, value_grads)


def train_evaluation(
    learner: Learner,
    mdp: FiniteMdp,
    algorithm: AlgorithmSpec,
    training: TrainingConfig,
    rng: np.random.Generator,
) -> Learner:
    """Entrena modelo y valor intercalados paso a paso; el target se refresca cada
    `target_update_period` pasos.

    Raises:
        DivergenceError: Si una pérdida o un gradiente deja de ser finito.
    """
    for step in range(1, training.steps + 1):
        if training.estimator == "exact":
            exact_step(learner, mdp, algorithm)
        else:
            sampled_step(learner, mdp, algorithm, rng)
        if step % training.target_update_period == 0:
            learner.values.refresh_target()
    return learner


def run_garnet_cell(
    config: SweepConfig, tau: float, rank: int, algorithm: AlgorithmSpec, problem_index: int
) -> ExperimentRecord:
    """Entrena una celda Garnet y mide el MSE del valor contra la solución exacta.

    La política es fija (uniforme) y la recompensa sale del MDP verdadero.

    Args:
        config: Barrido al que pertenece la celda.
        tau: Temperatura del Garnet.
        rank: Rango j del modelo.
        algorithm: Algoritmo de la grilla.
        problem_index: Índice del problema dentro de la celda.

    Returns:
        ExperimentRecord; si el entrenamiento diverge, `failed=True` y `value_mse` NaN.
    """
    t0 = time.perf_counter()
    problem_seed = derive_problem_seed(config.master_seed, problem_index)
    record = ExperimentRecord(problem_seed, float(tau), int(rank), algorithm.label, steps=config.training.steps)
    try:
        mdp = generate_garnet(replace(config.garnet, temperature=float(tau), seed=problem_seed))
        v_star = exact_value(mdp)
        rng = np.random.default_rng([problem_seed, 2])
        learner = Learner.create(mdp.n_states, rank, config.training, rng)
        train_evaluation(learner, mdp, algorithm, config.training, rng)
        mse = float(np.mean((learner.values.values - v_star) ** 2))
        if not math.isfinite(mse):
            raise DivergenceError(f"MSE no finito: {mse}")
        record.value_mse = mse
    except TRAINING_FAILURES as exc:
        record.failed = True
        record.error = f"{type(exc).__name__}: {exc}"
        logger.warning("Celda fallida: semilla %d, τ=%g, rango %d, %s: %s", problem_seed, tau, rank, algorithm.label, exc)
    record.wall_time = time.perf_counter() - t0
    return record
