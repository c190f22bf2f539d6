# vaml_lab/losses/expected.py
from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np

from vaml_lab.core.mdp import FiniteMdp
from vaml_lab.losses.spec import LossReport, LossSpec
from vaml_lab.model.low_rank import LowRankModel, kernel_power, kernel_power_vjp, kernel_vjp


def itervaml_expectation(model: LowRankModel, mdp: FiniteMdp, v: np.ndarray, m: int, state: int) -> float:
    """|E_{p̂^m}[V] − E_{P^m}[V]|² en un estado, ambas esperanzas exactas."""
    if m < 1:
        raise ValueError(f"m debe ser >= 1: {m}")
    model_mean = kernel_power(model.kernel(), m)[state] @ v
    env_mean = kernel_power(mdp.transition, m)[state] @ v
    return float((model_mean - env_mean) ** 2)


def target_moments(mdp: FiniteMdp, v_tar: np.ndarray, b: int) -> Tuple[np.ndarray, np.ndarray]:
    """Primer y segundo momento del retorno bootstrapeado de b pasos desde cada estado.

    G_0(y) = V_tar(y), G_b(y) = r(y) + γ G_{b-1}(Y'), Y' ~ P(·|y).

    Returns:
        (E[G_b | y], E[G_b² | y]); la primera componente es T^b V_tar.
    """
    mean = np.asarray(v_tar, dtype=float).copy()
    second = mean**2
    r, gamma, p = mdp.reward, mdp.discount, mdp.transition
    for _ in range(b):
        next_mean = p @ mean
        second = r**2 + 2.0 * gamma * r * next_mean + gamma**2 * (p @ second)
        mean = r + gamma * next_mean
    return mean, second


def _env_kernel(mdp: FiniteMdp, m: int, first_step: Optional[np.ndarray]) -> np.ndarray:
    if first_step is None:
        return kernel_power(mdp.transition, m)
    if m != 1:
        raise ValueError("Un kernel de primer paso explícito solo se admite con m = 1")
    return np.asarray(first_step, dtype=float)


def _states(n: int, states: Optional[Sequence[int]]) -> np.ndarray:
    if states is None:
        return np.arange(n)
    return np.asarray(states, dtype=np.int64)


def expected_family_loss(
    model: LowRankModel,
    mdp: FiniteMdp,
    v_hat: np.ndarray,
    v_tar: np.ndarray,
    spec: LossSpec,
    states: Optional[Sequence[int]] = None,
    first_step: Optional[np.ndarray] = None,
) -> LossReport:
    """Esperanza exacta de la pérdida (m,b)-VAML de k muestras y sus gradientes.

    Por estado de partida x, con μ̂ = (P̂^m V̂)(x) y t̄ = E[G_b(x^(m))]:

        E[pérdida] = (μ̂ − t̄)² + c·Var_p̂[V̂] + Var_env[G_b]

    con c = 1/k sin calibrar y c = 0 calibrada. El agregado sobre el lote es la
    media aritmética. El término del entorno no depende de los parámetros.

    Args:
        model: Modelo aprendido.
        mdp: Entorno verdadero (kernel de la política y recompensas).
        v_hat: V̂ evaluada en los estados del modelo.
        v_tar: V_tar del target (para b = 0 el target es V_tar(x^(m))).
        spec: Miembro de la familia.
        states: Estados de partida del lote (todos por defecto).
        first_step: Kernel real del primer paso (control condicionado a acción, m = 1).

    Returns:
        LossReport con gradientes del modelo y, si corresponde, de V̂.
    """
    m, b, k = spec.m, spec.b, spec.k
    if m < 1:
        raise ValueError(f"La pérdida con modelo requiere m >= 1: {m}")
    batch = _states(mdp.n_states, states)
    scale = 1.0 / len(batch)
    c_var = 0.0 if spec.calibrated else 1.0 / k

    kernel = model.kernel()
    model_m = kernel_power(kernel, m)
    env_m = _env_kernel(mdp, m, first_step)
    t_mean, t_second = target_moments(mdp, v_tar, b)

    pm = model_m[batch]
    em = env_m[batch]
    mu_hat = pm @ v_hat
    var_model = pm @ v_hat**2 - mu_hat**2
    t_bar = em @ t_mean
    var_env = em @ t_second - t_bar**2

    per_state = (mu_hat - t_bar) ** 2 + c_var * var_model + var_env
    residual = mu_hat - t_bar

    d_model_m = np.zeros_like(model_m)
    d_model_m[batch] = scale * (
        2.0 * residual[:, None] * v_hat[None, :] + c_var * (v_hat[None, :] ** 2 - 2.0 * mu_hat[:, None] * v_hat[None, :])
    )
    model_grads = kernel_vjp(model, kernel_power_vjp(kernel, m, d_model_m), kernel)

    value_grads = None
    if spec.value_update == "muzero_joint":
        value_grads = scale * (
            2.0 * residual @ pm + c_var * (2.0 * v_hat * pm.sum(axis=0) - 2.0 * mu_hat @ pm)
        )
        if spec.update_real_state:
            # V̂ en el estado real x^(m) contra el mismo target
            per_state = per_state + em @ (v_hat**2 - 2.0 * v_hat * t_mean + t_second)
            value_grads = value_grads + scale * 2.0 * em.sum(axis=0) * (v_hat - t_mean)

    diagnostics = {"model_variance": var_model, "env_variance": var_env}
    return LossReport(float(scale * per_state.sum()), model_grads, value_grads, diagnostics)


def expected_vaml_loss(
    model: LowRankModel,
    mdp: FiniteMdp,
    v: np.ndarray,
    spec: LossSpec,
    states: Optional[Sequence[int]] = None,
    first_step: Optional[np.ndarray] = None,
) -> LossReport:
    """Esperanza exacta de la (m,0)-VAML de k muestras (IterVAML o CVAML)."""
    if spec.b != 0:
        raise ValueError(f"expected_vaml_loss requiere b = 0: {spec.b}")
    return expected_family_loss(model, mdp, v, v, spec, states, first_step)


def expected_muzero_loss(
    model: LowRankModel,
    mdp: FiniteMdp,
    v_hat: np.ndarray,
    v_tar: np.ndarray,
    spec: LossSpec,
    states: Optional[Sequence[int]] = None,
    first_step: Optional[np.ndarray] = None,
) -> LossReport:
    """Esperanza exacta de la (m,b≥1)-VAML estilo MuZero."""
    if spec.b < 1:
        raise ValueError(f"expected_muzero_loss requiere b >= 1: {spec.b}")
    return expected_family_loss(model, mdp, v_hat, v_tar, spec, states, first_step)
