# vaml_lab/solve/g_objective.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

ASSUMPTION_TOL: float = 1e-9


@dataclass(frozen=True)
class DiscreteInstance:
    """Instancia discreta (f, p, k) sobre la que se define g.

    Attributes:
        f_values: f(x) para cada punto del soporte.
        p: Distribución "verdadera".
        k: Número de muestras del estimador de la media.
    """

    f_values: np.ndarray
    p: np.ndarray
    k: int

    def __post_init__(self) -> None:
        f = np.asarray(self.f_values, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if f.ndim != 1 or f.shape != p.shape:
            raise ValueError(f"f y p deben ser vectores del mismo largo ({f.shape} vs {p.shape})")
        if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("p no es una distribución")
        if self.k < 1:
            raise ValueError(f"k debe ser >= 1: {self.k}")
        object.__setattr__(self, "f_values", f)
        object.__setattr__(self, "p", p)

    @property
    def support_size(self) -> int:
        return self.f_values.shape[0]

    @property
    def true_mean(self) -> float:
        return float(self.p @ self.f_values)

    @property
    def true_variance(self) -> float:
        return float(self.p @ (self.f_values - self.true_mean) ** 2)

    def satisfies_assumption(self, tol: float = ASSUMPTION_TOL) -> bool:
        """Ningún punto del soporte tiene f(x) = E_p[f] (dentro de `tol`)."""
        return bool(np.all(np.abs(self.f_values - self.true_mean) > tol))


def g_objective_many(instance: DiscreteInstance, q: np.ndarray, calibrated: bool = False) -> np.ndarray:
    """g evaluada en cada fila de `q` (forma (N, n)), por definición directa.

    Con `calibrated=True` se omite el término Var_q/k (objetivo de la CVAML).
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    f, p = instance.f_values, instance.p
    means = q @ f
    deviation = (means[:, None] - f[None, :]) ** 2 @ p
    if calibrated:
        return deviation
    variance = ((f[None, :] - means[:, None]) ** 2 * q).sum(axis=1)
    return deviation + variance / instance.k


def g_objective(instance: DiscreteInstance, q: np.ndarray) -> float:
    """g(q) = E_{x~p}[(E_q f − f(x))²] + Var_q[f]/k.

    Raises:
        ValueError: Si q no es una distribución sobre el soporte.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != instance.p.shape or np.any(q < 0.0) or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("q no es una distribución sobre el soporte de la instancia")
    return float(g_objective_many(instance, q)[0])


def g_min_closed_form(instance: DiscreteInstance) -> Tuple[float, float]:
    """Mínimo de g sobre todas las distribuciones del soporte.

    Para una media μ entre dos valores adyacentes a < b de f, la menor varianza
    alcanzable es (μ − a)(b − μ) (masa en a y b). Se minimiza por tramos
    h(μ) = (μ − E_p f)² + (μ − a)(b − μ)/k; los empates se resuelven a favor de
    la media más cercana a E_p f.

    Returns:
        (media del minimizador, valor mínimo de g).
    """
    values = np.unique(instance.f_values)
    m_p, k = instance.true_mean, instance.k
    var_p = instance.true_variance
    if values.size == 1:
        return float(values[0]), var_p

    best_mu, best_h = m_p, np.inf
    for a, b in zip(values[:-1], values[1:]):
        candidates = [a, b]
        if k > 1:
            mu_star = (2.0 * k * m_p - (a + b)) / (2.0 * (k - 1))
            if a < mu_star < b:
                candidates.append(mu_star)
        if a < m_p < b:
            candidates.append(m_p)
        for mu in candidates:
            h = (mu - m_p) ** 2 + (mu - a) * (b - mu) / k
            closer = abs(mu - m_p) < abs(best_mu - m_p)
            if h < best_h - 1e-15 or (abs(h - best_h) <= 1e-15 and closer):
                best_mu, best_h = float(mu), h
    return best_mu, var_p + best_h
