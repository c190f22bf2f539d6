# vaml_lab/app/bootstrap.py
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from vaml_lab.app.garnet_cell import ExperimentRecord


@dataclass(frozen=True)
class BootstrapResult:
    mean: float
    lower: float
    upper: float


def _as_samples(samples: Sequence[float], what: str) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError(f"{what}: el bootstrap necesita al menos 2 muestras (hay {x.size})")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what}: hay muestras no finitas")
    return x


def bootstrap_ci(
    samples: Sequence[float],
    confidence: float = 0.95,
    n_resamples: int = 10000,
    rng: Optional[np.random.Generator] = None,
) -> BootstrapResult:
    """Intervalo percentil bootstrap de la media.

    Args:
        samples: Al menos dos valores finitos.
        confidence: Nivel de confianza.
        n_resamples: Remuestreos.
        rng: Flujo del arnés; por defecto uno fijo con semilla 0.

    Returns:
        BootstrapResult; el intervalo siempre contiene la media muestral.

    Raises:
        ValueError: Con menos de dos muestras.
    """
    x = _as_samples(samples, "bootstrap_ci")
    mean = float(np.mean(x))
    if np.ptp(x) == 0.0:
        return BootstrapResult(mean, mean, mean)
    res = stats.bootstrap(
        (x,),
        np.mean,
        confidence_level=confidence,
        n_resamples=n_resamples,
        method="percentile",
        random_state=rng if rng is not None else np.random.default_rng(0),
    )
    lo, hi = float(res.confidence_interval.low), float(res.confidence_interval.high)
    return BootstrapResult(mean, min(lo, mean), max(hi, mean))


def stratified_bootstrap_ci(
    strata: Sequence[Sequence[float]],
    confidence: float = 0.95,
    n_resamples: int = 10000,
    rng: Optional[np.random.Generator] = None,
) -> BootstrapResult:
    """Bootstrap percentil de la media de las medias por estrato.

    Cada estrato (celda, tarea) se remuestrea por separado; con un solo
    estrato coincide con `bootstrap_ci`.
    """
    if not strata:
        raise ValueError("stratified_bootstrap_ci: no hay estratos")
    groups = [_as_samples(s, f"estrato {i}") for i, s in enumerate(strata)]
    if len(groups) == 1:
        return bootstrap_ci(groups[0], confidence, n_resamples, rng)
    mean = float(np.mean([g.mean() for g in groups]))
    if all(np.ptp(g) == 0.0 for g in groups):
        return BootstrapResult(mean, mean, mean)

    def statistic(*xs, axis=-1):
        return np.mean([np.mean(x, axis=axis) for x in xs], axis=0)

    res = stats.bootstrap(
        tuple(groups),
        statistic,
        confidence_level=confidence,
        n_resamples=n_resamples,
        method="percentile",
        random_state=rng if rng is not None else np.random.default_rng(0),
    )
    lo, hi = float(res.confidence_interval.low), float(res.confidence_interval.high)
    return BootstrapResult(mean, min(lo, mean), max(hi, mean))


# --------------------------
# Resumen por celda
# --------------------------
CellKey = Tuple[float, int, str]


def final_metric(record: ExperimentRecord) -> float:
    """value_mse para Garnet; retorno de la última iteración para el cliffwalk."""
    if record.returns:
        return float(record.returns[-1])
    return float(record.value_mse)


def summarize_cells(
    records: Sequence[ExperimentRecord],
    confidence: float = 0.95,
    n_resamples: int = 2000,
    seed: int = 0,
) -> List[Tuple[CellKey, int, BootstrapResult]]:
    """Media e IC por celda (τ, rango, algoritmo), sin los registros fallidos.

    Returns:
        Lista ordenada como aparecen las celdas: (celda, n válidos, resultado).
        Las celdas con menos de dos registros válidos se omiten.
    """
    cells: Dict[CellKey, List[float]] = OrderedDict()
    for r in records:
        if r.failed:
            continue
        cells.setdefault((r.tau, r.rank, r.algorithm), []).append(final_metric(r))
    out: List[Tuple[CellKey, int, BootstrapResult]] = []
    for i, (key, values) in enumerate(cells.items()):
        if len(values) < 2:
            continue
        rng = np.random.default_rng([seed, i])
        out.append((key, len(values), bootstrap_ci(values, confidence, n_resamples, rng)))
    return out


def summarize_algorithms(
    records: Sequence[ExperimentRecord],
    confidence: float = 0.95,
    n_resamples: int = 2000,
    seed: int = 0,
) -> List[Tuple[str, BootstrapResult]]:
    """IC por algoritmo estratificado por celda (τ, rango)."""
    by_algo: Dict[str, Dict[Tuple[float, int], List[float]]] = OrderedDict()
    for r in records:
        if r.failed:
            continue
        by_algo.setdefault(r.algorithm, OrderedDict()).setdefault((r.tau, r.rank), []).append(final_metric(r))
    out: List[Tuple[str, BootstrapResult]] = []
    for i, (label, cells) in enumerate(by_algo.items()):
        strata = [v for v in cells.values() if len(v) >= 2]
        if not strata:
            continue
        rng = np.random.default_rng([seed, 1000 + i])
        out.append((label, stratified_bootstrap_ci(strata, confidence, n_resamples, rng)))
    return out
