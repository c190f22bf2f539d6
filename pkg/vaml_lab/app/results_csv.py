# vaml_lab/app/results_csv.py
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List

from vaml_lab.app.garnet_cell import ExperimentRecord

HEADER = ("problem_seed", "tau", "rank", "algorithm", "metric", "value", "step")


@dataclass(frozen=True)
class ResultRow:
    """Una fila del CSV de resultados."""

    problem_seed: int
    tau: float
    rank: int
    algorithm: str
    metric: str
    value: float
    step: int

    def as_fields(self) -> List[str]:
        # repr de float es la representación decimal más corta que vuelve al mismo double
        return [str(self.problem_seed), repr(self.tau), str(self.rank), self.algorithm, self.metric, repr(self.value), str(self.step)]


def record_rows(records: Iterable[ExperimentRecord]) -> List[ResultRow]:
    """Aplana los registros a filas, en orden."""
    rows: List[ResultRow] = []
    for r in records:
        for metric, value, step in r.metric_rows():
            rows.append(ResultRow(int(r.problem_seed), float(r.tau), int(r.rank), r.algorithm, metric, float(value), int(step)))
    return rows


def emit_results(records: Iterable[ExperimentRecord], path: str | Path) -> int:
    """Escribe el CSV (UTF-8, fin de línea LF, floats de precisión completa).

    Returns:
        Número de filas de datos escritas.

    Raises:
        OSError: Si no se puede escribir; el mensaje incluye la ruta.
    """
    path = Path(path)
    rows = record_rows(records)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(HEADER)
            for row in rows:
                writer.writerow(row.as_fields())
    except OSError as exc:
        raise OSError(f"No se pudo escribir {path}: {exc.strerror or exc}") from exc
    return len(rows)


def read_results(path: str | Path) -> List[ResultRow]:
    """Lee un CSV escrito por `emit_results`.

    Raises:
        OSError: Si no se puede leer.
        ValueError: Si el encabezado o una fila no respetan el formato.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or tuple(header) != HEADER:
                raise ValueError(f"{path}: encabezado inesperado {header}")
            rows: List[ResultRow] = []
            for lineno, fields in enumerate(reader, start=2):
                if len(fields) != len(HEADER):
                    raise ValueError(f"{path}:{lineno}: se esperaban {len(HEADER)} columnas, hay {len(fields)}")
                seed, tau, rank, algorithm, metric, value, step = fields
                rows.append(ResultRow(int(seed), float(tau), int(rank), algorithm, metric, float(value), int(step)))
    except OSError as exc:
        raise OSError(f"No se pudo leer {path}: {exc.strerror or exc}") from exc
    return rows
