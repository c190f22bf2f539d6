# vaml_lab/app/cli.py
from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from vaml_lab.app.bootstrap import summarize_algorithms, summarize_cells
from vaml_lab.app.config import ConfigError, load_pi_config, load_sweep_config, with_seed
from vaml_lab.app.results_csv import emit_results
from vaml_lab.app.sweep_worker import SweepRunner, summary_line
from vaml_lab.core.mdp import exact_value
from vaml_lab.logic.garnet import GarnetSpec, generate_garnet
from vaml_lab.solve.suite import run_verification_suite

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vaml_lab",
        description="Pérdidas de modelo conscientes del valor (VAML / CVAML) en MDPs finitos.",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Log en nivel DEBUG")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Solo advertencias y errores")
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="Corre la batería de verificación numérica")
    verify.add_argument("--seed", type=int, default=0, help="Semilla de las instancias aleatorias")

    for name, help_text in (
        ("garnet-sweep", "Barrido de estimación de valor en Garnets"),
        ("cliffwalk-pi", "Iteración de políticas con modelo en el cliffwalk"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="Archivo YAML de configuración")
        p.add_argument("--out", required=True, help="CSV de salida")
        p.add_argument("--jobs", type=int, default=1, help="Procesos en paralelo")
        p.add_argument("--seed", type=int, default=None, help="Reemplaza master_seed")
        p.add_argument("--summary", action="store_true", help="Imprime media ± IC por celda")

    exact = sub.add_parser("exact", help="Imprime la solución exacta de un Garnet")
    exact.add_argument("--n", type=int, default=50, help="Número de estados")
    exact.add_argument("--k", type=int, default=10, help="Sucesores por estado")
    exact.add_argument("--tau", type=float, default=1.0, help="Temperatura")
    exact.add_argument("--seed", type=int, default=0, help="Semilla del problema")
    exact.add_argument("--discount", type=float, default=0.9, help="Descuento γ")
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT)


def _cmd_verify(args: argparse.Namespace) -> int:
    results = run_verification_suite(seed=args.seed)
    width = max(len(r.name) for r in results)
    print(f"{'chequeo':<{width}}  estado  segundos  detalle")
    for r in results:
        print(f"{r.name:<{width}}  {'OK' if r.passed else 'FALLA':<6}  {r.seconds:8.2f}  {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def _print_summary(records) -> None:
    print("celda (tau, rango, algoritmo)          n     media          IC 95%")
    for (tau, rank, label), n, ci in summarize_cells(records):
        print(f"{tau:<10g} {rank:<5d} {label:<14s} {n:5d}  {ci.mean:12.6g}  [{ci.lower:.6g}, {ci.upper:.6g}]")
    print("algoritmo (estratificado por celda)")
    for label, ci in summarize_algorithms(records):
        print(f"{label:<14s}  {ci.mean:12.6g}  [{ci.lower:.6g}, {ci.upper:.6g}]")


def _progress_logger(every: int = 50):
    def on_progress(done: int, total: int) -> None:
        if done == total or done % every == 0:
            logger.info("Progreso: %d/%d", done, total)

    return on_progress


def _cmd_sweep(args: argparse.Namespace) -> int:
    loader = load_sweep_config if args.command == "garnet-sweep" else load_pi_config
    config = with_seed(loader(args.config), args.seed)
    runner = SweepRunner(config, jobs=args.jobs, on_progress=_progress_logger())
    records = runner.run()
    rows = emit_results(records, args.out)
    logger.info("Escritas %d filas en %s", rows, args.out)
    print(summary_line(records)[2])
    if args.summary:
        _print_summary(records)
    return 0


def _cmd_exact(args: argparse.Namespace) -> int:
    mdp = generate_garnet(GarnetSpec(args.n, args.k, args.tau, args.seed, args.discount))
    v = exact_value(mdp)
    print(f"V* (n={args.n}, k={args.k}, tau={args.tau:g}, semilla={args.seed}, gamma={args.discount:g})")
    for x, value in enumerate(v):
        print(f"{x:4d}  {value: .10f}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Punto de entrada de la línea de comandos.

    Returns:
        Código de salida: 0 si todo salió bien; 1 si falló la verificación;
        2 ante errores de configuración, de entrada/salida o de argumentos.
    """
    args = build_parser().parse_args(list(argv) if argv is not None else None)
    _configure_logging(args)
    commands = {
        "verify": _cmd_verify,
        "garnet-sweep": _cmd_sweep,
        "cliffwalk-pi": _cmd_sweep,
        "exact": _cmd_exact,
    }
    try:
        return commands[args.command](args)
    except (ConfigError, OSError, ValueError) as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
