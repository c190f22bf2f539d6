# main.py
from __future__ import annotations

import sys
from typing import NoReturn

from vaml_lab.app.cli import main as cli_main


def main() -> NoReturn:
    """Punto de entrada de la aplicación.

    Delega en la línea de comandos (`vaml_lab.app.cli`) y termina el proceso
    con su código de salida.
    """
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
