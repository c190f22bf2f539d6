# vaml_lab/__main__.py
import sys

from vaml_lab.app.cli import main

sys.exit(main())
