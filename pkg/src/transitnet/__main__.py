"""Allow running the pipeline as ``python -m transitnet``."""

import sys

from .cli import main

sys.exit(main())
