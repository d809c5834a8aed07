"""``python -m msfc``."""

import sys

from .cli import main

sys.exit(main())
