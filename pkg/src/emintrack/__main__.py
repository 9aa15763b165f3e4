"""Allow `python -m emintrack`."""

import sys

from .cli import main

sys.exit(main())
