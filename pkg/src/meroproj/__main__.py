"""Command-line entry point."""

import sys

from meroproj.cli import main

sys.exit(main())
