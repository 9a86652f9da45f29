"""Allow running the command line interface with python -m uavlab."""
import sys

from .cli import main

sys.exit(main())
