"""Generate an offline dataset (and exact grid counts) for the configured environment."""

import os
import sys

# Add repo root to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.solver.commands import main


if __name__ == '__main__':
    sys.exit(main(['gen-data', *sys.argv[1:]]))
