"""
Main entry point when running as module: python -m peerfx
"""

import sys

from .main import main

if __name__ == "__main__":
    sys.exit(main())
