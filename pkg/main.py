#!/usr/bin/env python3
"""
Run the kcr command line from a checkout.

Usage:
    poetry run python main.py sim --out results/
    poetry run python main.py convert labels/ boxes.json --from dota --to rotated-json
"""

import sys

from src.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
