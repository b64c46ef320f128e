"""Stochastic OT lab - Entry Point."""
import sys

from app.cli.runner import main

if __name__ == "__main__":
    sys.exit(main())
