#!/usr/bin/env python3
"""
Derived Brackets - higher derived brackets of graded Lie algebras with a splitting
Command-line entry point
"""

import sys
import os

# Add the current directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.cli.cli_interface import CLIInterface


def main():
    """Main entry point for the application"""
    cli = CLIInterface()
    sys.exit(cli.run(sys.argv[1:]))


if __name__ == "__main__":
    main()
