#!/usr/bin/env python3
"""
Collision Census - command-line entry point

Usage: python census.py <subcommand> [flags]   (see --help)
"""
import sys

from collision_census.cli import main

if __name__ == "__main__":
    sys.exit(main())
