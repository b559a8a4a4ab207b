"""
Main entry point for running recdenoiser.

This script runs one command-line sub-command and exits with its code.
"""

import sys
from app import main

if __name__ == "__main__":
    sys.exit(main())
