#!/usr/bin/env python3
"""
EV Incentive Router
Entry point for the application.
"""

import sys
import os

# Add the repository root to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

# Import and run the main application
from src.core.main import main

if __name__ == "__main__":
    sys.exit(main())
