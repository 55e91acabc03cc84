#!/usr/bin/env python
"""
Direct Python entry point for copwave.
This can be run from a checkout without installing the package.
"""

import sys
from pathlib import Path

# Add the src directory to the Python path
sys.path.insert(0, str(Path(__file__).parent / "src"))

try:
    from copula_wavelet.cli import main
except ImportError as e:
    print(f"Error importing CLI module: {e}")
    print("\nMake sure you have the required dependencies installed:")
    print("  pip install -r requirements.txt")
    sys.exit(1)

if __name__ == "__main__":
    main()
