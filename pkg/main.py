"""
Prediction with unpredictable feature evolution:
✓ One-pass row-space sketching and completion of partially observed rows
✓ Projected online gradient descent in the old and new feature spaces
✓ Parameter-free expert ensemble over the base models
✓ Seeded experiments across complete, incomplete and completed overlaps

Usage:
    python main.py run --config run.env --out results
    python main.py simulate --setting IC --out results
    python main.py complete matrix.csv --out results
"""

import sys

from pufe.main import main

if __name__ == "__main__":
    sys.exit(main())
