import sys
from pathlib import Path

# Allow running the suite from a source checkout without installing.
ROOT = Path(__file__).resolve().parent.parent
for p in (ROOT / "src", ROOT / "tests"):
    if str(p) not in sys.path:
        sys.path.insert(0, str(p))
