#!/usr/bin/env python3
"""Run every scenario in scenarios/ and print a one-line summary per run."""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from riccicert.cli import run_scenario  # noqa: E402


def main():
    out_root = ROOT / "out"
    worst = 0
    for scenario in sorted((ROOT / "scenarios").glob("*.json")):
        code, report = run_scenario(scenario, out_root / scenario.stem)
        status = {0: "ok", 1: "FAILED CERTIFICATE", 2: "PARSE ERROR",
                  3: "PRECONDITION"}[code]
        print(f"{scenario.name:32s} exit {code}  {status}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
