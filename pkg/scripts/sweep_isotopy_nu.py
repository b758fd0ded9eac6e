#!/usr/bin/env python3
"""Sweep nu and record the worst Ricci value along both isotopy stages.

The construction works "for nu sufficiently small"; this sweep locates the
actual threshold. Writes out/isotopy_nu_sweep.csv.
"""

import csv
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

import numpy as np  # noqa: E402

from riccicert.constructions import (  # noqa: E402
    isotopy_stage1,
    isotopy_stage2,
    make_boundary_profile,
    make_isotopy_target,
)
from riccicert.errors import ConditionError, PreconditionError  # noqa: E402
from riccicert.verify import GridSpec  # noqa: E402

R, M, N, B1 = 2.0, 3, 3, 0.795


def main():
    out = ROOT / "out"
    out.mkdir(exist_ok=True)
    rows = []
    for nu in np.geomspace(0.002, 0.08, 12):
        try:
            profile = make_boundary_profile(R, nu, B1)
            target = make_isotopy_target(profile)
        except (ConditionError, PreconditionError) as exc:
            print(f"nu={nu:.4f}: synthesis failed: {exc}")
            continue
        p1 = isotopy_stage1(profile, target, M, N)
        p2 = isotopy_stage2(target.k1, target.h1, R, M, N)
        g1 = GridSpec.box([(0.0, 1.0, 32), (0.0, profile.T, 160)], depth=1)
        g2 = GridSpec.box([(1.0, 2.0, 32), (0.0, profile.T, 160)], depth=1)
        m1 = p1.min_ricci(g1).min_margin
        m2 = p2.min_ricci(g2).min_margin
        rows.append((nu, m1, m2))
        print(f"nu={nu:.4f}  stage1 {m1:+.5f}  stage2 {m2:+.5f}")

    with (out / "isotopy_nu_sweep.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("nu", "stage1_min_ricci", "stage2_min_ricci"))
        writer.writerows(rows)
    print(f"wrote {out / 'isotopy_nu_sweep.csv'}")


if __name__ == "__main__":
    main()
