"""Sweep random table classifiers over small grids and report the worst Lipschitz ratio.

    python scripts/lipschitz_sweep.py --trials 200 --out sweep.csv
"""
import argparse
import csv
import sys
import time
from dataclasses import dataclass, field

from dssn.oracle import JOINTS, random_table_sweep


@dataclass
class SweepConfig:
    qs: list = field(default_factory=lambda: [2, 4, 8])
    d: int = 2
    trials: int = 200
    num_classes: int = 3
    joints: tuple = JOINTS

    def grids(self):
        for q in self.qs:
            for L in sorted({q, 2 * q} | ({5 * q // 4} if (5 * q) % 4 == 0 else set())):
                yield q, L


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qs", type=int, nargs="+", default=[2, 4, 8])
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--out", help="CSV with one row per (q, L, joint)")
    args = ap.parse_args(argv)
    cfg = SweepConfig(qs=args.qs, d=args.d, trials=args.trials)

    rows = []
    for q, L in cfg.grids():
        for joint in cfg.joints:
            t0 = time.perf_counter()
            seed = q * 1000 + L
            reports = random_table_sweep(q, L, cfg.d, cfg.trials, seed, cfg.num_classes, joint)
            table_seed, worst = max(reports, key=lambda t: t[1].max_violation_ratio)
            rows.append({
                "q": q, "L": L, "joint": joint, "trials": cfg.trials,
                "max_ratio": str(worst.max_violation_ratio),
                "all_hold": all(r.holds for _, r in reports),
                "worst_table_seed": table_seed,
                "witness": worst.witness_pair,
                "seconds": round(time.perf_counter() - t0, 3),
            })
            print(f"q={q:<2} L={L:<3} {joint:<12} max ratio {rows[-1]['max_ratio']:<5} "
                  f"hold={rows[-1]['all_hold']} ({rows[-1]['seconds']}s)")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return 0 if all(r["all_hold"] for r in rows) else 2


if __name__ == "__main__":
    sys.exit(main())
