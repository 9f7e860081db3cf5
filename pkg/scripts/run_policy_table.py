"""Policy comparison over many seeds for the three default traffic patterns.

    python3 scripts/run_policy_table.py --seeds 20 --jobs 4 --out results/policies.csv
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from parkingtax.reproduce import DEFAULT_TRAFFIC, TABLE5_POLICIES, table5_runs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    rows = []
    for pattern in DEFAULT_TRAFFIC:
        runs = table5_runs(pattern, range(args.seeds), jobs=args.jobs)
        for i, pol in enumerate(TABLE5_POLICIES):
            res = [r[i] for r in runs]
            sav = np.array([r.savings_vs_always_on_pct for r in res])
            rows.append({
                "pattern": pattern,
                "policy": str(pol),
                "energy_wh": np.mean([r.energy_wh for r in res]),
                "savings_pct": sav.mean(),
                "savings_ci95": 1.96 * sav.std(ddof=1) / np.sqrt(len(sav)) if len(sav) > 1 else 0.0,
                "cold_starts": np.mean([r.cold_starts for r in res]),
                "latency_s": np.mean([r.avg_added_latency_s for r in res]),
            })

    print(f"{'pattern':<8} {'policy':<10} {'Wh':>8} {'save %':>12} {'cold':>7} {'lat s':>6}")
    for r in rows:
        print(f"{r['pattern']:<8} {r['policy']:<10} {r['energy_wh']:8.1f} "
              f"{r['savings_pct']:6.2f}±{r['savings_ci95']:4.2f} {r['cold_starts']:7.1f} {r['latency_s']:6.2f}")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
