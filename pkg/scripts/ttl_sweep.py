"""Savings and cold starts as a function of a fixed idle timeout, with T* marked.

Shows that the breakeven timeout sits near the knee rather than being a strict
optimum under non-memoryless traffic.
"""

import argparse

import numpy as np

from parkingtax.breakeven import breakeven_time
from parkingtax.power import get_load, get_profile, parking_tax
from parkingtax.reproduce import DEFAULT_TRAFFIC
from parkingtax.sim import AlwaysOn, FixedTTL, compare_policies

ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
ap.add_argument("--pattern", choices=sorted(DEFAULT_TRAFFIC), default="bursty")
ap.add_argument("--seeds", type=int, default=10)
ap.add_argument("--profile", default="h100")
args = ap.parse_args()

profile, load = get_profile(args.profile), get_load("pytorch-70b")
t_star = breakeven_time(parking_tax(profile), load)
ttls = sorted(set(np.geomspace(30, 7200, 14).round().tolist()) | {round(t_star, 1)})
policies = [AlwaysOn()] + [FixedTTL(t) for t in ttls]
traces = [DEFAULT_TRAFFIC[args.pattern].generate(s) for s in range(args.seeds)]
runs = [compare_policies(profile, load, tr, policies) for tr in traces]

print(f"{args.pattern}, {profile.name}, T* = {t_star:.1f} s, {args.seeds} seeds")
for i, ttl in enumerate(ttls, start=1):
    sav = np.mean([r[i].savings_vs_always_on_pct for r in runs])
    cold = np.mean([r[i].cold_starts for r in runs])
    mark = "  <- T*" if abs(ttl - t_star) < 0.1 else ""
    print(f"ttl {ttl:8.1f} s  savings {sav:6.2f}%  cold starts {cold:6.1f}{mark}")
