"""Breakeven time and critical rate for every built-in GPU and loader."""

from parkingtax.power import builtin_loads, builtin_profiles
from parkingtax.sim import sweep_breakeven

if __name__ == "__main__":
    print(f"{'gpu':<6} {'loader':<20} {'tax W':>6} {'load kJ':>8} {'T* s':>7} {'λ* /hr':>7}")
    for r in sweep_breakeven(builtin_profiles(), builtin_loads()):
        print(f"{r['profile']:<6} {r['load']:<20} {r['park_w']:6.1f} {r['load_energy_j'] / 1e3:8.2f} "
              f"{r['t_star_s']:7.1f} {3600 / r['t_star_s']:7.1f}")
