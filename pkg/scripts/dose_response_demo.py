"""Synthetic dose-response runs for each built-in GPU, plus the drift confound."""

import dataclasses

import numpy as np

from parkingtax.power import builtin_profiles
from parkingtax.reproduce import DOSE_SETUP
from parkingtax.stats import dose_response, dose_schedule, gen_telemetry, phases_from_samples, tost


def fit(profile, noise, levels, seed, drift=0.0):
    samples = gen_telemetry(profile, dose_schedule(levels), noise, drift_w_per_hr=drift, seed=seed)
    reg = dose_response(phases_from_samples(samples))
    return reg, tost(reg, 0.1)


def line(name, reg, eq):
    return (f"{name:<14} beta {reg.slope_w_per_gb:+.4f} W/GB  [{reg.ci95_lo:+.4f}, {reg.ci95_hi:+.4f}]  "
            f"p={reg.p_two_sided:.3f}  p_tost={eq.p_tost:.2g}")


if __name__ == "__main__":
    for p in builtin_profiles():
        noise, levels = DOSE_SETUP[p.name]
        print(line(p.name, *fit(p, noise, levels, seed=0)))
    a100 = dataclasses.replace(next(p for p in builtin_profiles() if p.name == "A100"), beta_w_per_gb=0.0)
    print("\nflat A100 with -0.026 W/hr thermal drift:")
    for seed in range(5):
        print(line(f"  seed {seed}", *fit(a100, 0.08, np.arange(0, 73, 8), seed, drift=-0.026)))
