"""Fleet-scale annual parking energy and CO2."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from parkingtax import DomainError

HOURS_PER_YEAR = 8760.0
# Back-solved from ~180 kT CO2 at the 462 GWh/yr base case (US grid average).
DEFAULT_GRID_KG_PER_KWH = 0.39


@dataclass(frozen=True)
class FleetScenario:
    n_gpus: float
    utilization: float
    park_w: float
    hours_per_year: float = HOURS_PER_YEAR
    grid_intensity_kg_per_kwh: float = DEFAULT_GRID_KG_PER_KWH

    def __post_init__(self):
        if not 0 <= self.utilization <= 1:
            raise DomainError(f"utilization must be in [0, 1], got {self.utilization}")
        if self.n_gpus < 0:
            raise DomainError("n_gpus must be >= 0")
        if not self.park_w > 0:
            raise DomainError("park_w must be > 0")
        if self.hours_per_year < 0:
            raise DomainError("hours_per_year must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "FleetScenario":
        return cls(**d)


def annual_parking_energy(s: FleetScenario) -> float:
    """Idle-with-context energy of the fleet in GWh/year."""
    wh = s.n_gpus * (1.0 - s.utilization) * s.park_w * s.hours_per_year
    return wh / 1e9


def co2(energy_gwh: float, intensity_kg_per_kwh: float = DEFAULT_GRID_KG_PER_KWH) -> float:
    """Kilotonnes CO2 for an annual energy at a grid intensity."""
    if energy_gwh < 0 or intensity_kg_per_kwh < 0:
        raise DomainError("energy and intensity must be >= 0")
    return energy_gwh * 1e6 * intensity_kg_per_kwh / 1e6


TABLE4_LOW = FleetScenario(2.0e6, 0.80, 26.3)
TABLE4_BASE = FleetScenario(3.76e6, 0.65, 40.0)
TABLE4_HIGH = FleetScenario(6.0e6, 0.50, 66.4)


def sensitivity_grid(low: FleetScenario, base: FleetScenario, high: FleetScenario) -> list[dict]:
    """Low/base/high corners, one row per parameter plus the resulting energy.

    Corners must be ordered in the energy-increasing direction, so the low
    corner carries the highest utilization.
    """
    checks = [
        ("n_gpus", low.n_gpus, base.n_gpus, high.n_gpus),
        ("idle_fraction", 1 - low.utilization, 1 - base.utilization, 1 - high.utilization),
        ("park_w", low.park_w, base.park_w, high.park_w),
        ("hours_per_year", low.hours_per_year, base.hours_per_year, high.hours_per_year),
    ]
    for name, lo, mid, hi in checks:
        if not lo <= mid <= hi:
            raise DomainError(f"sensitivity corners out of order for {name}: {lo}, {mid}, {hi}")
    corners = (low, base, high)
    rows = [
        {"parameter": "n_gpus", "low": low.n_gpus, "base": base.n_gpus, "high": high.n_gpus},
        {"parameter": "utilization", "low": low.utilization, "base": base.utilization,
         "high": high.utilization},
        {"parameter": "park_w", "low": low.park_w, "base": base.park_w, "high": high.park_w},
    ]
    energies = [annual_parking_energy(s) for s in corners]
    rows.append({"parameter": "e_park_gwh", **dict(zip(("low", "base", "high"), energies))})
    rows.append({"parameter": "co2_kt", **{
        k: co2(e, s.grid_intensity_kg_per_kwh)
        for k, e, s in zip(("low", "base", "high"), energies, corners)
    }})
    return rows


def scenario_report(s: FleetScenario) -> dict:
    e = annual_parking_energy(s)
    return {
        "scenario": asdict(s),
        "e_park_gwh": e,
        "e_park_gwh_rounded": round(e),
        "co2_kt": co2(e, s.grid_intensity_kg_per_kwh),
        "grid_intensity_note": ("default back-derived from 180 kT at 462 GWh"
                                if s.grid_intensity_kg_per_kwh == DEFAULT_GRID_KG_PER_KWH else "user supplied"),
    }
