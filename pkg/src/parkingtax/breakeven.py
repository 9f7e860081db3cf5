"""Cold-start energy breakeven and the critical arrival rate for keep-warm decisions.

Rates are requests/second internally; helpers convert to requests/hour for display.
"""

from __future__ import annotations

from dataclasses import dataclass

from parkingtax import DomainError
from parkingtax.power import LoadProfile, load_energy

SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class BreakevenResult:
    t_star_s: float
    lambda_star_per_s: float
    park_w: float
    load_energy_j: float

    @property
    def t_star_min(self) -> float:
        return self.t_star_s / 60.0

    @property
    def lambda_star_per_hr(self) -> float:
        return self.lambda_star_per_s * SECONDS_PER_HOUR


def _check(park_w: float) -> None:
    if not park_w > 0:
        raise DomainError(f"park_w must be > 0, got {park_w}")


def breakeven_time(park_w: float, load: LoadProfile) -> float:
    """Idle time (s) after which evicting and reloading costs less than staying warm.

    Staged profiles contribute their exact total energy, so a constant profile is
    just the single-stage case.
    """
    _check(park_w)
    return load_energy(load) / park_w


def critical_rate(park_w: float, load: LoadProfile) -> float:
    _check(park_w)
    return park_w / load_energy(load)


def keep_warm_decision(arrival_rate_per_s: float, park_w: float, load: LoadProfile) -> bool:
    if arrival_rate_per_s < 0:
        raise DomainError("arrival rate must be >= 0")
    return arrival_rate_per_s > critical_rate(park_w, load)


def breakeven(park_w: float, load: LoadProfile) -> BreakevenResult:
    e = load_energy(load)
    return BreakevenResult(breakeven_time(park_w, load), critical_rate(park_w, load), park_w, e)


def per_hour(rate_per_s: float) -> float:
    return rate_per_s * SECONDS_PER_HOUR


def per_second(rate_per_hr: float) -> float:
    return rate_per_hr / SECONDS_PER_HOUR
