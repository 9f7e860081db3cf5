"""Event-driven simulation of one GPU serving one model under an eviction policy.

The model is warm at t=0. Requests are served instantly while warm; service
time and service energy are not modeled since they are identical across
policies. A request that finds the model evicted starts a load; requests that
arrive mid-load wait for the same load. Once the last queued request is
served the policy's idle timer starts, and the model is evicted on expiry.

Energy is integrated exactly over the resulting piecewise-constant timeline.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from parkingtax import DomainError
from parkingtax.breakeven import breakeven_time, critical_rate
from parkingtax.power import GpuProfile, LoadProfile, parking_tax
from parkingtax.traffic import ArrivalTrace

WARM, EVICTED, LOADING = "warm", "evicted", "loading"


@dataclass(frozen=True)
class AlwaysOn:
    def __str__(self):
        return "always-on"


@dataclass(frozen=True)
class FixedTTL:
    ttl_s: float

    def __post_init__(self):
        if not self.ttl_s > 0:
            raise DomainError("TTL must be > 0")

    def __str__(self):
        return f"ttl:{self.ttl_s:g}"


@dataclass(frozen=True)
class Breakeven:
    """Fixed TTL equal to the breakeven time of the simulated profile and loader."""

    def __str__(self):
        return "breakeven"


@dataclass(frozen=True)
class RateThreshold:
    """Keep warm while an exponentially-weighted arrival-rate estimate exceeds the
    critical rate; evict as soon as it decays below.

    Not one of the evaluated policies, an extension of the keep-warm rule.
    """

    window_s: float = 3600.0
    initial_rate_per_s: float = 0.0

    def __post_init__(self):
        if not self.window_s > 0:
            raise DomainError("rate window must be > 0")

    def __str__(self):
        return f"rate:{self.window_s:g}"


@dataclass(frozen=True)
class Hysteresis:
    """Two timeouts. Switch to the long one after a premature eviction (the model
    came back within ``ttl_high_s`` of going idle) and back to the short one after
    an idle gap that outlasts ``ttl_high_s``."""

    ttl_low_s: float
    ttl_high_s: float

    def __post_init__(self):
        if not 0 < self.ttl_low_s <= self.ttl_high_s:
            raise DomainError("need 0 < ttl_low_s <= ttl_high_s")

    def __str__(self):
        return f"hysteresis:{self.ttl_low_s:g},{self.ttl_high_s:g}"


Policy = AlwaysOn | FixedTTL | Breakeven | RateThreshold | Hysteresis


def parse_policy(text: str) -> Policy:
    """Parse ``always-on``, ``ttl:<s>``, ``breakeven``, ``rate:<window_s>`` or
    ``hysteresis:<lo>,<hi>``."""
    name, _, arg = text.strip().lower().partition(":")
    try:
        if name in ("always-on", "alwayson", "always_on"):
            return AlwaysOn()
        if name == "breakeven":
            return Breakeven()
        if name == "ttl":
            return FixedTTL(float(arg))
        if name == "rate":
            return RateThreshold(float(arg)) if arg else RateThreshold()
        if name == "hysteresis":
            lo, hi = arg.split(",")
            return Hysteresis(float(lo), float(hi))
    except ValueError as e:
        raise DomainError(f"bad policy {text!r}: {e}") from None
    raise DomainError(f"unknown policy {text!r}")


@dataclass(frozen=True)
class SimConfig:
    profile: GpuProfile
    load: LoadProfile
    policy: Policy
    trace: ArrivalTrace
    duration_s: float | None = None
    count_initial_load: bool = False

    @property
    def window_s(self) -> float:
        return self.trace.duration_s if self.duration_s is None else self.duration_s


@dataclass(frozen=True)
class SimResult:
    energy_wh: float
    cold_starts: int
    total_requests: int
    avg_added_latency_s: float
    time_warm_s: float
    time_evicted_s: float
    time_loading_s: float
    savings_vs_always_on_pct: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    state: str
    power_w: float

    @property
    def energy_j(self) -> float:
        return (self.t_end - self.t_start) * self.power_w


class _Fixed:
    def __init__(self, ttl):
        self.ttl = ttl

    def on_arrival(self, t):
        pass

    def timeout(self, t):
        return self.ttl

    def on_idle_end(self, idle_s, evicted):
        pass


class _Rate:
    def __init__(self, window_s, threshold_per_s, initial_rate):
        self.w = window_s
        self.threshold = threshold_per_s
        self.rate = initial_rate
        self.last = 0.0

    def on_arrival(self, t):
        self.rate = self.rate * math.exp(-(t - self.last) / self.w) + 1.0 / self.w
        self.last = t

    def timeout(self, t):
        r = self.rate * math.exp(-(t - self.last) / self.w)
        if r <= self.threshold:
            return 0.0
        return self.w * math.log(r / self.threshold)

    def on_idle_end(self, idle_s, evicted):
        pass


class _Hysteresis:
    def __init__(self, lo, hi):
        self.lo, self.hi = lo, hi
        self.high = False

    def on_arrival(self, t):
        pass

    def timeout(self, t):
        return self.hi if self.high else self.lo

    def on_idle_end(self, idle_s, evicted):
        if evicted and idle_s < self.hi:
            self.high = True
        elif idle_s >= self.hi:
            self.high = False


def _controller(policy: Policy, profile: GpuProfile, load: LoadProfile):
    if isinstance(policy, AlwaysOn):
        return _Fixed(math.inf)
    if isinstance(policy, FixedTTL):
        return _Fixed(policy.ttl_s)
    if isinstance(policy, Breakeven):
        return _Fixed(breakeven_time(parking_tax(profile), load))
    if isinstance(policy, RateThreshold):
        return _Rate(policy.window_s, critical_rate(parking_tax(profile), load),
                     policy.initial_rate_per_s)
    if isinstance(policy, Hysteresis):
        return _Hysteresis(policy.ttl_low_s, policy.ttl_high_s)
    raise DomainError(f"unknown policy {policy!r}")


def policy_ttl(policy: Policy, profile: GpuProfile, load: LoadProfile) -> float | None:
    """The constant idle timeout of a policy, or None for adaptive policies."""
    if isinstance(policy, (AlwaysOn, FixedTTL, Breakeven)):
        return _controller(policy, profile, load).ttl
    return None


def run(config: SimConfig) -> tuple[SimResult, list[Segment]]:
    """Simulate and also return the state timeline as contiguous segments."""
    profile, load = config.profile, config.load
    T = config.window_s
    if config.trace.duration_s > T:
        raise DomainError(f"trace window {config.trace.duration_s} s exceeds simulated {T} s")
    arrivals = config.trace.arrival_times_s
    if arrivals and arrivals[-1] >= T:
        raise DomainError("trace has arrivals past the simulated window")

    ctrl = _controller(config.policy, profile, load)
    t_load = load.total_duration_s
    segs: list[Segment] = []

    def emit(a, b, state, power):
        if b > a:
            segs.append(Segment(a, b, state, power))

    def emit_load(start):
        t = start
        last = len(load.stages) - 1
        for i, (d, p) in enumerate(load.stages):
            if t >= T:
                break
            # last stage ends exactly where the load does, so segments stay contiguous
            end = start + t_load if i == last else t + d
            emit(t, min(end, T), LOADING, p)
            t = end

    warm_since = 0.0
    idle_start = 0.0
    ttl = ctrl.timeout(0.0)
    load_start = load_end = None
    cold = 0
    wait = 0.0

    for a in arrivals:
        if load_end is not None:
            if a < load_end:
                ctrl.on_arrival(a)
                wait += t_load - (a - load_start)
                continue
            warm_since = idle_start = load_end
            load_end = None
            ttl = ctrl.timeout(idle_start)
        ctrl.on_arrival(a)
        expiry = idle_start + ttl
        if a <= expiry:
            ctrl.on_idle_end(a - idle_start, False)
        else:
            emit(warm_since, expiry, WARM, profile.p_ctx_w)
            emit(expiry, a, EVICTED, profile.p_base_w)
            ctrl.on_idle_end(a - idle_start, True)
            emit_load(a)
            load_start, load_end = a, a + t_load
            cold += 1
            wait += t_load
            continue
        idle_start = a
        ttl = ctrl.timeout(a)

    if load_end is not None:
        if load_end >= T:
            load_end = math.inf
        else:
            warm_since = idle_start = load_end
            ttl = ctrl.timeout(idle_start)
    if load_end is None or load_end < T:
        expiry = min(idle_start + ttl, T)
        emit(warm_since, expiry, WARM, profile.p_ctx_w)
        emit(expiry, T, EVICTED, profile.p_base_w)

    times = {WARM: 0.0, EVICTED: 0.0, LOADING: 0.0}
    energy_j = 0.0
    for s in segs:
        times[s.state] += s.t_end - s.t_start
        energy_j += s.energy_j
    n = len(arrivals)
    result = SimResult(
        energy_wh=energy_j / 3600.0,
        cold_starts=cold + (1 if config.count_initial_load else 0),
        total_requests=n,
        avg_added_latency_s=wait / n if n else 0.0,
        time_warm_s=times[WARM],
        time_evicted_s=times[EVICTED],
        time_loading_s=times[LOADING],
    )
    return result, segs


def simulate(config: SimConfig) -> SimResult:
    return run(config)[0]


def compare_policies(profile: GpuProfile, load: LoadProfile, trace: ArrivalTrace,
                     policies, duration_s: float | None = None,
                     count_initial_load: bool = True) -> list[SimResult]:
    """Run each policy on the same trace and fill in savings against always-on."""
    policies = list(policies)
    if not any(isinstance(p, AlwaysOn) for p in policies):
        raise DomainError("policy list must include AlwaysOn as the baseline")
    results = [
        simulate(SimConfig(profile, load, p, trace, duration_s, count_initial_load))
        for p in policies
    ]
    e_on = results[next(i for i, p in enumerate(policies) if isinstance(p, AlwaysOn))].energy_wh
    return [replace(r, savings_vs_always_on_pct=100.0 * (e_on - r.energy_wh) / e_on) for r in results]


def sweep_breakeven(profiles, loads) -> list[dict]:
    """Breakeven time for every (profile, loader) pair."""
    profiles, loads = list(profiles), list(loads)
    if not profiles or not loads:
        raise DomainError("need at least one profile and one load profile")
    return [
        {
            "profile": p.name,
            "load": lp.label,
            "park_w": parking_tax(p),
            "load_energy_j": lp.total_energy_j,
            "t_star_s": breakeven_time(parking_tax(p), lp),
        }
        for p in profiles
        for lp in loads
    ]
