"""Piecewise-constant idle-power model and cold-start load profiles."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from parkingtax import DomainError

MEMORY_TECHS = ("HBM3", "HBM2e", "GDDR6")


@dataclass(frozen=True)
class GpuProfile:
    name: str
    memory_tech: str
    tdp_w: float
    p_base_w: float
    p_ctx_w: float
    beta_w_per_gb: float
    sm_clock_idle_mhz: float
    sm_clock_ctx_mhz: float
    max_vram_gb: float

    def __post_init__(self):
        if self.memory_tech not in MEMORY_TECHS:
            raise DomainError(f"unknown memory_tech {self.memory_tech!r}")
        if not 0 < self.p_base_w < self.p_ctx_w < self.tdp_w:
            raise DomainError(
                f"{self.name}: need 0 < p_base_w < p_ctx_w < tdp_w, got "
                f"{self.p_base_w}, {self.p_ctx_w}, {self.tdp_w}"
            )
        if self.sm_clock_ctx_mhz <= self.sm_clock_idle_mhz:
            raise DomainError(f"{self.name}: context clock must exceed idle clock")
        if self.max_vram_gb <= 0:
            raise DomainError(f"{self.name}: max_vram_gb must be positive")

    @property
    def parking_tax_w(self) -> float:
        return parking_tax(self)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GpuProfile":
        names = set(cls.__dataclass_fields__)
        missing = names - set(d)
        if missing:
            raise DomainError(f"profile missing fields: {sorted(missing)}")
        extra = set(d) - names
        if extra:
            raise DomainError(f"profile has unknown fields: {sorted(extra)}")
        return cls(**{k: d[k] for k in names})


@dataclass(frozen=True)
class LoadProfile:
    """Cold-start power over time as an ordered list of ``(duration_s, power_w)`` stages."""

    stages: tuple[tuple[float, float], ...]
    label: str = "load"

    def __post_init__(self):
        stages = tuple((float(d), float(p)) for d, p in self.stages)
        object.__setattr__(self, "stages", stages)
        for d, p in stages:
            if not (d > 0 and p > 0):
                raise DomainError(f"load stage durations and powers must be > 0, got ({d}, {p})")

    @classmethod
    def constant(cls, power_w: float, duration_s: float, label: str | None = None) -> "LoadProfile":
        return cls(((duration_s, power_w),), label or f"constant({power_w:g}W,{duration_s:g}s)")

    @property
    def total_duration_s(self) -> float:
        return sum(d for d, _ in self.stages)

    @property
    def total_energy_j(self) -> float:
        return load_energy(self)

    @property
    def mean_power_w(self) -> float:
        return self.total_energy_j / self.total_duration_s

    def concat(self, other: "LoadProfile") -> "LoadProfile":
        return LoadProfile(self.stages + other.stages, f"{self.label}+{other.label}")

    def to_dict(self) -> dict:
        return {"label": self.label, "stages": [[d, p] for d, p in self.stages]}

    @classmethod
    def from_dict(cls, d: dict) -> "LoadProfile":
        if "stages" in d:
            return cls(tuple(tuple(s) for s in d["stages"]), d.get("label", "load"))
        return cls.constant(d["power_w"], d["duration_s"], d.get("label"))


def idle_power(profile: GpuProfile, ctx: bool, vram_gb: float = 0.0) -> float:
    """Idle power in watts for a context state and VRAM allocation.

    The VRAM slope only applies with a context; allocating memory without one is
    not a reachable state.
    """
    if not 0 <= vram_gb <= profile.max_vram_gb:
        raise DomainError(f"vram_gb={vram_gb} outside [0, {profile.max_vram_gb}] for {profile.name}")
    if vram_gb > 0 and not ctx:
        raise DomainError("VRAM allocation requires a CUDA context")
    if not ctx:
        return profile.p_base_w
    return profile.p_ctx_w + profile.beta_w_per_gb * vram_gb


def parking_tax(profile: GpuProfile) -> float:
    return profile.p_ctx_w - profile.p_base_w


def load_energy(profile: LoadProfile) -> float:
    """Total cold-start energy in joules."""
    if not profile.stages:
        raise DomainError("empty load profile")
    return sum(d * p for d, p in profile.stages)


_BUILTIN_PROFILES = (
    GpuProfile("H100", "HBM3", 700.0, 71.8, 121.7, -0.002, 345.0, 1980.0, 80.0),
    GpuProfile("A100", "HBM2e", 300.0, 53.7, 80.0, -0.001, 210.0, 1410.0, 80.0),
    GpuProfile("L40S", "GDDR6", 350.0, 35.6, 102.1, -0.002, 210.0, 2520.0, 48.0),
)

# Loader benchmarks used for the keep-warm tables. The staged entry is the
# 1 Hz Qwen2.5-7B H100 capture: CPU-side deserialization, transfer burst, settle.
_BUILTIN_LOADS = (
    LoadProfile.constant(124.0, 30.0, "qwen2.5-7b"),
    LoadProfile.constant(300.0, 45.0, "pytorch-70b"),
    LoadProfile.constant(300.0, 8.0, "serverlessllm-70b"),
    LoadProfile.constant(200.0, 5.0, "runai-streamer-8b"),
    LoadProfile(((22.0, 70.8), (3.0, 124.1), (4.7, 121.0)), "qwen2.5-7b-staged"),
)


def builtin_profiles() -> list[GpuProfile]:
    return list(_BUILTIN_PROFILES)


def builtin_loads() -> list[LoadProfile]:
    return list(_BUILTIN_LOADS)


def get_profile(name: str) -> GpuProfile:
    for p in _BUILTIN_PROFILES:
        if p.name.lower() == name.lower():
            return p
    raise DomainError(f"no built-in GPU profile named {name!r}")


def get_load(label: str) -> LoadProfile:
    for lp in _BUILTIN_LOADS:
        if lp.label == label.lower():
            return lp
    raise DomainError(f"no built-in load profile named {label!r}")


def resolve_profile(name_or_path: str) -> GpuProfile:
    """Built-in name first, then a JSON file holding one profile object."""
    try:
        return get_profile(name_or_path)
    except DomainError:
        pass
    path = Path(name_or_path)
    if not path.is_file():
        raise DomainError(f"{name_or_path!r} is neither a built-in profile nor a file")
    return GpuProfile.from_dict(json.loads(path.read_text()))


def resolve_load(name_or_path: str) -> LoadProfile:
    try:
        return get_load(name_or_path)
    except DomainError:
        pass
    path = Path(name_or_path)
    if not path.is_file():
        raise DomainError(f"{name_or_path!r} is neither a built-in load profile nor a file")
    return LoadProfile.from_dict(json.loads(path.read_text()))
