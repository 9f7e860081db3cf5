"""Telemetry ingestion and the idle-power statistics pipeline.

Samples are classified into bare-idle and context-active states by SM clock,
the two states are compared (Welch test, Cohen's d), and within the
context-active state phase-mean power is regressed on VRAM with a TOST
equivalence test on the slope.

Student-t probabilities come from a regularized incomplete beta function
evaluated here by continued fraction, so no statistics library is needed.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from parkingtax import DomainError, ParseError
from parkingtax.power import GpuProfile, idle_power

CSV_FIELDS = ("timestamp_s", "gpu_id", "power_w", "sm_clock_mhz", "vram_used_gb", "util_pct")
DEFAULT_CLOCK_THRESHOLD_MHZ = 700.0
SAMPLE_INTERVAL_S = 30.0


# ---------------------------------------------------------------------------
# Student-t distribution

def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 10000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise ArithmeticError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise DomainError("betainc_reg needs a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """Upper tail P(T > t)."""
    if df <= 0:
        raise DomainError("df must be > 0")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    # two-sided tail mass via I_{df/(df+t^2)}(df/2, 1/2)
    x = df / (df + t * t)
    tail = 0.5 * betainc_reg(0.5 * df, 0.5, x)
    return tail if t >= 0 else 1.0 - tail


def t_cdf(t: float, df: float) -> float:
    if math.isinf(t) or math.isnan(t):
        return 1.0 - t_sf(t, df)
    if t < 0:
        return t_sf(-t, df)
    return 1.0 - t_sf(t, df)


def t_ppf(p: float, df: float) -> float:
    """Quantile of the t distribution by bisection on the cdf."""
    if not 0.0 < p < 1.0:
        raise DomainError("p must be in (0, 1)")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -t_ppf(1.0 - p, df)
    lo, hi = 0.0, 1.0
    while t_cdf(hi, df) < p:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Samples and ingestion

class State(enum.Enum):
    BARE_IDLE = "BareIdle"
    CUDA_ACTIVE = "CudaActive"


@dataclass(frozen=True)
class TelemetrySample:
    timestamp_s: float
    gpu_id: str
    power_w: float
    sm_clock_mhz: float
    vram_used_gb: float
    util_pct: float

    def __post_init__(self):
        if not self.power_w > 0:
            raise DomainError(f"power_w must be > 0, got {self.power_w}")
        if not 0 <= self.util_pct <= 100:
            raise DomainError(f"util_pct must be in [0, 100], got {self.util_pct}")
        if self.vram_used_gb < 0:
            raise DomainError(f"vram_used_gb must be >= 0, got {self.vram_used_gb}")


@dataclass
class TelemetryBatch:
    """Samples that passed the utilization filter, with retention bookkeeping."""

    samples: list[TelemetrySample]
    n_read: int
    util_max_pct: float

    @property
    def n_retained(self) -> int:
        return len(self.samples)

    @property
    def retention(self) -> float:
        return self.n_retained / self.n_read if self.n_read else 0.0

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)


def ingest(path, util_filter_pct: float = 0.0) -> TelemetryBatch:
    """Read a telemetry CSV and keep samples with ``util_pct <= util_filter_pct``.

    All malformed rows are collected and reported together by line number.
    """
    samples, bad = [], []
    n_read = 0
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise ParseError("empty telemetry file", 1)
        missing = [c for c in CSV_FIELDS if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"header missing columns {missing}", 1)
        for row in reader:
            lineno = reader.line_num
            n_read += 1
            try:
                s = TelemetrySample(
                    timestamp_s=float(row["timestamp_s"]),
                    gpu_id=row["gpu_id"],
                    power_w=float(row["power_w"]),
                    sm_clock_mhz=float(row["sm_clock_mhz"]),
                    vram_used_gb=float(row["vram_used_gb"]),
                    util_pct=float(row["util_pct"]),
                )
            except (TypeError, ValueError) as e:
                bad.append((lineno, str(e)))
                continue
            if s.util_pct <= util_filter_pct:
                samples.append(s)
    if bad:
        shown = "; ".join(f"line {n}: {msg}" for n, msg in bad[:20])
        more = f" (+{len(bad) - 20} more)" if len(bad) > 20 else ""
        raise ParseError(f"{len(bad)} malformed rows: {shown}{more}", bad[0][0])
    if not samples:
        warnings.warn(f"no samples in {path} at util <= {util_filter_pct}%", stacklevel=2)
    return TelemetryBatch(samples, n_read, util_filter_pct)


def write_telemetry(samples, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_FIELDS)
        for s in samples:
            w.writerow([f"{s.timestamp_s:.3f}", s.gpu_id, repr(s.power_w), f"{s.sm_clock_mhz:g}",
                        f"{s.vram_used_gb:g}", f"{s.util_pct:g}"])


def classify_state(sample: TelemetrySample, clock_threshold_mhz: float = DEFAULT_CLOCK_THRESHOLD_MHZ) -> State:
    return State.CUDA_ACTIVE if sample.sm_clock_mhz >= clock_threshold_mhz else State.BARE_IDLE


# ---------------------------------------------------------------------------
# Two-state comparison

@dataclass(frozen=True)
class TwoStateResult:
    mean_bare_w: float
    mean_ctx_w: float
    delta_w: float
    cohens_d: float
    welch_p: float
    n_bare: int
    n_ctx: int


def _powers(xs) -> np.ndarray:
    return np.asarray([x.power_w if isinstance(x, TelemetrySample) else x for x in xs], dtype=float)


def two_state_stats(bare, ctx) -> TwoStateResult:
    """Welch's t-test and Cohen's d between bare-idle and context-active power.

    d uses the equal-weight pooled SD ``sqrt((s1^2 + s2^2) / 2)``. Two
    zero-variance groups with different means give ``d = inf``.
    """
    a, b = _powers(bare), _powers(ctx)
    if a.size < 2 or b.size < 2:
        raise DomainError("each group needs at least 2 samples")
    ma, mb = float(a.mean()), float(b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    delta = mb - ma
    pooled = math.sqrt((va + vb) / 2.0)
    if pooled > 0:
        d = delta / pooled
    else:
        d = 0.0 if delta == 0 else math.copysign(math.inf, delta)
    se2 = va / a.size + vb / b.size
    if se2 > 0:
        t = delta / math.sqrt(se2)
        df = se2 ** 2 / ((va / a.size) ** 2 / (a.size - 1) + (vb / b.size) ** 2 / (b.size - 1))
        p = min(1.0, 2.0 * t_sf(abs(t), df))
    else:
        p = 1.0 if delta == 0 else 0.0
    return TwoStateResult(ma, mb, delta, d, p, int(a.size), int(b.size))


# ---------------------------------------------------------------------------
# Dose-response regression and equivalence

@dataclass(frozen=True)
class PhaseRecord:
    vram_gb: float
    power_samples_w: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.power_samples_w)

    @property
    def mean_w(self) -> float:
        return float(np.mean(self.power_samples_w))

    @property
    def std_w(self) -> float:
        return float(np.std(self.power_samples_w, ddof=1)) if self.n > 1 else 0.0


def phases_from_samples(samples, clock_threshold_mhz: float = DEFAULT_CLOCK_THRESHOLD_MHZ,
                        vram_decimals: int = 1) -> list[PhaseRecord]:
    """Group context-active samples into phases by (rounded) VRAM level."""
    groups: dict[float, list[float]] = {}
    for s in samples:
        if classify_state(s, clock_threshold_mhz) is State.CUDA_ACTIVE:
            groups.setdefault(round(s.vram_used_gb, vram_decimals), []).append(s.power_w)
    return [PhaseRecord(v, tuple(p)) for v, p in sorted(groups.items())]


@dataclass(frozen=True)
class RegressionResult:
    slope_w_per_gb: float
    intercept_w: float
    se_slope: float
    ci95_lo: float
    ci95_hi: float
    t_stat: float
    p_two_sided: float
    r_squared: float
    n_phases: int

    @property
    def df(self) -> int:
        return self.n_phases - 2


def ols(x, y) -> RegressionResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 3:
        raise DomainError("regression needs at least 3 points")
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx == 0:
        raise DomainError("all x values are equal")
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ssr = float((resid ** 2).sum())
    sst = float(((y - ym) ** 2).sum())
    df = n - 2
    se = math.sqrt(ssr / df / sxx)
    if se > 0:
        t = slope / se
        p = min(1.0, 2.0 * t_sf(abs(t), df))
    else:
        t = 0.0 if slope == 0 else math.copysign(math.inf, slope)
        p = 1.0 if slope == 0 else 0.0
    half = t_ppf(0.975, df) * se
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    return RegressionResult(slope, intercept, se, slope - half, slope + half, t, p, r2, n)


def dose_response(phases) -> RegressionResult:
    """OLS of phase-mean power on VRAM, with t-based inference on n-2 df."""
    phases = list(phases)
    if len(phases) < 3:
        raise DomainError("dose-response needs at least 3 phases")
    return ols([p.vram_gb for p in phases], [p.mean_w for p in phases])


@dataclass(frozen=True)
class EquivalenceResult:
    bound_w_per_gb: float
    p_lower: float
    p_upper: float
    p_tost: float
    equivalent: bool
    alpha: float = 0.05


def tost(reg: RegressionResult, bound_w_per_gb: float = 0.1, alpha: float = 0.05) -> EquivalenceResult:
    """Two one-sided tests of ``-bound < slope < +bound``."""
    if not bound_w_per_gb > 0:
        raise DomainError("equivalence bound must be > 0")
    if reg.n_phases < 3:
        raise DomainError("TOST needs a regression on at least 3 phases")
    lo, hi = -bound_w_per_gb, bound_w_per_gb
    if reg.se_slope > 0:
        p_lower = t_sf((reg.slope_w_per_gb - lo) / reg.se_slope, reg.df)
        p_upper = t_cdf((reg.slope_w_per_gb - hi) / reg.se_slope, reg.df)
    else:
        p_lower = 0.0 if reg.slope_w_per_gb > lo else 1.0
        p_upper = 0.0 if reg.slope_w_per_gb < hi else 1.0
    p = max(p_lower, p_upper)
    return EquivalenceResult(bound_w_per_gb, p_lower, p_upper, p, p < alpha, alpha)


# ---------------------------------------------------------------------------
# Autocorrelation

@dataclass(frozen=True)
class EffSampleSize:
    n_raw: int
    tau_samples: int
    n_eff: int


def effective_n(n_raw: int, tau_samples: int) -> EffSampleSize:
    if n_raw < 1 or tau_samples < 0:
        raise DomainError("need n_raw >= 1 and tau >= 0")
    # half-up rounding; Python's round() is banker's
    n_eff = int(math.floor(n_raw / (2 * tau_samples + 1) + 0.5))
    return EffSampleSize(n_raw, tau_samples, n_eff)


def estimate_tau(series) -> int:
    """First lag at which the sample autocorrelation falls below 1/e (capped at n/4)."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 10:
        raise DomainError("estimate_tau needs at least 10 samples")
    x = x - x.mean()
    denom = float(x @ x)
    if denom == 0:
        return 0
    cap = n // 4
    for k in range(1, cap + 1):
        if float(x[:-k] @ x[k:]) / denom < 1.0 / math.e:
            return k
    return cap


# ---------------------------------------------------------------------------
# Synthetic telemetry

def gen_telemetry(profile: GpuProfile, schedule, noise_std_w: float = 0.0,
                  drift_w_per_hr: float = 0.0, seed: int = 0, gpu_id: str = "gpu0",
                  interval_s: float = SAMPLE_INTERVAL_S,
                  phase_noise_std_w: float = 0.0) -> list[TelemetrySample]:
    """Idle-power samples every ``interval_s`` through a schedule of
    ``(vram_gb, ctx, duration_s)`` phases.

    Power is the idle-power model plus per-sample Gaussian noise plus a linear
    drift in elapsed time (a stand-in for slow thermal confounds).
    ``phase_noise_std_w`` adds one Gaussian offset per phase, shared by all of
    its samples, for between-phase wander that averaging cannot remove.
    """
    rng = np.random.default_rng(seed)
    out = []
    t0 = 0.0
    for vram, ctx, dur in schedule:
        n = int(round(dur / interval_s))
        ts = t0 + interval_s * np.arange(n)
        base = idle_power(profile, bool(ctx), float(vram))
        noise = rng.normal(0.0, noise_std_w, n) if noise_std_w > 0 else np.zeros(n)
        if phase_noise_std_w > 0:
            noise += rng.normal(0.0, phase_noise_std_w)
        power = base + noise + drift_w_per_hr * ts / 3600.0
        clock = profile.sm_clock_ctx_mhz if ctx else profile.sm_clock_idle_mhz
        out.extend(
            TelemetrySample(float(t), gpu_id, float(p), clock, float(vram), 0.0)
            for t, p in zip(ts, power)
        )
        t0 += n * interval_s
    return out


def dose_schedule(vram_levels, phase_s: float = 1200.0, bare_s: float = 1200.0):
    """Bare-idle baseline followed by one context-active phase per VRAM level."""
    sched = [(0.0, False, bare_s)] if bare_s > 0 else []
    return sched + [(float(v), True, phase_s) for v in vram_levels]


def parse_schedule(obj) -> list[tuple[float, bool, float]]:
    """Schedule from JSON: a list of ``{"vram_gb", "ctx", "duration_s"}`` objects."""
    items = obj["phases"] if isinstance(obj, dict) else obj
    try:
        return [(float(p["vram_gb"]), bool(p["ctx"]), float(p["duration_s"])) for p in items]
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"bad schedule entry: {e}") from None


# ---------------------------------------------------------------------------
# Full report

def analyze(samples, clock_threshold_mhz: float = DEFAULT_CLOCK_THRESHOLD_MHZ,
            tost_bound: float = 0.1) -> dict:
    """Two-state comparison over all samples, then per-GPU dose-response and TOST."""
    samples = list(samples)
    bare = [s for s in samples if classify_state(s, clock_threshold_mhz) is State.BARE_IDLE]
    ctx = [s for s in samples if classify_state(s, clock_threshold_mhz) is State.CUDA_ACTIVE]
    report: dict = {"n_samples": len(samples), "n_bare": len(bare), "n_ctx": len(ctx)}
    report["two_state"] = (asdict(two_state_stats(bare, ctx))
                           if len(bare) >= 2 and len(ctx) >= 2 else None)
    per_gpu = {}
    for gid in sorted({s.gpu_id for s in samples}):
        phases = phases_from_samples([s for s in samples if s.gpu_id == gid], clock_threshold_mhz)
        entry: dict = {"n_phases": len(phases),
                       "phases": [{"vram_gb": p.vram_gb, "n": p.n, "mean_w": p.mean_w, "std_w": p.std_w}
                                  for p in phases]}
        if len(phases) >= 3:
            reg = dose_response(phases)
            entry["regression"] = asdict(reg)
            entry["equivalence"] = asdict(tost(reg, tost_bound))
        else:
            entry["regression"] = entry["equivalence"] = None
        per_gpu[gid] = entry
    report["per_gpu"] = per_gpu
    return report
