"""Performance metrics over run traces and event logs.

Physical metrics follow classic control-performance definitions (rise time,
overshoot, settling, steady-state error, IAE) plus frequency/voltage limit
checks; cyber metrics aggregate the event log (delay, jitter, loss, delayed
packets, utilization).  Everything here is a pure function of its inputs so
reports can be recomputed bit-for-bit from exported artifacts.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .physical import FrequencyProtection, ProtectionAction, protection_check

DEFAULT_SS_FRACTION = 0.1       # steady state estimated over the trace tail
DEFAULT_VOLT_LIMITS = (0.95, 1.05)


@dataclass
class TimeSeries:
    t: np.ndarray
    v: np.ndarray
    unit: str = ""
    name: str = "series"

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.t.ndim != 1 or self.t.shape != self.v.shape or len(self.t) < 1:
            raise ValueError(f"series {self.name!r}: t and v must be equal-length 1-D, "
                             f"got {self.t.shape} and {self.v.shape}")
        if len(self.t) > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError(f"series {self.name!r}: t must be strictly increasing")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", self.name, "unit"])
        for ti, vi in zip(self.t, self.v):
            writer.writerow([repr(float(ti)), repr(float(vi)), self.unit])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TimeSeries":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or len(rows[0]) != 3 or rows[0][0] != "t":
            raise ValueError("trace CSV must have header (t,<name>,unit)")
        name = rows[0][1]
        unit = rows[1][2] if len(rows) > 1 else ""
        t = np.array([float(r[0]) for r in rows[1:]])
        v = np.array([float(r[1]) for r in rows[1:]])
        return cls(t=t, v=v, unit=unit, name=name)


@dataclass
class MetricReport:
    kind: str
    trace: str
    values: dict = field(default_factory=dict)
    intervals: dict = field(default_factory=dict)   # label -> [(t0, t1), ...]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "trace": self.trace, "values": self.values,
                "intervals": {k: [list(iv) for iv in v] for k, v in self.intervals.items()}}


def steady_state(s: TimeSeries, fraction: float = DEFAULT_SS_FRACTION) -> float:
    """Mean of the final fraction of samples."""
    n = max(1, int(round(len(s.v) * fraction)))
    return float(np.mean(s.v[-n:]))


def _first_crossing(t: np.ndarray, v: np.ndarray, level: float) -> Optional[float]:
    """First time v reaches level (linear interpolation between samples)."""
    if v[0] >= level:
        return float(t[0])
    above = np.nonzero(v >= level)[0]
    if len(above) == 0:
        return None
    i = above[0]
    t0, t1, v0, v1 = t[i - 1], t[i], v[i - 1], v[i]
    if v1 == v0:
        return float(t1)
    return float(t0 + (level - v0) * (t1 - t0) / (v1 - v0))


def rise_time(s: TimeSeries, lo_pct: float = 0.1, hi_pct: float = 0.9,
              ss_fraction: float = DEFAULT_SS_FRACTION) -> Optional[float]:
    """Duration of the rise from lo_pct to hi_pct of the steady-state value.

    Returns 0.0 when the trace already sits at its steady state, and None
    (not reached) when the signal never rises through the thresholds.
    """
    if not 0 < lo_pct < hi_pct < 1:
        raise ValueError("need 0 < lo_pct < hi_pct < 1")
    ss = steady_state(s, ss_fraction)
    band = 0.02 * abs(ss) if ss != 0 else 1e-12
    if np.all(np.abs(s.v - ss) <= band):
        return 0.0
    hi_level = hi_pct * ss
    if s.v[0] >= hi_level:
        return None  # starts above the target band: there is no rise to измере
    t_lo = _first_crossing(s.t, s.v, lo_pct * ss)
    t_hi = _first_crossing(s.t, s.v, hi_level)
    if t_lo is None or t_hi is None:
        return None
    return t_hi - t_lo


def percent_overshoot(s: TimeSeries, step_value: float) -> float:
    if step_value == 0:
        raise ValueError("step_value must be nonzero")
    return max(0.0, 100.0 * (float(np.max(s.v)) - step_value) / step_value)


def settling_time(s: TimeSeries, band_pct: float = 0.02,
                  ss_fraction: float = DEFAULT_SS_FRACTION) -> float:
    """Time of the last sample outside the +-band around the steady state."""
    ss = steady_state(s, ss_fraction)
    band = band_pct * abs(ss) if ss != 0 else band_pct
    outside = np.nonzero(np.abs(s.v - ss) > band)[0]
    if len(outside) == 0:
        return 0.0
    return float(s.t[outside[-1]])


def steady_state_error(s: TimeSeries, command: float,
                       ss_fraction: float = DEFAULT_SS_FRACTION) -> float:
    return command - steady_state(s, ss_fraction)


def iae(s: TimeSeries, reference) -> float:
    """Integral of absolute error against a scalar or matching array reference."""
    ref = np.asarray(reference, dtype=float)
    err = np.abs(s.v - ref)
    if len(s.t) < 2:
        return 0.0
    return float(np.trapezoid(err, s.t))


def max_rocof(s: TimeSeries) -> float:
    """Largest absolute rate of change, central differences inside, one-sided at the ends."""
    if len(s.t) < 2:
        return 0.0
    rates = np.gradient(s.v, s.t)
    return float(np.max(np.abs(rates)))


def _intervals_where(t: np.ndarray, mask: np.ndarray) -> list[tuple[float, float]]:
    """Contiguous sample runs where mask holds, as (t_start, t_end) pairs."""
    out = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = t[i]
        elif not flag and start is not None:
            out.append((float(start), float(t[i - 1])))
            start = None
    if start is not None:
        out.append((float(start), float(t[-1])))
    return out


def frequency_stability(s: TimeSeries, protection: FrequencyProtection) -> MetricReport:
    actions = [protection_check(float(f), protection) for f in s.v]
    intervals = {}
    for action in (ProtectionAction.GOVERNOR, ProtectionAction.LOAD_SHED,
                   ProtectionAction.UNDERFREQ_TRIP, ProtectionAction.OVERFREQ_TRIP):
        mask = np.array([a is action for a in actions])
        if mask.any():
            intervals[action.value] = _intervals_where(s.t, mask)
    return MetricReport(
        kind="frequency_stability", trace=s.name,
        values={"nadir": float(np.min(s.v)), "peak": float(np.max(s.v)),
                "max_rocof": max_rocof(s)},
        intervals=intervals)


def voltage_stability(s: TimeSeries,
                      limits: tuple[float, float] = DEFAULT_VOLT_LIMITS) -> MetricReport:
    lo, hi = limits
    if not lo < hi:
        raise ValueError("voltage limits must satisfy lo < hi")
    intervals = {}
    low_iv = _intervals_where(s.t, s.v < lo)
    high_iv = _intervals_where(s.t, s.v > hi)
    if low_iv:
        intervals["below"] = low_iv
    if high_iv:
        intervals["above"] = high_iv
    return MetricReport(
        kind="voltage_stability", trace=s.name,
        values={"v_min": float(np.min(s.v)), "v_max": float(np.max(s.v)),
                "limit_low": lo, "limit_high": hi},
        intervals=intervals)


def control_metrics(s: TimeSeries, command: float,
                    band_pct: float = 0.02) -> MetricReport:
    rt = rise_time(s)
    return MetricReport(
        kind="control", trace=s.name,
        values={"rise_time": rt if rt is not None else "not_reached",
                "percent_overshoot": percent_overshoot(s, command) if command else 0.0,
                "settling_time": settling_time(s, band_pct),
                "steady_state_error": steady_state_error(s, command),
                "iae": iae(s, command)})


def cyber_metrics(event_log: Sequence[dict],
                  horizon: Optional[float] = None,
                  baselines: Optional[dict] = None,
                  flow_links: Optional[dict] = None,
                  bandwidths: Optional[dict] = None) -> MetricReport:
    """Aggregate the network event log.

    ``baselines`` maps "src->dst" to the deterministic path delay used for the
    delayed-packet count; ``flow_links`` maps the same keys to link-id lists
    and ``bandwidths`` maps link ids to bit rates for channel utilization.
    """
    deliveries = [e for e in event_log if e["event"] == "deliver"]
    sends = [e for e in event_log if e["event"] == "send"]
    drops = [e for e in event_log if e["event"] == "drop"]
    size_bits = {e["packet_id"]: e["detail"]["size"] * 8.0 for e in sends}

    delays = [e["detail"]["delay"] for e in deliveries]
    flows: dict[str, list[float]] = {}
    for e in deliveries:
        key = f"{e['detail']['src']}->{e['detail']['dst']}"
        flows.setdefault(key, []).append(e["detail"]["delay"])

    diffs = []
    per_flow_jitter = {}
    for key, ds in sorted(flows.items()):
        fd = [abs(b - a) for a, b in zip(ds, ds[1:])]
        per_flow_jitter[key] = float(np.mean(fd)) if fd else 0.0
        diffs.extend(fd)

    packets_delayed = 0
    eps = 1e-12
    if baselines:
        for e in deliveries:
            key = f"{e['detail']['src']}->{e['detail']['dst']}"
            base = baselines.get(key)
            if base is not None and e["detail"]["delay"] > base + eps:
                packets_delayed += 1

    utilization = {}
    if flow_links and bandwidths and horizon:
        bits_per_link: dict[str, float] = {}
        for e in deliveries:
            key = f"{e['detail']['src']}->{e['detail']['dst']}"
            bits = size_bits.get(e["packet_id"], 0.0)
            for link_id in flow_links.get(key, ()):
                bits_per_link[link_id] = bits_per_link.get(link_id, 0.0) + bits
        utilization = {link_id: bits / (bandwidths[link_id] * horizon)
                       for link_id, bits in sorted(bits_per_link.items())}

    sent_n, delivered_n, dropped_n = len(sends), len(deliveries), len(drops)
    values = {
        "packets_sent": sent_n,
        "packets_delivered": delivered_n,
        "packets_dropped": dropped_n,
        "avg_delay": float(np.mean(delays)) if delays else 0.0,
        "max_delay": float(np.max(delays)) if delays else 0.0,
        "jitter": float(np.mean(diffs)) if diffs else 0.0,
        "per_flow_jitter": per_flow_jitter,
        "packet_error_rate": dropped_n / sent_n if sent_n else 0.0,
        "packets_delayed": packets_delayed,
        "throughput_bps": (sum(size_bits.get(e["packet_id"], 0.0) for e in deliveries)
                           / horizon if horizon else 0.0),
        "channel_utilization": utilization,
        "hop_counts": {key: len(links) for key, links in sorted((flow_links or {}).items())},
    }
    return MetricReport(kind="cyber", trace="event_log", values=values)
