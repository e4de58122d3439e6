"""Attack operators, each bound to a tap and gated by an active window.

Injectors are pure transforms of (sample, time): outside their window every
operator is the identity, and degenerate parameters (beta = 1 with no noise,
zero delay, zero demand offset, empty schedules) are identities everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .physical import GridModel


@dataclass(frozen=True)
class AttackWindow:
    """Disjoint, sorted half-open intervals [start, end) of virtual seconds."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ivs = tuple((float(s), float(e)) for s, e in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        for s, e in ivs:
            if not s < e:
                raise ValueError(f"window interval ({s}, {e}) must have start < end")
        for (s0, e0), (s1, e1) in zip(ivs, ivs[1:]):
            if s1 < e0:
                raise ValueError(f"window intervals ({s0}, {e0}) and ({s1}, {e1}) overlap "
                                 "or are out of order")

    def contains(self, t: float) -> bool:
        return any(s <= t < e for s, e in self.intervals)

    @classmethod
    def single(cls, start: float, end: float) -> "AttackWindow":
        return cls(((start, end),))


EMPTY_WINDOW = AttackWindow(())


# --- noise variants for the combined data-integrity attack ---

@dataclass(frozen=True)
class GaussianNoise:
    sigma: float

    def sample(self, t: float, rng: np.random.Generator, shape=None):
        return rng.normal(0.0, self.sigma) if shape is None else rng.normal(0.0, self.sigma, shape)


@dataclass(frozen=True)
class SinusoidNoise:
    amplitude: float
    freq_hz: float

    def sample(self, t: float, rng=None, shape=None):
        w = self.amplitude * math.sin(2 * math.pi * self.freq_hz * t)
        return w if shape is None else np.full(shape, w)


Noise = Union[None, GaussianNoise, SinusoidNoise]


@dataclass(frozen=True)
class DiaCombined:
    """Measurement-tap attack: y_a = beta * y + W inside the window."""

    tap: str                    # measurement channel, e.g. "plant:pv_loop"
    beta: float = 1.0
    noise: Noise = None
    window: AttackWindow = EMPTY_WINDOW

    def __post_init__(self):
        if not math.isfinite(self.beta):
            raise ValueError("beta must be finite")


@dataclass(frozen=True)
class ControlDia:
    """Control-tap attack: additive delta-u from a piecewise-constant schedule."""

    tap: str
    schedule: tuple[tuple[float, float], ...] = ()   # (from_time, delta_u)
    window: AttackWindow = EMPTY_WINDOW

    def __post_init__(self):
        sched = tuple((float(t), float(v)) for t, v in self.schedule)
        object.__setattr__(self, "schedule", sched)
        times = [t for t, _ in sched]
        if times != sorted(times):
            raise ValueError("control schedule must be time-sorted")

    def delta_u(self, t: float) -> float:
        if not self.window.contains(t):
            return 0.0
        value = 0.0  # schedule gap inside the window means no offset
        for start, v in self.schedule:
            if t >= start:
                value = v
            else:
                break
        return value


@dataclass(frozen=True)
class LoadChange:
    """Demand manipulation on a set of loads, absolute or fractional."""

    targets: tuple[str, ...]
    delta: float
    fraction: bool = True       # True: delta of base demand; False: absolute pu offset
    window: AttackWindow = EMPTY_WINDOW

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.fraction and self.delta <= -1:
            raise ValueError("fractional delta must be > -1 so demand stays >= 0")


@dataclass(frozen=True)
class TimeDelay:
    """Delay attack: link taps hold arrivals by seconds, signal taps by whole steps."""

    tap: str
    delay: float                # seconds on a link tap, step count on a signal tap
    window: AttackWindow = EMPTY_WINDOW

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("delay must be >= 0")


@dataclass(frozen=True)
class DoS:
    """Drop-all attack on a link while the window is active."""

    tap: str
    window: AttackWindow = EMPTY_WINDOW


@dataclass(frozen=True)
class BreakerAttack:
    """Forced breaker actuations at scheduled times."""

    breaker: str
    schedule: tuple[tuple[float, str], ...] = ()

    def __post_init__(self):
        sched = tuple((float(t), a) for t, a in self.schedule)
        object.__setattr__(self, "schedule", sched)
        times = [t for t, _ in sched]
        if times != sorted(times):
            raise ValueError("breaker schedule must be time-sorted")
        for _, action in sched:
            if action not in ("open", "close"):
                raise ValueError(f"unknown breaker action {action!r}")


AttackSpec = Union[DiaCombined, ControlDia, LoadChange, TimeDelay, DoS, BreakerAttack]


def apply_dia(y, t: float, spec: DiaCombined, rng: Optional[np.random.Generator] = None):
    """Return (y_a, delta_y); delta_y is the manipulation y_a - y (0 outside window)."""
    if not spec.window.contains(t):
        zero = np.zeros_like(y) if isinstance(y, np.ndarray) else 0.0
        return y, zero
    shape = y.shape if isinstance(y, np.ndarray) else None
    if spec.noise is None:
        w = np.zeros(shape) if shape else 0.0
    else:
        w = spec.noise.sample(t, rng, shape)
    y_a = spec.beta * y + w
    return y_a, y_a - y


def apply_control_dia(u, t: float, spec: ControlDia):
    """Return (u_a, delta_u); the altered plant response follows from the plant step."""
    du = spec.delta_u(t)
    return u + du, du


def apply_load_change(grid: GridModel, t: float, spec: LoadChange) -> None:
    """Set or clear the demand offset on every target load for time t."""
    active = spec.window.contains(t)
    for target in spec.targets:
        load = grid.load(target)  # KeyError at scenario load for unknown ids
        if not active:
            load.delta_demand = 0.0
        elif spec.fraction:
            load.delta_demand = load.base_demand * spec.delta
        else:
            load.delta_demand = spec.delta


def apply_delay(history: Sequence[float], k: int, d_steps: int,
                window: AttackWindow, dt: float = 1.0):
    """Delayed sample of a recorded signal: history[k - d] inside the window.

    Requests reaching before the first recorded sample hold the earliest value
    (zero-order hold at the history start).
    """
    if d_steps < 0:
        raise ValueError("d_steps must be >= 0")
    if window.contains(k * dt):
        return history[max(k - d_steps, 0)]
    return history[k]


def dos_active(spec: DoS, send_time: float) -> bool:
    return spec.window.contains(send_time)


def link_delay(spec: TimeDelay, send_time: float) -> float:
    """Extra seconds added to an arrival whose send time falls in the window."""
    return spec.delay if spec.window.contains(send_time) else 0.0


def apply_breaker_attack(grid: GridModel, spec: BreakerAttack) -> None:
    """Merge the attack actuations into the breaker's schedule (engine executes them)."""
    breaker = grid.breaker(spec.breaker)
    breaker.schedule = sorted(list(breaker.schedule) + list(spec.schedule),
                              key=lambda e: e[0])
