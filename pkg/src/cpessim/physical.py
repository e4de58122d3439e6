"""Reduced-order power-system dynamics.

Two fidelity tiers are supported by the engine on top of these primitives:
an aggregate microgrid (one equivalent machine plus fast sources and loads,
balanced through the total-demand equation) and a multi-machine system where
each machine swings against a common load bus through its transfer reactance.
State-space groups coupled by a nodal boundary solve cover the integrated
transmission/distribution scenarios.

Conventions: omega in rad/s, frequency in Hz, power in per-unit on the grid
base, angles in radians.  The swing inertia constant (seconds) is named
``inertia_const`` and the discrete-plant feedback matrix ``control_matrix``
to keep the two conventional uses of "H" apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

MAX_SWING_DT = 0.010  # s; keep the fixed-step integrator well inside its stability margin
NODAL_RESIDUAL_TOL = 1e-9
NODAL_COND_LIMIT = 1e12


class IntegrationDivergedError(RuntimeError):
    """Swing integration produced a non-finite state."""

    def __init__(self, step_index, detail: str):
        self.step_index = step_index
        super().__init__(f"integration diverged at step {step_index}: {detail}")


class SingularBoundaryError(RuntimeError):
    """Nodal boundary matrix is singular or too ill-conditioned to trust."""


# ---------------------------------------------------------------------------
# Discrete-time LTI plant (sampled control loop)
# ---------------------------------------------------------------------------

@dataclass
class LtiPlant:
    """x(k+1) = G x(k) + B u(k);  y(k) = C x(k) + e(k);  u(k+1) = control_matrix y(k).

    The feedback update is applied by the engine at the step boundary, after
    any measurement-tap attack has altered y.
    """

    G: np.ndarray
    B: np.ndarray
    C: np.ndarray
    control_matrix: np.ndarray
    noise_std: np.ndarray
    x: np.ndarray
    u: np.ndarray
    name: str = "plant"

    def __post_init__(self):
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.control_matrix = np.atleast_2d(np.asarray(self.control_matrix, dtype=float))
        self.noise_std = np.atleast_1d(np.asarray(self.noise_std, dtype=float))
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.u = np.atleast_1d(np.asarray(self.u, dtype=float))
        n, m, l = self.n, self.m, self.l
        checks = [
            ("G", self.G.shape, (n, n)),
            ("B", self.B.shape, (n, l)),
            ("C", self.C.shape, (m, n)),
            ("control_matrix", self.control_matrix.shape, (l, m)),
            ("noise_std", self.noise_std.shape, (m,)),
            ("u", self.u.shape, (l,)),
        ]
        for label, got, want in checks:
            if got != want:
                raise ValueError(f"plant {self.name!r}: {label} has shape {got}, expected {want}")
        if np.any(self.noise_std < 0):
            raise ValueError(f"plant {self.name!r}: noise_std must be >= 0 elementwise")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def l(self) -> int:
        return self.u.shape[0]


def lti_step(plant: LtiPlant, k: int, rng: Optional[np.random.Generator] = None
             ) -> tuple[np.ndarray, np.ndarray]:
    """One sample: returns (x(k+1), y(k)).  Caller owns the state/feedback update."""
    x_next = plant.G @ plant.x + plant.B @ plant.u
    y = plant.C @ plant.x
    if rng is not None and np.any(plant.noise_std > 0):
        y = y + rng.normal(0.0, plant.noise_std)
    return x_next, y


# ---------------------------------------------------------------------------
# Swing dynamics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Governor:
    """Proportional droop on frequency deviation beyond a deadband.

    ``time_constant`` adds a first-order actuator lag; at 0 the droop is
    instantaneous.  ``min_boost``/``max_boost`` bound the mechanical-power
    correction (headroom of the prime mover).
    """

    gain: float                # pu per Hz
    deadband: float = 0.036    # Hz
    time_constant: float = 0.0  # s
    min_boost: float = -math.inf
    max_boost: float = math.inf

    def target(self, f: float, f_nom: float) -> float:
        dev = f_nom - f
        if abs(dev) <= self.deadband:
            return 0.0
        dev -= math.copysign(self.deadband, dev)
        return min(max(self.gain * dev, self.min_boost), self.max_boost)


@dataclass
class Machine:
    """Classical-model synchronous machine (constant internal voltage behind reactance)."""

    id: str
    inertia_const: float            # H, seconds
    p_mech: float                   # Pm, pu (scheduled setpoint)
    delta: float = 0.0              # rotor angle, rad
    omega: float = 2 * math.pi * 60.0   # rad/s
    omega_sync: float = 2 * math.pi * 60.0
    v_internal: float = 1.0         # Vs, pu
    v_recv: float = 1.0             # Vr at the receiving bus, pu
    reactance: float = 0.3          # X, pu
    governor: Optional[Governor] = None
    gov_power: float = 0.0          # governor actuator output, pu
    damping: float = 0.0            # optional damping torque coefficient, pu
    connected: bool = True

    def __post_init__(self):
        if self.inertia_const <= 0:
            raise ValueError(f"machine {self.id!r}: inertia_const must be > 0")
        if self.reactance <= 0:
            raise ValueError(f"machine {self.id!r}: reactance must be > 0")
        if self.omega_sync <= 0:
            raise ValueError(f"machine {self.id!r}: omega_sync must be > 0")

    @property
    def f_nom(self) -> float:
        return self.omega_sync / (2 * math.pi)

    @property
    def frequency(self) -> float:
        return self.omega / (2 * math.pi)

    @property
    def coupling(self) -> float:
        """Peak transfer power Vs*Vr/X toward the common bus; 0 when disconnected."""
        if not self.connected:
            return 0.0
        return self.v_internal * self.v_recv / self.reactance


def electrical_power(v_s: float, v_r: float, x_reactance: float, delta: float) -> float:
    """Classical-model transfer power (Vs Vr / X) sin(delta)."""
    if x_reactance <= 0:
        raise ValueError(f"reactance must be > 0, got {x_reactance}")
    return v_s * v_r / x_reactance * math.sin(delta)


def swing_step(machine: Machine, p_elec, dt: float, step_index=None) -> Machine:
    """Advance rotor angle/speed one fixed step with classical 4th-order Runge-Kutta.

    ``p_elec`` is either a constant electrical power (pu) or a callable of the
    rotor angle, which lets the integrator see the angle dependence within the
    step.  The governor, when configured, adds its droop boost to the scheduled
    mechanical power.
    """
    if dt <= 0 or dt > MAX_SWING_DT:
        raise ValueError(f"dt must be in (0, {MAX_SWING_DT}] s, got {dt}")
    pe = p_elec if callable(p_elec) else (lambda _delta: p_elec)
    ws = machine.omega_sync
    accel_gain = ws / (2.0 * machine.inertia_const)
    gov = machine.governor
    f_nom = machine.f_nom
    two_pi = 2 * math.pi
    lagged = gov is not None and gov.time_constant > 0

    def deriv(delta, omega, gp):
        f = omega / two_pi
        if gov is None:
            boost, dgp = 0.0, 0.0
        elif lagged:
            boost = gp
            dgp = (gov.target(f, f_nom) - gp) / gov.time_constant
        else:
            boost, dgp = gov.target(f, f_nom), 0.0
        p_acc = machine.p_mech + boost - pe(delta)
        if machine.damping:
            p_acc -= machine.damping * (omega - ws) / ws
        return omega - ws, accel_gain * p_acc, dgp

    d0, w0, g0 = machine.delta, machine.omega, machine.gov_power
    k1 = deriv(d0, w0, g0)
    k2 = deriv(d0 + 0.5 * dt * k1[0], w0 + 0.5 * dt * k1[1], g0 + 0.5 * dt * k1[2])
    k3 = deriv(d0 + 0.5 * dt * k2[0], w0 + 0.5 * dt * k2[1], g0 + 0.5 * dt * k2[2])
    k4 = deriv(d0 + dt * k3[0], w0 + dt * k3[1], g0 + dt * k3[2])
    sixth = dt / 6.0
    delta = d0 + sixth * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    omega = w0 + sixth * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    if lagged:
        gp = g0 + sixth * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    elif gov is not None:
        gp = gov.target(omega / two_pi, f_nom)
    else:
        gp = 0.0

    if not (math.isfinite(delta) and math.isfinite(omega) and math.isfinite(gp)):
        raise IntegrationDivergedError(
            step_index, f"machine {machine.id!r} delta={delta} omega={omega}")
    return replace(machine, delta=delta, omega=omega, gov_power=gp)


# ---------------------------------------------------------------------------
# Loads, breakers, protection
# ---------------------------------------------------------------------------

@dataclass
class Load:
    id: str
    base_demand: float          # pu (converted from kW at scenario load if declared so)
    delta_demand: float = 0.0   # attack-controlled offset
    sheddable: bool = False
    shed: bool = False

    def __post_init__(self):
        if self.base_demand < 0:
            raise ValueError(f"load {self.id!r}: base_demand must be >= 0")

    @property
    def demand(self) -> float:
        return 0.0 if self.shed else self.base_demand + self.delta_demand


@dataclass
class Breaker:
    id: str
    closed: bool = True
    schedule: list = field(default_factory=list)  # [(time_s, "open"|"close"), ...]

    def __post_init__(self):
        times = [t for t, _ in self.schedule]
        if times != sorted(times):
            raise ValueError(f"breaker {self.id!r}: schedule must be time-sorted")
        for _, action in self.schedule:
            if action not in ("open", "close"):
                raise ValueError(f"breaker {self.id!r}: unknown action {action!r}")


class ProtectionAction(Enum):
    NONE = "none"
    GOVERNOR = "governor"
    LOAD_SHED = "load_shed"
    UNDERFREQ_TRIP = "underfreq_trip"
    OVERFREQ_TRIP = "overfreq_trip"


@dataclass(frozen=True)
class FrequencyProtection:
    """Frequency bands of the corrective-mechanism ladder (60 Hz system defaults)."""

    f_nom: float = 60.0
    governor_deadband: float = 0.036
    shed_low: float = 58.4
    shed_high: float = 59.5
    underfreq_trip: float = 57.8
    overfreq_trip: float = 62.2

    def __post_init__(self):
        if not (self.underfreq_trip < self.shed_low < self.shed_high
                < self.f_nom < self.overfreq_trip):
            raise ValueError("protection thresholds must satisfy "
                             "underfreq_trip < shed_low < shed_high < f_nom < overfreq_trip")


def protection_check(f: float, p: FrequencyProtection) -> ProtectionAction:
    """Classify a frequency sample; precedence trips > shed band > governor band."""
    if f >= p.overfreq_trip:
        return ProtectionAction.OVERFREQ_TRIP
    if f <= p.underfreq_trip:
        return ProtectionAction.UNDERFREQ_TRIP
    if p.shed_low <= f <= p.shed_high:
        return ProtectionAction.LOAD_SHED
    if abs(f - p.f_nom) > p.governor_deadband:
        return ProtectionAction.GOVERNOR
    return ProtectionAction.NONE


# ---------------------------------------------------------------------------
# Fast power sources (battery-style frequency support)
# ---------------------------------------------------------------------------

@dataclass
class FastSource:
    """Frequency-droop power source with a short lag and hard power cap."""

    id: str
    gain: float                 # pu per Hz
    max_power: float            # pu, symmetric cap
    time_constant: float = 0.02  # s
    power: float = 0.0          # current output, pu

    def step(self, f: float, f_nom: float, dt: float) -> float:
        target = min(max(self.gain * (f_nom - f), -self.max_power), self.max_power)
        if self.time_constant <= 0:
            self.power = target
        else:
            a = math.exp(-dt / self.time_constant)
            self.power = target + (self.power - target) * a
        return self.power


# ---------------------------------------------------------------------------
# State-space groups and nodal boundary
# ---------------------------------------------------------------------------

@dataclass
class StateSpaceGroup:
    """One solver group: s' = A s + D v, o = E s + F v, advanced by the trapezoidal rule."""

    name: str
    A: np.ndarray
    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    s: np.ndarray
    boundary_ports: tuple[str, ...] = ()

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        self.E = np.atleast_2d(np.asarray(self.E, dtype=float))
        self.F = np.atleast_2d(np.asarray(self.F, dtype=float))
        self.s = np.atleast_1d(np.asarray(self.s, dtype=float))
        q = self.s.shape[0]
        p = self.D.shape[1]
        r = self.E.shape[0]
        checks = [("A", self.A.shape, (q, q)), ("D", self.D.shape, (q, p)),
                  ("E", self.E.shape, (r, q)), ("F", self.F.shape, (r, p))]
        for label, got, want in checks:
            if got != want:
                raise ValueError(f"group {self.name!r}: {label} has shape {got}, expected {want}")


def group_step(g: StateSpaceGroup, v_in: Sequence[float], dt: float
               ) -> tuple[StateSpaceGroup, np.ndarray]:
    """Trapezoidal (bilinear) step with the input held over the interval.

    Returns the advanced group and the output evaluated at the new state.
    """
    v = np.atleast_1d(np.asarray(v_in, dtype=float))
    if v.shape[0] != g.D.shape[1]:
        raise ValueError(f"group {g.name!r}: input has length {v.shape[0]}, "
                         f"expected {g.D.shape[1]}")
    q = g.s.shape[0]
    half = 0.5 * dt * g.A
    lhs = np.eye(q) - half
    rhs = (np.eye(q) + half) @ g.s + dt * (g.D @ v)
    try:
        s_new = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularBoundaryError(
            f"group {g.name!r}: (I - dt/2 A) is singular at dt={dt}") from exc
    out = g.E @ s_new + g.F @ v
    g2 = replace(g, s=s_new)
    return g2, out


@dataclass
class NodalBoundary:
    """Shared-node admittance system Y V = I coupling the solver groups."""

    Y: np.ndarray
    I: np.ndarray
    V: Optional[np.ndarray] = None

    def __post_init__(self):
        self.Y = np.atleast_2d(np.asarray(self.Y))
        self.I = np.atleast_1d(np.asarray(self.I))
        if self.Y.shape[0] != self.Y.shape[1]:
            raise ValueError(f"Y must be square, got {self.Y.shape}")
        if self.I.shape[0] != self.Y.shape[0]:
            raise ValueError(f"I has length {self.I.shape[0]}, expected {self.Y.shape[0]}")


def nodal_solve(b: NodalBoundary) -> np.ndarray:
    """Solve Y V = I by dense LU; refuses ill-conditioned systems.

    The printed form of the coupling equation is ambiguous about orientation;
    the standard nodal reading Y V = I is used throughout.
    """
    cond = np.linalg.cond(b.Y)
    if not np.isfinite(cond) or cond > NODAL_COND_LIMIT:
        raise SingularBoundaryError(f"boundary matrix condition estimate {cond:.3e} "
                                    f"exceeds {NODAL_COND_LIMIT:.0e}")
    V = np.linalg.solve(b.Y, b.I)
    residual = np.max(np.abs(b.Y @ V - b.I))
    if residual >= NODAL_RESIDUAL_TOL:
        raise SingularBoundaryError(f"nodal residual {residual:.3e} exceeds "
                                    f"{NODAL_RESIDUAL_TOL:.0e}")
    b.V = V
    return V


# ---------------------------------------------------------------------------
# Grid container
# ---------------------------------------------------------------------------

@dataclass
class GridModel:
    f_nom: float = 60.0
    machines: list[Machine] = field(default_factory=list)
    loads: list[Load] = field(default_factory=list)
    breakers: list[Breaker] = field(default_factory=list)
    plants: list[LtiPlant] = field(default_factory=list)
    fast_sources: list[FastSource] = field(default_factory=list)
    protection: FrequencyProtection = field(default_factory=FrequencyProtection)
    p_loss: float = 0.0
    contingencies: list[tuple[float, str]] = field(default_factory=list)  # (time, machine id)

    def __post_init__(self):
        if self.f_nom <= 0:
            raise ValueError("f_nom must be > 0")

    def machine(self, machine_id: str) -> Machine:
        for m in self.machines:
            if m.id == machine_id:
                return m
        raise KeyError(f"unknown machine {machine_id!r}")

    def load(self, load_id: str) -> Load:
        for l in self.loads:
            if l.id == load_id:
                return l
        raise KeyError(f"unknown load {load_id!r}")

    def breaker(self, breaker_id: str) -> Breaker:
        for b in self.breakers:
            if b.id == breaker_id:
                return b
        raise KeyError(f"unknown breaker {breaker_id!r}")


def demand_total(grid: GridModel) -> float:
    """Total system demand: all load draws (attacked ones included) plus losses."""
    return sum(l.demand for l in grid.loads) + grid.p_loss


def apply_contingency(grid: GridModel, events: Sequence[tuple[float, str]]) -> None:
    """Register machine-disconnect events; executed by the engine at step boundaries.

    Disconnects are permanent within a run: the machine's mechanical power and
    electrical coupling are zeroed at the event time and never restored.
    """
    for t, machine_id in events:
        grid.machine(machine_id)  # raises KeyError for unknown ids at scenario load
        grid.contingencies.append((float(t), machine_id))
    grid.contingencies.sort(key=lambda e: e[0])


def disconnect_machine(machine: Machine) -> None:
    machine.connected = False
    machine.p_mech = 0.0
    machine.gov_power = 0.0
    machine.governor = None


# ---------------------------------------------------------------------------
# Common-bus power balance for the multi-machine tier
# ---------------------------------------------------------------------------

def solve_load_angle(machines: Sequence[Machine], p_demand: float,
                     theta_guess: float = 0.0) -> float:
    """Angle of the common load bus such that the machine transfers sum to demand.

    Solves sum_i K_i sin(delta_i - theta) = p_demand by Newton iteration with a
    bisection fallback; K_i is each connected machine's peak transfer power.
    """
    active = [m for m in machines if m.connected]
    if not active:
        raise SingularBoundaryError("no connected machines to balance demand")
    ks = [m.coupling for m in active]
    deltas = [m.delta for m in active]
    k_total = sum(ks)
    if p_demand > k_total:
        raise SingularBoundaryError(
            f"demand {p_demand:.4f} pu exceeds total transfer capability {k_total:.4f} pu")

    def f(theta):
        return sum(k * math.sin(d - theta) for k, d in zip(ks, deltas)) - p_demand

    theta = theta_guess
    for _ in range(60):
        df = -sum(k * math.cos(d - theta) for k, d in zip(ks, deltas))
        if abs(df) < 1e-12:
            break
        step = f(theta) / df
        theta -= step
        if abs(step) < 1e-13:
            return theta
    # Newton failed to settle; bracket around the mean rotor angle instead.
    center = sum(deltas) / len(deltas)
    lo, hi = center - math.pi / 2, center + math.pi / 2
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) < 1e-12:
            return mid
        if (flo > 0) == (fm > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)
