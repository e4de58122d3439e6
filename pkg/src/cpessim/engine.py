"""Co-simulation engine: one virtual clock over the physical solver and the
event-driven network.

Each macro-step of ``dt_phys`` first applies staged boundary mutations
(commands that arrived during the previous step, scheduled breaker actions,
contingencies), then dispatches every network event with a timestamp inside
the step, then advances the physical models.  Commands arriving mid-step
therefore take effect at the next step boundary.  One RNG stream per
subsystem is derived from the master seed by fixed labels, so attaching a
network to a scenario never perturbs the physical noise draws.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import risk as risk_mod
from .attacks import (BreakerAttack, ControlDia, DiaCombined, DoS, LoadChange,
                      TimeDelay, apply_breaker_attack, apply_control_dia,
                      apply_dia, apply_load_change)
from .metrics import (MetricReport, TimeSeries, control_metrics, cyber_metrics,
                      frequency_stability, voltage_stability)
from .network import NetworkSim
from .physical import (GridModel, NodalBoundary, ProtectionAction,
                       StateSpaceGroup, demand_total, disconnect_machine,
                       group_step, lti_step, nodal_solve, protection_check,
                       solve_load_angle, swing_step)
from .scenario import Scenario, ScenarioError, scenario_hash

_TIME_EPS = 1e-12


def rng_for(seed: int, label: str) -> np.random.Generator:
    """Independent deterministic stream for (seed, label)."""
    entropy = [seed & 0xFFFFFFFFFFFFFFFF] + list(label.encode())
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass
class RunResult:
    scenario_name: str
    seed: int
    traces: dict[str, TimeSeries]
    event_log: list[dict]
    attack_samples: list[dict]
    metric_reports: list[MetricReport]
    risk_report: Optional[risk_mod.RiskReport]
    manifest: dict


def run(sc: Scenario, seed: Optional[int] = None) -> RunResult:
    """Execute one scenario deterministically; returns traces, logs, and reports."""
    return _Run(sc, seed).execute()


def run_many(scenarios, jobs: int = 2) -> list[RunResult]:
    """Execute scenarios concurrently; every run is fully isolated."""
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(run, scenarios))


class _Run:
    def __init__(self, sc: Scenario, seed: Optional[int]):
        self.sc = sc
        self.seed = sc.seed if seed is None else seed
        self.dt = sc.dt_phys
        self.grid: GridModel = sc.build_grid()
        self.rng_phys = rng_for(self.seed, "phys.noise")
        self.rng_net = rng_for(self.seed, "net")
        self.rng_attack = rng_for(self.seed, "attack")
        self.log: list[dict] = []
        self.attack_samples: list[dict] = []
        self.staged_commands: list[tuple[str, str, object, float]] = []
        self.traces: dict[str, list[float]] = {}
        self.trace_units: dict[str, str] = {}
        self.trace_t: list[float] = []
        self._prev_action = ProtectionAction.NONE
        self._topology_dirty = False

        self.bindings = {b.plant_name: b for b in sc.plant_bindings()}
        self._last_meas = {p.name: None for p in self.grid.plants}

        # attack specs by tap
        self.load_attacks = [a for a in sc.attacks if isinstance(a, LoadChange)]
        self.meas_attacks: dict[str, DiaCombined] = {}
        self.ctrl_attacks: dict[str, ControlDia] = {}
        link_specs = []
        for spec in sc.attacks:
            if isinstance(spec, DiaCombined):
                self.meas_attacks[spec.tap.partition(":")[2]] = spec
            elif isinstance(spec, ControlDia):
                self.ctrl_attacks[spec.tap.partition(":")[2]] = spec
            elif isinstance(spec, (DoS, TimeDelay)):
                link_specs.append(replace(spec, tap=spec.tap.partition(":")[2]))
            elif isinstance(spec, BreakerAttack):
                apply_breaker_attack(self.grid, spec)

        # pending boundary events
        self.pending_breaker = sorted(
            [(t, b.id, action) for b in self.grid.breakers for t, action in b.schedule],
            key=lambda e: e[0])
        self.pending_contingency = list(self.grid.contingencies)

        # network wiring
        self.net: Optional[NetworkSim] = None
        if sc.network is not None:
            cfg = sc.network
            self.net = NetworkSim(cfg.nodes, cfg.links, rng=self.rng_net,
                                  message_bytes=cfg.message_bytes)
            self.net.attach_attacks(link_specs)
            self.net.sensor_read = self._sensor_read
            self.net.command_sink = self._stage_command
            self.log = self.net.log  # one shared chronological log
            if any(n.app and n.app.kind == "master" for n in cfg.nodes):
                outstations = any(n.app and n.app.kind == "outstation" for n in cfg.nodes)
                if outstations and cfg.poll_period > 0:
                    self.net.start_polling(cfg.poll_period, cfg.poll_start)
                for cmd in cfg.commands:
                    self._schedule_command(cmd)
        elif link_specs:
            raise ScenarioError("attacks", "link attacks need a network section")

        # physical tier
        self.td_cfg = sc.td_system()
        if self.td_cfg is not None:
            self.mode = "td"
            self._init_multimachine(extra_demand=self.td_cfg.dist_demand)
            self._init_td()
        elif len(self.grid.machines) > 1:
            self.mode = "multi"
            self._init_multimachine()
        elif len(self.grid.machines) == 1:
            self.mode = "aggregate"
            self._init_aggregate()
        else:
            raise ScenarioError("grid.machines", "scenario needs at least one machine")

    # -- initialization -----------------------------------------------------

    def _init_aggregate(self):
        self.pcc = None
        pcc_id = self.sc.pcc_breaker()
        if pcc_id:
            self.pcc = self.grid.breaker(pcc_id)
        if self.pcc is None or not self.pcc.closed:
            # autonomous from the start: balance the machine against net demand
            machine = self.grid.machines[0]
            p_inject = sum(b.power_base for b in self.bindings.values())
            machine.p_mech = demand_total(self.grid) - p_inject

    def _init_multimachine(self, extra_demand: float = 0.0):
        machines = self.grid.machines
        d0 = demand_total(self.grid) + extra_demand
        total_pm = sum(m.p_mech for m in machines)
        machines[0].p_mech += d0 - total_pm  # first machine is the slack
        self.theta = 0.0
        for m in machines:
            if m.p_mech > m.coupling:
                raise ScenarioError(
                    "grid.machines",
                    f"machine {m.id!r} cannot transfer its setpoint {m.p_mech:.3f} pu "
                    f"over coupling {m.coupling:.3f} pu")
            m.delta = math.asin(m.p_mech / m.coupling)

    def _init_td(self):
        cfg = self.td_cfg
        self.td_breaker = self.grid.breaker(cfg.feeder_breaker)
        g_f = 1.0 / cfg.feeder_r if cfg.feeder_r > 0 else 0.0
        g_src = [1.0 / s.r for s in cfg.sources]
        # DC operating point: inductors shorted to their resistances, capacitor open
        if self.td_breaker.closed:
            y = np.array([[sum(g_src) + g_f, -g_f],
                          [-g_f, g_f + cfg.load_conductance]])
            i = np.array([sum(g * s.emf for g, s in zip(g_src, cfg.sources)), 0.0])
        else:
            y = np.array([[sum(g_src), 0.0], [0.0, cfg.load_conductance]])
            i = np.array([sum(g * s.emf for g, s in zip(g_src, cfg.sources)), 0.0])
        v = np.linalg.solve(y, i)
        self.v1 = float(v[0])
        self.v2 = float(v[1])
        self.v1_nom = self.v1
        self.v2_nom = self.v2
        i_src = [g * (s.emf - self.v1) for g, s in zip(g_src, cfg.sources)]
        i_f = (self.v1 - self.v2) / cfg.feeder_r if self.td_breaker.closed else 0.0
        self.p_pcc0 = self.v1 * i_f
        if self.p_pcc0 <= 0:
            raise ScenarioError("grid.td_system", "nominal boundary transfer must be > 0")
        self._p_norm = 1.0  # filtered boundary power, per unit of nominal transfer
        self._trans_states = np.array(i_src)
        self._dist_states = np.array([i_f, self.v2])
        self._rebuild_td_groups()

    def _rebuild_td_groups(self):
        cfg = self.td_cfg
        n = len(cfg.sources)
        a_t = np.zeros((n, n))
        d_t = np.zeros((n, 2))   # inputs: [v1, 1]
        for idx, src in enumerate(cfg.sources):
            if self.grid.machine(src.machine).connected:
                a_t[idx, idx] = -src.r / src.l
                d_t[idx, 0] = -1.0 / src.l
                d_t[idx, 1] = src.emf / src.l
        self.trans_group = StateSpaceGroup(
            name="transmission", A=a_t, D=d_t, E=np.eye(n), F=np.zeros((n, 2)),
            s=self._trans_states, boundary_ports=("pcc",))
        if self.td_breaker.closed:
            a_d = np.array([[-cfg.feeder_r / cfg.feeder_l, -1.0 / cfg.feeder_l],
                            [1.0 / cfg.shunt_c, -cfg.load_conductance / cfg.shunt_c]])
            d_d = np.array([[1.0 / cfg.feeder_l], [0.0]])
        else:
            a_d = np.array([[0.0, 0.0],
                            [0.0, -cfg.load_conductance / cfg.shunt_c]])
            d_d = np.zeros((2, 1))
        self.dist_group = StateSpaceGroup(
            name="distribution", A=a_d, D=d_d, E=np.eye(2), F=np.zeros((2, 1)),
            s=self._dist_states, boundary_ports=("pcc", "dist_bus"))
        self._topology_dirty = False

    # -- grid/network glue ----------------------------------------------------

    def _sensor_read(self, asset: str) -> float:
        try:
            return self.grid.machine(asset).frequency
        except KeyError:
            pass
        try:
            return self.grid.load(asset).demand
        except KeyError:
            pass
        try:
            return 1.0 if self.grid.breaker(asset).closed else 0.0
        except KeyError:
            pass
        for fs in self.grid.fast_sources:
            if fs.id == asset:
                return fs.power
        return self._system_frequency()

    def _stage_command(self, asset: str, action: str, value, arrival: float) -> None:
        self.staged_commands.append((asset, action, value, arrival))

    def _schedule_command(self, cmd: dict) -> None:
        t, asset, action, value = cmd["t"], cmd["asset"], cmd["action"], cmd.get("value")
        self.net.events.push(t, lambda: self.net.send_command(asset, action, value, now=t))

    def _apply_command(self, asset: str, action: str, value, t: float) -> None:
        if action in ("shed", "unshed"):
            load = self.grid.load(asset)
            if action == "shed" and not load.sheddable:
                self._log(t, "command_rejected", asset, {"action": action,
                                                         "reason": "not sheddable"})
                return
            load.shed = action == "shed"
        elif action in ("open_breaker", "close_breaker"):
            self._set_breaker(self.grid.breaker(asset), action == "close_breaker", t)
            return
        self._log(t, "command_applied", asset, {"action": action})

    def _set_breaker(self, breaker, closed: bool, t: float) -> None:
        if breaker.closed == closed:
            return
        breaker.closed = closed
        self._topology_dirty = True
        if self.mode == "td" and breaker is self.td_breaker and not closed:
            self._dist_states = np.array([0.0, float(self.dist_group.s[1])])
        self._log(t, "breaker", breaker.id, {"action": "close" if closed else "open"})

    def _log(self, t: float, event: str, node: str, detail: dict) -> None:
        self.log.append({"t": t, "event": event, "node": node,
                         "packet_id": None, "detail": detail})

    # -- main loop ------------------------------------------------------------

    def execute(self) -> RunResult:
        sc = self.sc
        n_steps = int(round(sc.horizon / self.dt))
        self._apply_load_windows(0.0)
        self._record(0.0)

        for k in range(n_steps):
            t = k * self.dt
            t_next = (k + 1) * self.dt
            self._apply_boundary(t)
            if self.net is not None:
                self.net.run_until(t_next)
            self._apply_load_windows(t)
            if self.mode == "aggregate":
                self._step_aggregate(t, k)
            elif self.mode == "multi":
                self._step_multi(t, k)
            else:
                self._step_td(t, k)
            self._record(t_next)

        traces = {name: TimeSeries(t=np.array(self.trace_t), v=np.array(vals),
                                   unit=self.trace_units[name], name=name)
                  for name, vals in self.traces.items()}
        reports = compute_metrics(sc, traces, self.log)
        risk_report = None
        if sc.risk_inputs is not None:
            ri = sc.risk_inputs
            risk_report = risk_mod.risk(ri["probability"], ri["priorities"],
                                        ri["impacts"], ri["thresholds"], name=sc.name)
        manifest = {
            "schema_version": 1,
            "scenario_name": sc.name,
            "seed": self.seed,
            "scenario_sha256": scenario_hash(sc.doc),
            "package_version": __version__,
            "dt_phys": self.dt,
            "horizon": n_steps * self.dt,
            "traces": sorted(traces),
        }
        return RunResult(scenario_name=sc.name, seed=self.seed, traces=traces,
                         event_log=self.log, attack_samples=self.attack_samples,
                         metric_reports=reports, risk_report=risk_report,
                         manifest=manifest)

    def _apply_boundary(self, t: float) -> None:
        for asset, action, value, _arrival in self.staged_commands:
            self._apply_command(asset, action, value, t)
        self.staged_commands.clear()
        while self.pending_breaker and self.pending_breaker[0][0] <= t + _TIME_EPS:
            _, breaker_id, action = self.pending_breaker.pop(0)
            self._set_breaker(self.grid.breaker(breaker_id), action == "close", t)
        while self.pending_contingency and self.pending_contingency[0][0] <= t + _TIME_EPS:
            _, machine_id = self.pending_contingency.pop(0)
            machine = self.grid.machine(machine_id)
            if machine.connected:
                disconnect_machine(machine)
                self._topology_dirty = True
                if self.mode == "td":
                    for idx, src in enumerate(self.td_cfg.sources):
                        if src.machine == machine_id:
                            self._trans_states = np.array(self.trans_group.s)
                            self._trans_states[idx] = 0.0
                self._log(t, "contingency", machine_id, {"action": "disconnect"})
        if self.mode == "td" and self._topology_dirty:
            self._dist_states = np.array(self.dist_group.s)
            if not self.td_breaker.closed:
                self._dist_states[0] = 0.0
            self._rebuild_td_groups()

    def _apply_load_windows(self, t: float) -> None:
        for spec in self.load_attacks:
            apply_load_change(self.grid, t, spec)

    # -- physical tiers ---------------------------------------------------------

    def _plant_injection(self) -> float:
        total = 0.0
        for plant in self.grid.plants:
            b = self.bindings.get(plant.name)
            if b is not None:
                total += b.power_base + b.power_gain * float(plant.x[0])
        return total

    def _advance_plants(self, t: float, k: int) -> None:
        for plant in self.grid.plants:
            b = self.bindings.get(plant.name)
            op = b.operating_point if b else 0.0
            x_next, y_dev = lti_step(plant, k, self.rng_phys)
            y_abs = op + y_dev
            spec = self.meas_attacks.get(plant.name)
            if spec is not None:
                y_att, dy = apply_dia(y_abs, t, spec, self.rng_attack)
                if np.any(dy != 0):
                    self.attack_samples.append(
                        {"t": t, "tap": f"meas:{plant.name}",
                         "delta": [float(d) for d in np.atleast_1d(dy)]})
            else:
                y_att = y_abs
            u_cmd = plant.control_matrix @ (y_att - op)
            cspec = self.ctrl_attacks.get(plant.name)
            if cspec is not None:
                u_cmd, du = apply_control_dia(u_cmd, t, cspec)
                if np.any(du != 0):
                    self.attack_samples.append(
                        {"t": t, "tap": f"ctrl:{plant.name}",
                         "delta": [float(d) for d in np.atleast_1d(du)]})
            plant.x = x_next
            plant.u = np.atleast_1d(u_cmd)
            self._last_meas[plant.name] = float(np.atleast_1d(y_att)[0])

    def _step_aggregate(self, t: float, k: int) -> None:
        machine = self.grid.machines[0]
        p_inject = self._plant_injection()
        pinned = self.pcc is not None and self.pcc.closed
        f_now = self.grid.f_nom if pinned else machine.frequency
        p_fast = sum(fs.step(f_now, self.grid.f_nom, self.dt)
                     for fs in self.grid.fast_sources)
        if pinned:
            machine.omega = machine.omega_sync
            machine.gov_power = 0.0
        else:
            p_elec = demand_total(self.grid) - p_inject - p_fast
            self.grid.machines[0] = swing_step(machine, p_elec, self.dt, step_index=k)
        self._advance_plants(t, k)

    def _step_multi(self, t: float, k: int) -> None:
        machines = self.grid.machines
        self.theta = solve_load_angle(machines, demand_total(self.grid), self.theta)
        for i, m in enumerate(machines):
            p_elec = m.coupling * math.sin(m.delta - self.theta)
            machines[i] = swing_step(m, p_elec, self.dt, step_index=k)

    def _step_td(self, t: float, k: int) -> None:
        cfg = self.td_cfg
        dt = self.dt
        closed = self.td_breaker.closed
        y11 = 0.0
        i1 = 0.0
        i_src_total = 0.0
        for idx, src in enumerate(cfg.sources):
            if not self.grid.machine(src.machine).connected:
                continue
            alpha = dt * src.r / (2 * src.l)
            gamma = dt / (2 * src.l + dt * src.r)
            i_state = float(self.trans_group.s[idx])
            i_src_total += i_state
            y11 += gamma
            i1 += (1 - alpha) / (1 + alpha) * i_state + gamma * (2 * src.emf - self.v1)
        i_f = float(self.dist_group.s[0])
        v_c = float(self.dist_group.s[1])
        # boundary-bus capacitor: absorbs the mismatch current at topology changes
        g_c1 = 2 * cfg.pcc_shunt_c / dt
        i_cap1_prev = i_src_total - (i_f if closed else 0.0)
        y11 += g_c1
        i1 += g_c1 * self.v1 + i_cap1_prev
        g_c2 = 2 * cfg.shunt_c / dt
        i_cap2_prev = (i_f if closed else 0.0) - cfg.load_conductance * v_c
        y22 = g_c2 + cfg.load_conductance
        i2 = g_c2 * v_c + i_cap2_prev
        if closed:
            alpha_f = dt * cfg.feeder_r / (2 * cfg.feeder_l)
            gamma_f = dt / (2 * cfg.feeder_l + dt * cfg.feeder_r)
            i_hist_f = (1 - alpha_f) / (1 + alpha_f) * i_f + gamma_f * (self.v1 - v_c)
            y = np.array([[y11 + gamma_f, -gamma_f], [-gamma_f, y22 + gamma_f]])
            i = np.array([i1 - i_hist_f, i2 + i_hist_f])
        else:
            y = np.array([[y11, 0.0], [0.0, y22]])
            i = np.array([i1, i2])
        v = nodal_solve(NodalBoundary(Y=y, I=i))
        v1_mid = 0.5 * (self.v1 + float(v[0]))
        self.trans_group, _currents = group_step(self.trans_group, [v1_mid, 1.0], dt)
        self.dist_group, _out = group_step(
            self.dist_group, [v1_mid if closed else 0.0], dt)
        self.v1 = float(v[0])
        self.v2 = float(self.dist_group.s[1])
        i_f_new = float(self.dist_group.s[0])
        p_pcc = self.v1 * i_f_new if closed else 0.0

        # machines see the (lagged, bounded) boundary transfer on top of local load
        p_target = min(max(p_pcc / self.p_pcc0, -1.0), 3.0)
        decay = math.exp(-dt / cfg.power_filter) if cfg.power_filter > 0 else 0.0
        self._p_norm = p_target + (self._p_norm - p_target) * decay
        machines = self.grid.machines
        d_total = demand_total(self.grid) + cfg.dist_demand * self._p_norm
        self.theta = solve_load_angle(machines, d_total, self.theta)
        for idx, m in enumerate(machines):
            p_elec = m.coupling * math.sin(m.delta - self.theta)
            machines[idx] = swing_step(m, p_elec, self.dt, step_index=k)

    # -- recording ---------------------------------------------------------------

    def _system_frequency(self) -> float:
        machines = [m for m in self.grid.machines if m.connected]
        if self.mode == "aggregate":
            machine = self.grid.machines[0]
            if self.pcc is not None and self.pcc.closed:
                return self.grid.f_nom
            return machine.frequency
        if not machines:
            return 0.0
        h_total = sum(m.inertia_const for m in machines)
        return sum(m.inertia_const * m.frequency for m in machines) / h_total

    def _push(self, name: str, value: float, unit: str) -> None:
        self.traces.setdefault(name, []).append(float(value))
        self.trace_units[name] = unit

    def _record(self, t: float) -> None:
        self.trace_t.append(t)
        freq = self._system_frequency()
        self._push("freq", freq, "Hz")
        self._push("demand_total", demand_total(self.grid), "pu")
        if self.mode in ("multi", "td"):
            for m in self.grid.machines:
                self._push(f"freq_{m.id}", m.frequency, "Hz")
        if self.mode == "aggregate":
            machine = self.grid.machines[0]
            self._push("p_gen", machine.p_mech + machine.gov_power, "pu")
            if self.grid.fast_sources:
                self._push("p_fast", sum(fs.power for fs in self.grid.fast_sources), "pu")
        if self.mode == "td":
            self._push("v_pcc", self.v1 / self.v1_nom, "pu")
            self._push("v_dist", self.v2 / self.v2_nom, "pu")
        for plant in self.grid.plants:
            b = self.bindings.get(plant.name)
            op = b.operating_point if b else 0.0
            signal = op + float((plant.C @ plant.x)[0])  # true output, noise-free
            meas = self._last_meas[plant.name]
            self._push(f"{plant.name}_signal", signal, "signal")
            self._push(f"{plant.name}_meas", signal if meas is None else meas, "signal")
            if b is not None and b.operating_point:
                self._push(f"{plant.name}_signal_pu", signal / b.operating_point, "pu")
            if b is not None:
                self._push(f"{plant.name}_power",
                           b.power_base + b.power_gain * float(plant.x[0]), "pu")
        for breaker in self.grid.breakers:
            self._push(f"breaker_{breaker.id}", 1.0 if breaker.closed else 0.0, "state")
        for load in self.grid.loads:
            if load.sheddable:
                self._push(f"shed_{load.id}", 1.0 if load.shed else 0.0, "state")

        action = protection_check(freq, self.grid.protection)
        if action is not self._prev_action:
            self._log(t, "protection", "grid", {"action": action.value,
                                                "frequency": freq})
            self._prev_action = action


# ---------------------------------------------------------------------------
# Metrics assembly
# ---------------------------------------------------------------------------

def compute_metrics(sc: Scenario, traces: dict[str, TimeSeries],
                    event_log: list[dict]) -> list[MetricReport]:
    """Evaluate every requested metric from traces and the event log."""
    protection = sc.build_grid().protection
    reports = []
    for req in sc.metrics_requested:
        kind = req["kind"]
        if kind == "cyber":
            reports.append(_cyber_report(sc, event_log))
            continue
        trace_name = req["trace"]
        if trace_name not in traces:
            raise ScenarioError("metrics", f"trace {trace_name!r} not produced by this "
                                           f"scenario (have {sorted(traces)})")
        series = traces[trace_name]
        if kind == "frequency_stability":
            reports.append(frequency_stability(series, protection))
        elif kind == "voltage_stability":
            limits = tuple(req.get("limits", (0.95, 1.05)))
            reports.append(voltage_stability(series, limits))
        elif kind == "control":
            reports.append(control_metrics(series, command=req["command"],
                                           band_pct=req.get("band_pct", 0.02)))
    return reports


def _cyber_report(sc: Scenario, event_log: list[dict]) -> MetricReport:
    baselines = {}
    flow_links = {}
    bandwidths = {}
    if sc.network is not None:
        topo = NetworkSim(sc.network.nodes, sc.network.links,
                          message_bytes=sc.network.message_bytes)
        bandwidths = {l.id: l.bandwidth for l in sc.network.links}
        flows = set()
        for e in event_log:
            if e["event"] == "send":
                flows.add((e["node"], e["detail"]["dst"]))
        for src, dst in sorted(flows):
            key = f"{src}->{dst}"
            baselines[key] = topo.baseline_delay(src, dst)
            path = topo.route(src, dst)
            flow_links[key] = [topo._link_by_pair[(a, b)].id
                               for a, b in zip(path, path[1:])]
    return cyber_metrics(event_log, horizon=sc.horizon, baselines=baselines,
                         flow_links=flow_links, bandwidths=bandwidths)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export(result: RunResult, out_dir, scenario_doc: Optional[dict] = None) -> Path:
    """Write traces, event log, reports, and manifest under out_dir."""
    out = Path(out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    for name, series in sorted(result.traces.items()):
        _write_atomic(out / "traces" / f"{name}.csv", series.to_csv())
    _write_atomic(out / "events.json",
                  json.dumps({"events": result.event_log,
                              "attack_samples": result.attack_samples}, indent=2))
    _write_atomic(out / "events.csv", _events_csv(result.event_log))
    report = report_dict(result)
    _write_atomic(out / "report.json", json.dumps(report, indent=2))
    _write_atomic(out / "report.txt", _report_text(report))
    _write_atomic(out / "manifest.json", json.dumps(result.manifest, indent=2))
    if scenario_doc is not None:
        _write_atomic(out / "scenario.json",
                      json.dumps(scenario_doc, indent=2, sort_keys=True))
    return out


def report_dict(result: RunResult) -> dict:
    return {
        "scenario": result.scenario_name,
        "seed": result.seed,
        "metrics": [r.to_dict() for r in result.metric_reports],
        "risk": (risk_mod.report_to_dict(result.risk_report)
                 if result.risk_report else None),
    }


def _events_csv(event_log: list[dict]) -> str:
    lines = ["t,event,node,packet_id,detail"]
    for e in event_log:
        detail = ";".join(f"{k}={e['detail'][k]}" for k in sorted(e["detail"]))
        pid = "" if e["packet_id"] is None else str(e["packet_id"])
        lines.append(f"{e['t']!r},{e['event']},{e['node']},{pid},\"{detail}\"")
    return "\n".join(lines) + "\n"


def _report_text(report: dict) -> str:
    lines = [f"scenario: {report['scenario']}", f"seed: {report['seed']}", ""]
    for m in report["metrics"]:
        lines.append(f"[{m['kind']}] trace={m['trace']}")
        for key, value in m["values"].items():
            if isinstance(value, dict):
                for sub, sval in value.items():
                    lines.append(f"  {key}.{sub:<28} {sval}")
            else:
                lines.append(f"  {key:<32} {value}")
        for label, intervals in m.get("intervals", {}).items():
            pretty = ", ".join(f"[{a:.4f}, {b:.4f}]" for a, b in intervals)
            lines.append(f"  intervals.{label:<22} {pretty}")
        lines.append("")
    risk = report.get("risk")
    if risk:
        lines.append("[risk]")
        lines.append(f"  damage {risk['damage']}  risk {risk['risk']}  pool {risk['pool']}")
        for obj, score in risk["per_objective_scores"].items():
            lines.append(f"  {obj:<32} {score}")
        lines.append("")
    return "\n".join(lines)
