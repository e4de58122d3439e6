"""Virtual-time discrete-event communication network.

Nodes exchange typed packets over links with bandwidth, propagation delay,
optional jitter, and loss.  Routing is static minimum-hop, fixed at scenario
load.  Master/outstation apps implement polling semantics: the master polls
each outstation periodically and issues control commands whose payloads are
applied to grid assets on delivery.  All ordering is defined on the virtual
clock; ties dispatch in insertion order so runs are reproducible.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .attacks import DoS, TimeDelay, dos_active, link_delay

DEFAULT_MESSAGE_BYTES = 292
DEFAULT_QUEUE_CAPACITY = 64


class NodeRole(Enum):
    ENDPOINT = "endpoint"
    ROUTER = "router"


class PacketKind(Enum):
    MEASUREMENT_REPORT = "measurement_report"
    CONTROL_COMMAND = "control_command"
    POLL = "poll"
    ACK = "ack"


@dataclass
class NetNode:
    id: str
    role: NodeRole = NodeRole.ENDPOINT
    interfaces: list[str] = field(default_factory=list)
    app: Optional["AppConfig"] = None
    processing_delay: float = 0.0


@dataclass
class AppConfig:
    kind: str                   # "master" | "outstation"
    asset: Optional[str] = None  # grid asset bound to an outstation

    def __post_init__(self):
        if self.kind not in ("master", "outstation"):
            raise ValueError(f"unknown app kind {self.kind!r}")
        if self.kind == "outstation" and not self.asset:
            raise ValueError("outstation app needs a bound grid asset id")


@dataclass
class NetLink:
    id: str
    a: str                      # node id
    b: str                      # node id
    bandwidth: float            # bits/s
    prop_delay: float = 0.0     # s
    jitter: float = 0.0         # uniform +/- jitter, s (0 disables)
    loss_rate: float = 0.0
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY
    endpoints: tuple[str, str] = ()   # interface ids, filled at construction

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError(f"link {self.id!r}: bandwidth must be > 0")
        if self.prop_delay < 0:
            raise ValueError(f"link {self.id!r}: prop_delay must be >= 0")
        if not 0.0 <= self.loss_rate <= 1.0:
            raise ValueError(f"link {self.id!r}: loss_rate must be in [0, 1]")
        if not self.endpoints:
            self.endpoints = (f"{self.a}:{self.id}", f"{self.b}:{self.id}")

    def tx_time(self, size_bytes: int) -> float:
        return size_bytes * 8.0 / self.bandwidth


@dataclass
class Packet:
    id: int
    src: str
    dst: str
    size: int                   # bytes
    created_at: float
    kind: PacketKind
    payload: object = None

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError("packet size must be > 0")


@dataclass
class Dropped:
    reason: str                 # "loss" | "dos" | "queue_full"


@dataclass
class FifoQueue:
    capacity: int
    occupancy: int = 0
    drops: int = 0


class EventQueue:
    """Time-ordered pending events; ties break by insertion sequence."""

    def __init__(self):
        self._heap: list = []
        self._seq = itertools.count()
        self.now = 0.0

    def push(self, t: float, fn: Callable[[], None]) -> None:
        if t < self.now - 1e-9:
            raise ValueError(f"cannot schedule event at {t} before now={self.now}")
        heapq.heappush(self._heap, (max(t, self.now), next(self._seq), fn))

    def run_until(self, t_end: float) -> None:
        """Dispatch every pending event with timestamp strictly before t_end."""
        while self._heap and self._heap[0][0] < t_end:
            t, _, fn = heapq.heappop(self._heap)
            self.now = t
            fn()
        self.now = max(self.now, t_end)

    def __len__(self) -> int:
        return len(self._heap)


def transmit(pkt: Packet, link: NetLink, now: float,
             rng: Optional[np.random.Generator] = None):
    """Single-hop traversal: Dropped on a loss draw, else the arrival time.

    Queuing is handled by the simulator; this is the bare link contract
    (transmission time plus propagation plus jitter sample).
    """
    if link.loss_rate > 0:
        if rng is None:
            raise ValueError("lossy link transmission needs an rng")
        if rng.random() < link.loss_rate:
            return Dropped("loss")
    delay = link.tx_time(pkt.size) + link.prop_delay
    if link.jitter > 0:
        if rng is None:
            raise ValueError("jittery link transmission needs an rng")
        delay += rng.uniform(-link.jitter, link.jitter)
        delay = max(delay, link.tx_time(pkt.size))
    return now + delay


def min_hop_path(adjacency: dict[str, list[str]], src: str, dst: str) -> list[str]:
    """Lexicographically smallest minimum-hop node path from src to dst.

    Breadth-first distances from the destination, then a greedy walk that
    always picks the smallest neighbor id still on a shortest path.
    """
    if src not in adjacency or dst not in adjacency:
        raise KeyError(f"unknown node in route request: {src!r} -> {dst!r}")
    if src == dst:
        return []
    dist = {dst: 0}
    frontier = [dst]
    while frontier:
        nxt = []
        for node in frontier:
            for nb in adjacency[node]:
                if nb not in dist:
                    dist[nb] = dist[node] + 1
                    nxt.append(nb)
        frontier = nxt
    if src not in dist:
        raise ValueError(f"no path between {src!r} and {dst!r}")
    path = [src]
    cur = src
    while cur != dst:
        cur = next(nb for nb in adjacency[cur] if dist.get(nb, math.inf) == dist[cur] - 1)
        path.append(cur)
    return path


@dataclass
class FlowStats:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0


class NetworkSim:
    """Event-driven network bound to a grid through sensor/command callbacks."""

    def __init__(self, nodes: Sequence[NetNode], links: Sequence[NetLink],
                 rng: Optional[np.random.Generator] = None,
                 message_bytes: int = DEFAULT_MESSAGE_BYTES):
        self.nodes = {n.id: n for n in nodes}
        if len(self.nodes) != len(nodes):
            raise ValueError("duplicate node ids")
        self.links = {l.id: l for l in links}
        self.message_bytes = message_bytes
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.events = EventQueue()
        self.log: list[dict] = []
        self.flows: dict[tuple[str, str], FlowStats] = {}
        self._packet_ids = itertools.count(1)
        self._link_by_pair: dict[tuple[str, str], NetLink] = {}
        self._adjacency: dict[str, list[str]] = {n: [] for n in self.nodes}
        self._queues: dict[tuple[str, str], FifoQueue] = {}
        self._busy_until: dict[tuple[str, str], float] = {}
        self._dos: dict[str, list[DoS]] = {}
        self._delays: dict[str, list[TimeDelay]] = {}
        self._routes: dict[tuple[str, str], list[str]] = {}
        self.sensor_read: Callable[[str], float] = lambda asset: 0.0
        self.command_sink: Callable[[str, str, object, float], None] = lambda *a: None
        self.rtt_records: list[dict] = []

        for link in links:
            for end in (link.a, link.b):
                if end not in self.nodes:
                    raise ValueError(f"link {link.id!r} references unknown node {end!r}")
            pair = (link.a, link.b)
            if pair in self._link_by_pair or pair[::-1] in self._link_by_pair:
                raise ValueError(f"parallel links between {link.a!r} and {link.b!r}")
            self._link_by_pair[pair] = link
            self._link_by_pair[pair[::-1]] = link
            self._adjacency[link.a].append(link.b)
            self._adjacency[link.b].append(link.a)
            for direction in (pair, pair[::-1]):
                self._queues[direction] = FifoQueue(capacity=link.queue_capacity)
                self._busy_until[direction] = 0.0
            for node_id, iface in zip((link.a, link.b), link.endpoints):
                self.nodes[node_id].interfaces.append(iface)
        for nb_list in self._adjacency.values():
            nb_list.sort()
        for node in self.nodes.values():
            if node.role is NodeRole.ENDPOINT and not node.interfaces:
                raise ValueError(f"endpoint node {node.id!r} has no interfaces")
            if node.app is not None and node.role is not NodeRole.ENDPOINT:
                raise ValueError(f"node {node.id!r}: apps are only allowed on endpoints")

    # -- topology ----------------------------------------------------------

    def route(self, src: str, dst: str) -> list[str]:
        key = (src, dst)
        if key not in self._routes:
            self._routes[key] = min_hop_path(self._adjacency, src, dst)
        return self._routes[key]

    def baseline_delay(self, src: str, dst: str, size_bytes: Optional[int] = None) -> float:
        """Deterministic end-to-end delay along the route: sum of tx + prop per hop."""
        size = size_bytes if size_bytes is not None else self.message_bytes
        path = self.route(src, dst)
        total = 0.0
        for a, b in zip(path, path[1:]):
            link = self._link_by_pair[(a, b)]
            total += link.tx_time(size) + link.prop_delay
        return total

    def outstation_for(self, asset: str) -> NetNode:
        for node in self.nodes.values():
            if node.app and node.app.kind == "outstation" and node.app.asset == asset:
                return node
        raise KeyError(f"no outstation bound to asset {asset!r}")

    def master_node(self) -> NetNode:
        for node in self.nodes.values():
            if node.app and node.app.kind == "master":
                return node
        raise KeyError("no master app configured")

    def attach_attacks(self, specs: Sequence) -> None:
        for spec in specs:
            if isinstance(spec, DoS):
                self._dos.setdefault(spec.tap, []).append(spec)
            elif isinstance(spec, TimeDelay):
                self._delays.setdefault(spec.tap, []).append(spec)
            else:
                continue
            if spec.tap not in self.links:
                raise ValueError(f"attack tap {spec.tap!r} does not name a network link")

    # -- logging -----------------------------------------------------------

    def _log(self, t: float, event: str, node: str, packet_id, detail: dict) -> None:
        self.log.append({"t": t, "event": event, "node": node,
                         "packet_id": packet_id, "detail": detail})

    def _flow(self, src: str, dst: str) -> FlowStats:
        return self.flows.setdefault((src, dst), FlowStats())

    # -- packet pipeline ----------------------------------------------------

    def send_packet(self, src: str, dst: str, kind: PacketKind, payload=None,
                    now: Optional[float] = None, size: Optional[int] = None) -> Packet:
        t = self.events.now if now is None else now
        pkt = Packet(id=next(self._packet_ids), src=src, dst=dst,
                     size=size or self.message_bytes, created_at=t, kind=kind,
                     payload=payload)
        path = self.route(src, dst)
        self._flow(src, dst).sent += 1
        self._log(t, "send", src, pkt.id,
                  {"kind": kind.value, "dst": dst, "size": pkt.size})
        if not path:
            self._deliver(pkt, src, t)
            return pkt
        self.events.push(t, lambda: self._hop(pkt, path, 0, t))
        return pkt

    def _hop(self, pkt: Packet, path: list[str], hop: int, now: float) -> None:
        a, b = path[hop], path[hop + 1]
        link = self._link_by_pair[(a, b)]
        direction = (a, b)

        for spec in self._dos.get(link.id, ()):
            if dos_active(spec, now):
                self._drop(pkt, link.id, now, "dos")
                return
        if link.loss_rate > 0 and self.rng.random() < link.loss_rate:
            self._drop(pkt, link.id, now, "loss")
            return

        queue = self._queues[direction]
        busy = self._busy_until[direction]
        if now < busy:
            if queue.occupancy >= queue.capacity:
                queue.drops += 1
                self._drop(pkt, link.id, now, "queue_full")
                return
            queue.occupancy += 1
            start_tx = busy
            self.events.push(start_tx, lambda: self._start_tx(queue))
        else:
            start_tx = now
        tx_end = start_tx + link.tx_time(pkt.size)
        self._busy_until[direction] = tx_end

        arrival = tx_end + link.prop_delay
        if link.jitter > 0:
            arrival += self.rng.uniform(-link.jitter, link.jitter)
            arrival = max(arrival, tx_end)
        for spec in self._delays.get(link.id, ()):
            arrival += link_delay(spec, now)

        if hop + 1 == len(path) - 1:
            self.events.push(arrival, lambda: self._deliver(pkt, path[-1], arrival))
        else:
            forward_at = arrival + self.nodes[b].processing_delay
            self.events.push(forward_at, lambda: self._hop(pkt, path, hop + 1, forward_at))

    @staticmethod
    def _start_tx(queue: FifoQueue) -> None:
        queue.occupancy -= 1

    def _drop(self, pkt: Packet, link_id: str, now: float, reason: str) -> None:
        self._flow(pkt.src, pkt.dst).dropped += 1
        self._log(now, "drop", link_id, pkt.id,
                  {"reason": reason, "kind": pkt.kind.value,
                   "src": pkt.src, "dst": pkt.dst})
        if pkt.kind is PacketKind.CONTROL_COMMAND:
            self._log(now, "command_lost", pkt.dst, pkt.id,
                      {"reason": reason, "payload": _payload_summary(pkt.payload)})

    def _deliver(self, pkt: Packet, node_id: str, now: float) -> None:
        self._flow(pkt.src, pkt.dst).delivered += 1
        self._log(now, "deliver", node_id, pkt.id,
                  {"kind": pkt.kind.value, "src": pkt.src, "dst": pkt.dst,
                   "created_at": pkt.created_at, "delay": now - pkt.created_at})
        node = self.nodes[node_id]
        app = node.app
        if app is None:
            return
        if app.kind == "outstation" and pkt.kind is PacketKind.POLL:
            value = self.sensor_read(app.asset)
            self.send_packet(node_id, pkt.src, PacketKind.MEASUREMENT_REPORT,
                             payload={"asset": app.asset, "value": value,
                                      "poll_id": pkt.id,
                                      "poll_created_at": pkt.payload["created_at"]},
                             now=now)
        elif app.kind == "outstation" and pkt.kind is PacketKind.CONTROL_COMMAND:
            action, value = pkt.payload["action"], pkt.payload.get("value")
            self.command_sink(app.asset, action, value, now)
        elif app.kind == "master" and pkt.kind is PacketKind.MEASUREMENT_REPORT:
            self.rtt_records.append({
                "outstation": pkt.src,
                "asset": pkt.payload["asset"],
                "rtt": now - pkt.payload["poll_created_at"],
                "completed_at": now,
            })

    # -- applications --------------------------------------------------------

    def start_polling(self, period: float, start: float = 0.0) -> None:
        """Master polls each outstation once per period, round-robin staggered."""
        if period <= 0:
            raise ValueError("poll period must be > 0")
        master = self.master_node()
        outstations = sorted(n.id for n in self.nodes.values()
                             if n.app and n.app.kind == "outstation")
        if not outstations:
            raise ValueError("polling needs at least one outstation")
        slot = period / len(outstations)

        def emit(out: str, offset: float, k: int):
            t = start + offset + k * period  # multiplicative: no float accumulation
            self.send_packet(master.id, out, PacketKind.POLL,
                             payload={"created_at": t}, now=t)
            self.events.push(t + period, lambda: emit(out, offset, k + 1))

        for j, out in enumerate(outstations):
            self.events.push(start + j * slot,
                             lambda out=out, j=j: emit(out, j * slot, 0))

    def send_command(self, asset: str, action: str, value=None,
                     now: Optional[float] = None) -> Packet:
        """Issue a control command from the master to the outstation bound to asset."""
        master = self.master_node()
        out = self.outstation_for(asset)
        return self.send_packet(master.id, out.id, PacketKind.CONTROL_COMMAND,
                                payload={"action": action, "value": value}, now=now)

    def run_until(self, t_end: float) -> None:
        self.events.run_until(t_end)

    def conservation_ok(self) -> bool:
        """Sent = delivered + dropped + still-pending, summed per flow."""
        pending = len(self.events)
        totals = [s.sent - s.delivered - s.dropped for s in self.flows.values()]
        in_flight = sum(totals)
        return all(v >= 0 for v in totals) and in_flight <= pending


def _payload_summary(payload) -> str:
    if isinstance(payload, dict):
        return ",".join(f"{k}={payload[k]}" for k in sorted(payload) if k != "value") or "-"
    return str(payload)
