"""Deterministic discrete-event engine.

One engine instance advances a single event queue over a fixed horizon.
Between events, every node's power path (harvester, converter, supercap,
load) integrates at a fixed step; discrete happenings with exact deadlines
(water onsets, boot completions, uplink starts and ends, end of run) are
queue events, so the integrator always lands exactly on them. Voltage
threshold crossings are the one exception: they are detected at step
boundaries and therefore located to within one step.

Determinism is a correctness requirement, not an aspiration: node order is
scenario order, event ties break by insertion sequence, and the only
randomness (optional water-onset jitter) is drawn from the scenario seed.
Two runs of the same scenario produce identical traces, bit for bit.
"""

from __future__ import annotations

import enum
import heapq
import math
import random
from dataclasses import dataclass, field

from .harvester import DRY, HarvesterParams, WaterEvent, sample
from .lora import (LinkParams, RadioConfig, Transmission, is_deliverable,
                   link_margin, time_on_air)
from .node import NodeConfig, NodeState, NodeTrace, Phase, load_current, transition
from .power import (DT_MAX, ConverterParams, PowerSample, SupercapState,
                    converter_output_current, step_voltage)


class EngineInvariantError(AssertionError):
    """An internal bookkeeping identity broke; the engine has a bug."""


class EventKind(enum.Enum):
    WATER_ONSET = "water_onset"
    STATE_CHECK = "state_check"
    TX_START = "tx_start"
    TX_END = "tx_end"
    SIM_END = "sim_end"


@dataclass(frozen=True)
class Event:
    time: float
    sequence: int
    kind: EventKind
    node_id: str


class EventQueue:
    """Min-queue over (time, insertion sequence); ties pop in push order."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, Event]] = []
        self._seq = 0
        self._last_popped = -math.inf

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, time: float, kind: EventKind, node_id: str = "") -> Event:
        if time < self._last_popped:
            raise EngineInvariantError(
                f"event at t={time} scheduled before current time {self._last_popped}")
        evt = Event(time, self._seq, kind, node_id)
        self._seq += 1
        heapq.heappush(self._heap, (evt.time, evt.sequence, evt))
        return evt

    def peek(self) -> Event:
        if not self._heap:
            raise EngineInvariantError("peek on empty event queue")
        return self._heap[0][2]

    def pop(self) -> Event:
        if not self._heap:
            raise EngineInvariantError("pop on empty event queue")
        evt = heapq.heappop(self._heap)[2]
        self._last_popped = evt.time
        return evt


next_event = EventQueue.pop


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    position: tuple[float, float]
    config: NodeConfig
    harvester: HarvesterParams
    water: WaterEvent | None = None


@dataclass(frozen=True)
class GatewaySpec:
    position: tuple[float, float] = (0.0, 0.0)
    link: LinkParams = field(default_factory=LinkParams)


@dataclass(frozen=True)
class Scenario:
    """Complete experiment description; everything a run needs."""

    nodes: tuple[NodeSpec, ...]
    gateway: GatewaySpec = GatewaySpec()
    radio: RadioConfig = RadioConfig()
    converter: ConverterParams = ConverterParams()
    supercap: SupercapState = SupercapState()
    horizon: float = 120.0
    dt: float = 1e-3
    seed: int = 0
    onset_jitter: float = 0.0       # s, optional uniform jitter on water onsets
    capture_threshold_db: float = 6.0

    def __post_init__(self) -> None:
        if isinstance(self.nodes, list):
            object.__setattr__(self, "nodes", tuple(self.nodes))
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be unique")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if not 0.0 < self.dt <= DT_MAX:
            raise ValueError(f"dt must be in (0, {DT_MAX}] s")
        if self.onset_jitter < 0.0:
            raise ValueError("onset_jitter must be >= 0")


@dataclass
class SimResult:
    traces: dict[str, NodeTrace]
    transmissions: list[Transmission]
    outcomes: list[str]             # per transmission: delivered/collided/out_of_range
    packets_sent: int
    packets_delivered: int
    packets_collided: int
    packets_out_of_range: int
    delivery_ratio: float
    link_margins: dict[str, float]  # dB, per node with a defined link
    warnings: list[str]


def detect_collisions(transmissions: list[Transmission],
                      capture_threshold_db: float = 6.0) -> list[bool]:
    """Interference survival per transmission (True = decodable).

    Two frames interfere when they share channel and spreading factor and
    their on-air intervals overlap (half-open, so back-to-back frames do
    not interfere). Within an interfering set a frame survives only if its
    received power exceeds every interferer's by at least the capture
    threshold. Implemented as a start-ordered sweep with an active set.
    """
    n = len(transmissions)
    survived = [True] * n
    order = sorted(range(n), key=lambda k: (transmissions[k].start, k))
    active: list[int] = []
    for k in order:
        tx = transmissions[k]
        active = [j for j in active if transmissions[j].end > tx.start]
        for j in active:
            other = transmissions[j]
            if other.channel == tx.channel and other.sf == tx.sf:
                if tx.rx_power_at_gateway - other.rx_power_at_gateway < capture_threshold_db:
                    survived[k] = False
                if other.rx_power_at_gateway - tx.rx_power_at_gateway < capture_threshold_db:
                    survived[j] = False
        active.append(k)
    return survived


class _NodeRuntime:
    """Mutable per-node bookkeeping for one run."""

    __slots__ = ("spec", "water", "state", "v", "trace", "toa",
                 "rx_power", "deliverable", "margin", "distance")

    def __init__(self, spec: NodeSpec, water: WaterEvent | None,
                 scenario: Scenario) -> None:
        self.spec = spec
        self.water = water
        self.state = NodeState()
        self.v = scenario.supercap.voltage
        self.trace = NodeTrace(node_id=spec.node_id)
        self.toa = time_on_air(scenario.radio, spec.config.payload_len)
        gx, gy = scenario.gateway.position
        self.distance = math.hypot(spec.position[0] - gx, spec.position[1] - gy)
        link = scenario.gateway.link
        self.margin = link_margin(link, scenario.radio, self.distance)
        self.deliverable = is_deliverable(link, scenario.radio, self.distance)
        self.rx_power = (self.margin + link.sensitivity(scenario.radio.sf, scenario.radio.bw)
                         + link.noise_fade_margin)


def run(scenario: Scenario) -> SimResult:
    """Run a scenario to its horizon and return the full result."""
    rng = random.Random(scenario.seed)
    waters: list[WaterEvent | None] = []
    for spec in scenario.nodes:
        w = spec.water
        if w is not None and scenario.onset_jitter > 0.0:
            w = WaterEvent(onset=w.onset + rng.uniform(0.0, scenario.onset_jitter),
                           depth=w.depth)
        waters.append(w)

    runtimes = [_NodeRuntime(spec, w, scenario)
                for spec, w in zip(scenario.nodes, waters)]
    by_id = {rt.spec.node_id: rt for rt in runtimes}

    queue = EventQueue()
    queue.push(scenario.horizon, EventKind.SIM_END)
    for rt in runtimes:
        if rt.water is not None:
            queue.push(min(rt.water.onset, scenario.horizon), EventKind.WATER_ONSET,
                       rt.spec.node_id)

    transmissions: list[Transmission] = []
    conv = scenario.converter
    radio = scenario.radio
    cap = scenario.supercap
    dt = scenario.dt

    for rt in runtimes:
        rt.trace.samples.append(PowerSample(0.0, rt.v, 0.0, 0.0))
        rt.trace.phases.append(rt.state.phase.value)

    def apply_transition(rt: _NodeRuntime, t: float, harvesting: bool) -> None:
        old = rt.state
        new = transition(rt.spec.config, old, rt.v, t, radio, harvesting)
        if new is old:
            return
        rt.state = new
        nid = rt.spec.node_id
        if new.phase is Phase.BOOTING:
            if rt.trace.activation_time is None:
                rt.trace.activation_time = t
            queue.push(t + rt.spec.config.boot_duration, EventKind.STATE_CHECK, nid)
        elif new.phase is Phase.IDLE and old.phase is Phase.BOOTING:
            queue.push(new.next_tx_at, EventKind.TX_START, nid)
        elif new.phase is Phase.TRANSMITTING:
            transmissions.append(Transmission(
                node_id=nid, start=t, duration=rt.toa,
                channel=radio.freq, sf=radio.sf,
                rx_power_at_gateway=rt.rx_power))
            rt.trace.tx_events.append((t, rt.toa))
            queue.push(t + rt.toa, EventKind.TX_END, nid)
        elif new.phase is Phase.IDLE and old.phase is Phase.TRANSMITTING:
            queue.push(new.next_tx_at, EventKind.TX_START, nid)
        elif new.phase is Phase.BROWNOUT:
            rt.trace.brownout_events.append(t)
            if old.phase is Phase.TRANSMITTING:
                # the frame never finished: drop it from the air entirely
                for k in range(len(transmissions) - 1, -1, -1):
                    if transmissions[k].node_id == nid:
                        del transmissions[k]
                        break
                rt.trace.tx_events.pop()
        if rt.trace.samples[-1].t == t:
            rt.trace.phases[-1] = new.phase.value

    def integrate_step(t0: float, t1: float) -> None:
        h = t1 - t0
        for rt in runtimes:
            out = sample(rt.spec.harvester, rt.water, t0) if rt.water is not None else DRY
            i_in = converter_output_current(conv, out, rt.v)
            i_quiescent = conv.i_quiescent if out.v_oc >= conv.v_in_min else 0.0
            i_load = load_current(rt.spec.config, rt.state) + i_quiescent
            g = cap.leak_conductance
            v0 = rt.v
            v1 = step_voltage(v0, cap.capacitance, g, i_in, i_load, h, conv.v_target)
            # Trace the currents that actually flowed. The clamps stand in
            # for regulation (top) and brownout starvation (bottom), so the
            # recorded currents are adjusted to keep the charge balance
            # exact for energy accounting.
            unclamped = v0 + (i_in - i_load - g * v0) * h / cap.capacitance
            if unclamped > conv.v_target:
                i_in_eff = (conv.v_target - v0) * cap.capacitance / h + i_load + g * v0
                i_load_eff = i_load
            elif unclamped < 0.0:
                i_in_eff = i_in
                i_load_eff = max(i_in - g * v0 + v0 * cap.capacitance / h, 0.0)
            else:
                i_in_eff = i_in
                i_load_eff = i_load
            rt.v = v1
            rt.trace.samples.append(PowerSample(t1, v1, i_in_eff, i_load_eff))
            rt.trace.phases.append(rt.state.phase.value)
            apply_transition(rt, t1, out.p_mpp > 0.0)

    t = 0.0
    while True:
        target = queue.peek().time
        if target > t:
            # integrate toward the next event, yielding to any earlier
            # event that stepping itself schedules
            while t < target:
                target = min(target, queue.peek().time)
                if target <= t:
                    break
                rem = target - t
                if rem <= dt:
                    t_next = target
                else:
                    t_next = t + dt
                integrate_step(t, t_next)
                t = t_next
            continue
        evt = queue.pop()
        if evt.time < t:
            raise EngineInvariantError("event popped in the past")
        if evt.kind is EventKind.SIM_END:
            break
        rt = by_id[evt.node_id]
        out = sample(rt.spec.harvester, rt.water, t) if rt.water is not None else DRY
        apply_transition(rt, t, out.p_mpp > 0.0)

    # per-packet outcome: range first, then interference among survivors
    survived = detect_collisions(transmissions, scenario.capture_threshold_db)
    outcomes: list[str] = []
    delivered = collided = out_of_range = 0
    for tx, ok in zip(transmissions, survived):
        rt = by_id[tx.node_id]
        if not rt.deliverable:
            outcomes.append("out_of_range")
            out_of_range += 1
        elif not ok:
            outcomes.append("collided")
            collided += 1
        else:
            outcomes.append("delivered")
            delivered += 1
    sent = len(transmissions)
    if sent != delivered + collided + out_of_range:
        raise EngineInvariantError("packet accounting identity violated")
    ratio = delivered / sent if sent else 1.0

    warnings: list[str] = []
    for rt in runtimes:
        if rt.water is not None and rt.trace.activation_time is None:
            if rt.water.depth < rt.spec.harvester.min_depth:
                why = "water depth below harvester activation threshold"
            else:
                why = "horizon ended before the activation voltage was reached"
            warnings.append(f"node {rt.spec.node_id} never activated: {why}")

    traces = {rt.spec.node_id: rt.trace for rt in runtimes}
    return SimResult(
        traces=traces,
        transmissions=transmissions,
        outcomes=outcomes,
        packets_sent=sent,
        packets_delivered=delivered,
        packets_collided=collided,
        packets_out_of_range=out_of_range,
        delivery_ratio=ratio,
        link_margins={rt.spec.node_id: rt.margin for rt in runtimes},
        warnings=warnings,
    )
