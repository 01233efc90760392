"""Node firmware lifecycle.

The node sits dormant until its cell gets wet, stays electrically silent
while the supercap charges, and powers on at v_on. Boot draws a surge
current for boot_duration, then the first uplink goes out immediately and
further uplinks follow every tx_interval. If the supply ever sags below
v_off the node browns out and must recharge all the way back to v_on
before it reboots (full hysteresis, so the node cannot oscillate around
the threshold).

transition() is a total function: it applies at most one edge per call and
returns the state unchanged when no edge fires. The engine calls it at
every integration step and at every scheduled event time, so edges with
exact deadlines (boot end, uplink start, uplink end) fire at exactly those
times rather than on the integration grid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .lora import RadioConfig, time_on_air


class Phase(enum.Enum):
    DORMANT = "dormant"
    CHARGING = "charging"
    BOOTING = "booting"
    IDLE = "idle"
    TRANSMITTING = "transmitting"
    BROWNOUT = "brownout"


# Phases where the chip is powered and a supply sag forces a brownout.
POWERED_PHASES = frozenset({Phase.BOOTING, Phase.IDLE, Phase.TRANSMITTING})


@dataclass(frozen=True)
class NodeConfig:
    v_on: float = 3.7               # V, activation threshold
    v_off: float = 2.5              # V, brownout threshold (hysteresis below v_on)
    tx_interval: float = 10.0       # s between uplink starts
    i_tx: float = 0.080             # A while transmitting
    i_idle: float = 0.0015          # A while awake between uplinks
    boot_surge_current: float = 0.120  # A during boot
    boot_duration: float = 0.3      # s
    payload_len: int = 12           # bytes per uplink

    def __post_init__(self) -> None:
        if not self.v_on > self.v_off >= 0.0:
            raise ValueError("require v_on > v_off >= 0")
        if self.tx_interval <= 0.0:
            raise ValueError("tx_interval must be positive")
        if min(self.i_tx, self.i_idle, self.boot_surge_current) < 0.0:
            raise ValueError("currents must be >= 0")
        if self.i_tx < self.i_idle:
            raise ValueError("i_tx must be >= i_idle")
        if self.boot_duration < 0.0:
            raise ValueError("boot_duration must be >= 0")


@dataclass(frozen=True)
class NodeState:
    phase: Phase = Phase.DORMANT
    phase_entered_at: float = 0.0
    next_tx_at: float = 0.0     # meaningful in IDLE/TRANSMITTING only

    def enter(self, phase: Phase, t: float, **changes) -> "NodeState":
        return replace(self, phase=phase, phase_entered_at=t, **changes)


@dataclass
class NodeTrace:
    """Everything one simulated node produced over a run."""

    node_id: str
    activation_time: float | None = None
    tx_events: list[tuple[float, float]] | None = None  # (start, duration)
    brownout_events: list[float] | None = None
    samples: list | None = None     # list[PowerSample]
    phases: list[str] | None = None  # phase name per sample row

    def __post_init__(self) -> None:
        if self.tx_events is None:
            self.tx_events = []
        if self.brownout_events is None:
            self.brownout_events = []
        if self.samples is None:
            self.samples = []
        if self.phases is None:
            self.phases = []


def load_current(config: NodeConfig, state: NodeState) -> float:
    """Current the node draws from the storage node in its current phase (A)."""
    phase = state.phase
    if phase is Phase.BOOTING:
        return config.boot_surge_current
    if phase is Phase.IDLE:
        return config.i_idle
    if phase is Phase.TRANSMITTING:
        return config.i_tx
    # dormant / charging / brownout: chip unpowered
    return 0.0


def transition(config: NodeConfig, state: NodeState, v_cap: float, t: float,
               radio: RadioConfig, harvesting: bool = False) -> NodeState:
    """Apply at most one lifecycle edge at time t and return the new state.

    harvesting flags a nonzero harvester output; it only matters for the
    dormant-to-charging edge (the rest of the lifecycle is driven by the
    supply voltage and by time).
    """
    if t < state.phase_entered_at:
        raise ValueError("time must not run backwards within a node")
    phase = state.phase

    if phase is Phase.DORMANT:
        if harvesting:
            return state.enter(Phase.CHARGING, t)
        return state

    # A sagging supply overrides everything while the chip is powered.
    if phase in POWERED_PHASES and v_cap < config.v_off:
        return state.enter(Phase.BROWNOUT, t)

    if phase is Phase.CHARGING:
        if v_cap >= config.v_on:
            return state.enter(Phase.BOOTING, t)
        return state

    if phase is Phase.BOOTING:
        # Deadline formed as entered + duration so a caller scheduling a
        # check at exactly that float instant sees the edge fire there.
        if t >= state.phase_entered_at + config.boot_duration:
            # First uplink goes out immediately after boot.
            return state.enter(Phase.IDLE, t, next_tx_at=t)
        return state

    if phase is Phase.IDLE:
        if t >= state.next_tx_at:
            return state.enter(Phase.TRANSMITTING, t)
        return state

    if phase is Phase.TRANSMITTING:
        if t >= state.phase_entered_at + time_on_air(radio, config.payload_len):
            return state.enter(Phase.IDLE, t, next_tx_at=state.next_tx_at + config.tx_interval)
        return state

    # brownout: re-arm only through the full hysteresis band
    if v_cap >= config.v_on:
        return state.enter(Phase.CHARGING, t)
    return state


def run_node(scenario) -> NodeTrace:
    """Run a single-node scenario end to end and return its trace.

    Thin convenience wrapper over the event engine for the one-node,
    one-water-event experiment.
    """
    from .engine import run

    if len(scenario.nodes) != 1:
        raise ValueError("run_node expects exactly one node in the scenario")
    if scenario.nodes[0].water is None:
        raise ValueError("run_node expects the node to have a water event")
    result = run(scenario)
    return result.traces[scenario.nodes[0].node_id]
