"""Deterministic simulator for water-activated, battery-less LoRa sensor nodes.

Models the full chain from a hydroelectric harvester cell through a boost
converter and supercapacitor buffer into a LoRa node's firmware lifecycle,
then evaluates every uplink against a link budget and an on-air collision
model. Everything is deterministic: the same scenario always produces the
same traces, byte for byte.
"""

from .engine import (Event, EventKind, EventQueue, GatewaySpec, NodeSpec,
                     Scenario, SimResult, detect_collisions, run)
from .harvester import (HarvesterOutput, HarvesterParams, TraceOverride,
                        WaterEvent, open_circuit_voltage, sample,
                        short_circuit_current)
from .lora import (LinkParams, RadioConfig, Transmission, boundary_distance,
                   is_deliverable, link_margin, load_sensitivity_table,
                   received_power, time_on_air, tx_energy)
from .node import (NodeConfig, NodeState, NodeTrace, Phase, load_current,
                   run_node, transition)
from .power import (ConverterParams, PowerSample, SupercapState,
                    analytic_time_to_threshold, converter_output_current,
                    energy_stored, step_supercap)

__version__ = "0.1.0"

__all__ = [
    "ConverterParams", "Event", "EventKind", "EventQueue", "GatewaySpec",
    "HarvesterOutput", "HarvesterParams", "LinkParams", "NodeConfig",
    "NodeSpec", "NodeState", "NodeTrace", "Phase", "PowerSample",
    "RadioConfig", "Scenario", "SimResult", "SupercapState", "TraceOverride",
    "Transmission", "WaterEvent", "analytic_time_to_threshold",
    "boundary_distance", "converter_output_current", "detect_collisions",
    "energy_stored", "is_deliverable", "link_margin", "load_current",
    "load_sensitivity_table", "open_circuit_voltage", "received_power",
    "run", "run_node", "sample", "short_circuit_current", "step_supercap",
    "time_on_air", "transition", "tx_energy",
]
