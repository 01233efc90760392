"""Run outputs: per-node CSV traces, run summary, report record.

Floats are rendered with repr(), Python's shortest round-trip form, so
identical runs produce byte-identical files and digest comparisons are
meaningful. The summary deliberately excludes anything host- or
time-dependent (wall-clock runtime lives only on the RunReport, which is
printed but never written to the digested outputs).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .engine import SimResult
from .node import NodeTrace

TRACE_COLUMNS = ("t", "v_cap", "i_harvest_out", "i_load", "phase")


def _f(x: float) -> str:
    return repr(float(x))


def trace_csv(trace: NodeTrace) -> str:
    """Render one node's trace as CSV text.

    Each row is one integration step: time at the end of the step, the
    capacitor voltage at that time, the currents that flowed during the
    step (i_load includes any converter quiescent draw), and the firmware
    phase in effect at that time.
    """
    lines = [",".join(TRACE_COLUMNS)]
    for sample, phase in zip(trace.samples, trace.phases):
        lines.append(
            f"{_f(sample.t)},{_f(sample.v_cap)},{_f(sample.i_harvest_out)},"
            f"{_f(sample.i_load)},{phase}")
    return "\n".join(lines) + "\n"


def write_traces(result: SimResult, out_dir: str | Path) -> dict[str, Path]:
    """Write trace_<id>.csv per node; returns node id -> path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    for node_id, trace in result.traces.items():
        path = out / f"trace_{node_id}.csv"
        path.write_text(trace_csv(trace))
        paths[node_id] = path
    return paths


def summary_text(result: SimResult, digest: str) -> str:
    """Deterministic line-oriented run summary."""
    lines = [
        f"scenario_digest: {digest}",
        f"nodes: {len(result.traces)}",
        f"packets_sent: {result.packets_sent}",
        f"packets_delivered: {result.packets_delivered}",
        f"packets_collided: {result.packets_collided}",
        f"packets_out_of_range: {result.packets_out_of_range}",
        f"delivery_ratio: {_f(result.delivery_ratio)}",
    ]
    for node_id, trace in result.traces.items():
        act = _f(trace.activation_time) if trace.activation_time is not None else "none"
        peak = max(s.v_cap for s in trace.samples)
        lines += [
            f"node {node_id}:",
            f"  activation_time_seconds: {act}",
            f"  tx_count: {len(trace.tx_events)}",
            f"  brownout_count: {len(trace.brownout_events)}",
            f"  peak_v_cap_volts: {_f(peak)}",
            f"  final_v_cap_volts: {_f(trace.samples[-1].v_cap)}",
            f"  link_margin_db: {_f(result.link_margins[node_id])}",
        ]
    for warning in result.warnings:
        lines.append(f"warning: {warning}")
    return "\n".join(lines) + "\n"


def write_summary(result: SimResult, digest: str, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "summary.txt"
    path.write_text(summary_text(result, digest))
    return path


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunReport:
    """What one simulate invocation produced (printed, not digested)."""

    scenario_digest: str
    activation_times: dict[str, float | None]
    packets_sent: int
    packets_delivered: int
    packets_collided: int
    packets_out_of_range: int
    delivery_ratio: float
    output_paths: list[Path] = field(default_factory=list)
    runtime_seconds: float = 0.0
    warnings: list[str] = field(default_factory=list)

    def render(self) -> str:
        lines = [f"scenario digest  {self.scenario_digest}"]
        for node_id, act in self.activation_times.items():
            shown = f"{act:.3f} s" if act is not None else "none"
            lines.append(f"activation [{node_id}]  {shown}")
        lines.append(
            f"packets  sent={self.packets_sent} delivered={self.packets_delivered} "
            f"collided={self.packets_collided} out_of_range={self.packets_out_of_range} "
            f"ratio={self.delivery_ratio:.3f}")
        for path in self.output_paths:
            lines.append(f"wrote  {path}")
        for warning in self.warnings:
            lines.append(f"warning  {warning}")
        lines.append(f"runtime  {self.runtime_seconds:.2f} s")
        return "\n".join(lines)
