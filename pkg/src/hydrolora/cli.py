"""Command-line surface.

Subcommands:
    simulate     run a scenario, write per-node CSV traces and a summary
    sweep-depth  run one scenario across several water depths
    calibrate    fit the converter efficiency to a target activation time
    toa          airtime calculator
    range        zero-margin boundary distance for the configured link
    validate     parse and schema-check a scenario file

Exit codes: 0 success, 2 configuration error, 3 infeasible calibration,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from importlib import resources
from pathlib import Path

from .config import ConfigError, canonical_text, load_scenario, scenario_digest
from .engine import EngineInvariantError, Scenario, run
from .harvester import WaterEvent
from .lora import LinkParams, RadioConfig, boundary_distance, link_margin, time_on_air
from .reporting import RunReport, write_summary, write_traces

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_INVARIANT = 4

CALIBRATION_TOL = 0.5   # s, |simulated activation - target| accepted as a fit


class InfeasibleCalibration(RuntimeError):
    pass


def bundled_scenario_path(name: str) -> Path:
    """Path of a scenario shipped with the package (name without .cfg)."""
    ref = resources.files("hydrolora.scenarios").joinpath(f"{name}.cfg")
    with resources.as_file(ref) as path:
        return Path(path)


def bundled_scenario_names() -> list[str]:
    root = resources.files("hydrolora.scenarios")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def _resolve_config(value: str) -> Path:
    path = Path(value)
    if path.exists():
        return path
    if "/" not in value and "\\" not in value:
        name = value[:-4] if value.endswith(".cfg") else value
        try:
            bundled = bundled_scenario_path(name)
        except (FileNotFoundError, ModuleNotFoundError):
            bundled = None
        if bundled is not None and bundled.exists():
            return bundled
    raise ConfigError(f"no such config file or bundled scenario: {value}")


def _load(args) -> Scenario:
    scenario = load_scenario(_resolve_config(args.config))
    if getattr(args, "horizon", None) is not None:
        scenario = replace(scenario, horizon=args.horizon)
    if getattr(args, "dt", None) is not None:
        scenario = replace(scenario, dt=args.dt)
    return scenario


def _simulate(scenario: Scenario, out_dir: str) -> tuple[RunReport, object]:
    t0 = time.perf_counter()
    digest = scenario_digest(scenario)
    result = run(scenario)
    paths = write_traces(result, out_dir)
    summary = write_summary(result, digest, out_dir)
    report = RunReport(
        scenario_digest=digest,
        activation_times={nid: tr.activation_time for nid, tr in result.traces.items()},
        packets_sent=result.packets_sent,
        packets_delivered=result.packets_delivered,
        packets_collided=result.packets_collided,
        packets_out_of_range=result.packets_out_of_range,
        delivery_ratio=result.delivery_ratio,
        output_paths=list(paths.values()) + [summary],
        runtime_seconds=time.perf_counter() - t0,
        warnings=list(result.warnings),
    )
    return report, result


def cmd_simulate(args) -> int:
    scenario = _load(args)
    report, _ = _simulate(scenario, args.out)
    if not args.quiet:
        print(report.render())
    return EXIT_OK


def sweep_depth(scenario: Scenario, depths: list[float]) -> list[tuple[float, float | None, float]]:
    """One row per depth: (depth_mm, activation time or None, peak v_cap)."""
    rows = []
    for depth in depths:
        nodes = []
        for node in scenario.nodes:
            water = node.water
            if water is None:
                water = WaterEvent(onset=0.0, depth=depth)
            else:
                water = WaterEvent(onset=water.onset, depth=depth)
            nodes.append(replace(node, water=water))
        result = run(replace(scenario, nodes=tuple(nodes)))
        trace = result.traces[nodes[0].node_id]
        peak = max(s.v_cap for s in trace.samples)
        rows.append((depth, trace.activation_time, peak))
    return rows


def cmd_sweep_depth(args) -> int:
    scenario = _load(args)
    depths = [float(d) for d in args.depths.split(",") if d.strip()]
    if not depths:
        raise ConfigError("no depths given (expected e.g. --depths 0.5,1,2)")
    rows = sweep_depth(scenario, depths)
    if not args.quiet:
        # repr-rendered floats so identical results are visibly identical
        print(f"{'depth_mm':>10}  {'activation_s':>22}  {'peak_v_cap':>22}")
        for depth, act, peak in rows:
            act_s = repr(act) if act is not None else "none"
            print(f"{depth:>10g}  {act_s:>22}  {repr(peak):>22}")
    return EXIT_OK


def _activation_with_efficiency(scenario: Scenario, efficiency: float,
                                horizon: float) -> float | None:
    trial = replace(scenario,
                    converter=replace(scenario.converter, efficiency=efficiency),
                    horizon=horizon)
    result = run(trial)
    return result.traces[scenario.nodes[0].node_id].activation_time


def calibrate(scenario: Scenario, target: float, tol: float = CALIBRATION_TOL,
              max_iter: int = 40) -> float:
    """Bisect the converter efficiency so activation lands on target ± tol.

    Activation time decreases monotonically with efficiency, so plain
    bisection on (0, 1] converges. Raises InfeasibleCalibration when even
    unity efficiency cannot reach the target.
    """
    if target <= 0.0:
        raise InfeasibleCalibration("target activation time must be positive")
    # Activation does not depend on what happens after it; a shortened
    # horizon just needs enough headroom to observe a slightly-late fit.
    horizon = min(scenario.horizon, target + max(10.0 * tol, 5.0))

    act_full = _activation_with_efficiency(scenario, 1.0, horizon)
    if act_full is None or act_full > target + tol:
        reached = (f"not reached within {horizon:.3f} s" if act_full is None
                   else f"{act_full:.3f} s")
        raise InfeasibleCalibration(
            f"target {target} s is unreachable: at efficiency 1.0 activation is {reached}")
    if abs(act_full - target) <= tol:
        return 1.0

    lo, hi = 0.0, 1.0   # invariant: act(lo) > target (lo=0 never activates), act(hi) < target
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        act = _activation_with_efficiency(scenario, mid, horizon)
        if act is not None and abs(act - target) <= tol:
            return mid
        if act is None or act > target:
            lo = mid
        else:
            hi = mid
    raise InfeasibleCalibration(
        f"bisection did not land within {tol} s of {target} s after {max_iter} steps")


def cmd_calibrate(args) -> int:
    scenario = _load(args)
    try:
        fitted = calibrate(scenario, args.target)
    except InfeasibleCalibration as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    updated = replace(scenario, converter=replace(scenario.converter, efficiency=fitted))
    out_path = Path(args.write)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(canonical_text(updated))
    if not args.quiet:
        print(f"fitted efficiency: {fitted!r}")
        print(f"wrote {out_path}")
    return EXIT_OK


def cmd_toa(args) -> int:
    ldro = None if args.ldro == "auto" else (args.ldro == "true")
    cfg = RadioConfig(sf=args.sf, bw=args.bw, cr_denominator=args.cr,
                      preamble_len=args.preamble, crc_on=not args.no_crc,
                      explicit_header=not args.implicit_header,
                      low_data_rate_optimize=ldro)
    toa = time_on_air(cfg, args.payload)
    print(f"{toa * 1e3:.3f} ms")
    return EXIT_OK


def cmd_range(args) -> int:
    scenario = _load(args) if args.config else None
    link = scenario.gateway.link if scenario else LinkParams()
    radio = scenario.radio if scenario else RadioConfig()
    if args.walls is not None:
        link = replace(link, n_walls=args.walls)
    boundary = boundary_distance(link, radio)
    print(f"zero-margin boundary: {boundary:.3f} m ({link.n_walls} walls)")
    if args.check_distance is not None:
        margin = link_margin(link, radio, args.check_distance)
        verdict = "deliverable" if margin >= 0.0 else "not deliverable"
        print(f"margin at {args.check_distance:g} m: {margin:.3f} dB ({verdict})")
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = _load(args)
    print(f"ok: {len(scenario.nodes)} node(s), digest {scenario_digest(scenario)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hydrolora",
        description="Deterministic simulator for water-activated, battery-less LoRa nodes.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True,
                           help="scenario file path or bundled scenario name "
                                f"({', '.join(bundled_scenario_names())})")
        else:
            p.add_argument("--config", default=None, help="scenario file (optional)")
        p.add_argument("--quiet", action="store_true", help="suppress normal output")

    p = sub.add_parser("simulate", help="run a scenario and write traces")
    add_common(p)
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--horizon", type=float, default=None, help="override horizon (s)")
    p.add_argument("--dt", type=float, default=None, help="override integration step (s)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep-depth", help="run one scenario at several water depths")
    add_common(p)
    p.add_argument("--depths", default="0.5,1,2", help="comma-separated depths in mm")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.set_defaults(func=cmd_sweep_depth)

    p = sub.add_parser("calibrate", help="fit converter efficiency to a target activation")
    add_common(p)
    p.add_argument("--target", type=float, required=True, help="target activation time (s)")
    p.add_argument("--write", default="calibrated.cfg", help="where to write the fitted config")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("toa", help="LoRa airtime calculator")
    p.add_argument("--sf", type=int, default=7)
    p.add_argument("--bw", type=float, default=250e3)
    p.add_argument("--cr", type=int, default=5, help="coding rate denominator (5..8)")
    p.add_argument("--preamble", type=int, default=8)
    p.add_argument("--payload", type=int, default=12)
    p.add_argument("--no-crc", action="store_true")
    p.add_argument("--implicit-header", action="store_true")
    p.add_argument("--ldro", choices=("auto", "true", "false"), default="auto")
    p.set_defaults(func=cmd_toa)

    p = sub.add_parser("range", help="zero-margin boundary distance")
    add_common(p, config_required=False)
    p.add_argument("--walls", type=int, default=None, help="override wall count")
    p.add_argument("--check-distance", type=float, default=None,
                   help="also report the margin at this distance (m)")
    p.set_defaults(func=cmd_range)

    p = sub.add_parser("validate", help="parse and schema-check a scenario file")
    add_common(p)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineInvariantError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
