"""Scenario file format: parsing, validation, canonical form, digest.

The format is a sectioned key-value text file (schema version 1):

    schema_version = 1

    [scenario]
    horizon_seconds = 120
    dt_seconds = 0.001

    [node.sensor1]
    x_meters = 10
    water_onset_seconds = 0
    water_depth_mm = 1.0

Section and key names are fixed by the schema below; every physical
quantity carries its unit in the key name. Unknown sections or keys,
missing required entries, and out-of-range values are reported with the
file line they came from. All sections except [scenario] and at least one
[node.<id>] are optional and fall back to model defaults.

canonical_text() re-emits a parsed scenario with every default
materialized, sections and keys in schema order and floats rendered with
shortest round-trip precision; scenario_digest() hashes that canonical
form, so the digest is stable across hosts and across cosmetic
reformatting of the input file.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

from .engine import GatewaySpec, NodeSpec, Scenario
from .harvester import HarvesterParams, WaterEvent
from .lora import ALLOWED_BW, LinkParams, RadioConfig, load_sensitivity_table
from .node import NodeConfig
from .power import DT_MAX, ConverterParams, SupercapState

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """A scenario file failed to parse or validate.

    Carries an optional source location so the CLI can print
    'file:line: message' diagnostics.
    """

    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        self.source = source
        self.line = line
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass
class _Entry:
    value: str
    line: int
    used: bool = False


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


class _RawConfig:
    """Line-level parse of a sectioned key-value file."""

    def __init__(self, source: str):
        self.source = source
        self.sections: dict[str, dict[str, _Entry]] = {}
        self.section_lines: dict[str, int] = {}
        self.top: dict[str, _Entry] = {}

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "_RawConfig":
        raw = cls(source)
        current: dict[str, _Entry] | None = None
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if stripped.startswith("[") and stripped.endswith("]"):
                name = stripped[1:-1].strip()
                if not name:
                    raise ConfigError("empty section name", source, lineno)
                if name in raw.sections:
                    raise ConfigError(f"duplicate section [{name}]", source, lineno)
                raw.sections[name] = {}
                raw.section_lines[name] = lineno
                current = raw.sections[name]
                continue
            if "=" not in stripped:
                raise ConfigError(f"expected 'key = value', got {stripped!r}", source, lineno)
            key, _, value = stripped.partition("=")
            key = key.strip()
            value = value.strip()
            if not key:
                raise ConfigError("empty key", source, lineno)
            target = raw.top if current is None else current
            if key in target:
                raise ConfigError(f"duplicate key {key!r}", source, lineno)
            target[key] = _Entry(value, lineno)
        return raw


class _SectionReader:
    """Typed, range-checked access to one section's entries."""

    def __init__(self, raw: _RawConfig, name: str, entries: dict[str, _Entry]):
        self._raw = raw
        self.name = name
        self._entries = entries

    def _take(self, key: str) -> _Entry | None:
        entry = self._entries.get(key)
        if entry is not None:
            entry.used = True
        return entry

    def _convert(self, key: str, entry: _Entry, kind):
        try:
            if kind is bool:
                return _parse_bool(entry.value)
            return kind(entry.value)
        except ValueError:
            raise ConfigError(
                f"[{self.name}] {key}: cannot parse {entry.value!r} as {kind.__name__}",
                self._raw.source, entry.line) from None

    def get(self, key: str, kind, default=None, *, minimum=None, maximum=None,
            min_exclusive=False, choices=None):
        entry = self._take(key)
        if entry is None:
            return default
        value = self._convert(key, entry, kind)
        if kind is bool:
            return value
        if minimum is not None:
            bad = value <= minimum if min_exclusive else value < minimum
            if bad:
                op = ">" if min_exclusive else ">="
                raise ConfigError(f"[{self.name}] {key}: must be {op} {minimum}, got {value}",
                                  self._raw.source, entry.line)
        if maximum is not None and value > maximum:
            raise ConfigError(f"[{self.name}] {key}: must be <= {maximum}, got {value}",
                              self._raw.source, entry.line)
        if choices is not None and value not in choices:
            raise ConfigError(f"[{self.name}] {key}: must be one of {sorted(choices)}, got {value}",
                              self._raw.source, entry.line)
        return value

    def require(self, key: str, kind, **kwargs):
        if key not in self._entries:
            raise ConfigError(f"[{self.name}] is missing required key {key!r}",
                              self._raw.source, self._raw.section_lines.get(self.name))
        return self.get(key, kind, **kwargs)

    def has(self, key: str) -> bool:
        return key in self._entries

    def line_of(self, key: str) -> int | None:
        entry = self._entries.get(key)
        return entry.line if entry else None

    def reject_unknown(self) -> None:
        for key, entry in self._entries.items():
            if not entry.used:
                raise ConfigError(f"unknown key {key!r} in section [{self.name}]",
                                  self._raw.source, entry.line)


_KNOWN_SECTIONS = ("scenario", "harvester", "converter", "supercap", "radio", "gateway")


def parse_scenario_text(text: str, source: str = "<config>",
                        base_dir: Path | None = None) -> Scenario:
    """Parse and validate scenario text into a runnable Scenario."""
    raw = _RawConfig.parse(text, source)

    top = _SectionReader(raw, "<top>", raw.top)
    if "schema_version" not in raw.top:
        raise ConfigError("missing top-level 'schema_version = 1'", source)
    version = top.get("schema_version", int)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version} (expected {SCHEMA_VERSION})",
                          source, raw.top["schema_version"].line)
    top.reject_unknown()

    node_sections = [name for name in raw.sections if name.startswith("node.")]
    for name in raw.sections:
        if name not in _KNOWN_SECTIONS and not name.startswith("node."):
            raise ConfigError(f"unknown section [{name}]", source, raw.section_lines[name])
    if "scenario" not in raw.sections:
        raise ConfigError("missing required section [scenario]", source)
    if not node_sections:
        raise ConfigError("at least one [node.<id>] section is required", source)

    def reader(name: str) -> _SectionReader:
        return _SectionReader(raw, name, raw.sections.get(name, {}))

    sc = reader("scenario")
    horizon = sc.require("horizon_seconds", float, minimum=0.0, min_exclusive=True)
    dt = sc.get("dt_seconds", float, 1e-3, minimum=0.0, min_exclusive=True, maximum=DT_MAX)
    seed = sc.get("seed", int, 0, minimum=0)
    onset_jitter = sc.get("onset_jitter_seconds", float, 0.0, minimum=0.0)
    capture_db = sc.get("capture_threshold_db", float, 6.0, minimum=0.0)
    sc.reject_unknown()

    def build(section: str, ctor, **kwargs):
        try:
            return ctor(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {exc}", source,
                              raw.section_lines.get(section)) from None

    hv = reader("harvester")
    harvester = build("harvester", HarvesterParams,
        v_peak=hv.get("v_peak_volts", float, 1.65, minimum=0.0, min_exclusive=True),
        v_steady=hv.get("v_steady_volts", float, 1.3, minimum=0.0, min_exclusive=True),
        i_peak=hv.get("i_peak_amperes", float, 0.5, minimum=0.0, min_exclusive=True),
        i_steady=hv.get("i_steady_amperes", float, 0.22, minimum=0.0, min_exclusive=True),
        t_rise=hv.get("t_rise_seconds", float, 10.0, minimum=0.0, min_exclusive=True),
        tau_decay=hv.get("tau_decay_seconds", float, 30.0, minimum=0.0, min_exclusive=True),
        min_depth=hv.get("min_depth_mm", float, 0.5, minimum=0.0, min_exclusive=True),
    )
    hv.reject_unknown()

    cv = reader("converter")
    converter = build("converter", ConverterParams,
        v_target=cv.get("v_target_volts", float, 5.0, minimum=0.0, min_exclusive=True),
        efficiency=cv.get("efficiency", float, 0.11, minimum=0.0, min_exclusive=True, maximum=1.0),
        v_in_min=cv.get("v_in_min_volts", float, 0.3, minimum=0.0),
        i_quiescent=cv.get("i_quiescent_amperes", float, 0.0, minimum=0.0),
    )
    cv.reject_unknown()

    sp = reader("supercap")
    supercap = build("supercap", SupercapState,
        capacitance=sp.get("capacitance_farads", float, 0.1, minimum=0.0, min_exclusive=True),
        voltage=sp.get("initial_voltage_volts", float, 0.0, minimum=0.0),
        leak_conductance=sp.get("leak_conductance_siemens", float, 0.0, minimum=0.0),
    )
    if supercap.voltage > converter.v_target:
        raise ConfigError("[supercap] initial_voltage_volts exceeds the converter ceiling",
                          source, sp.line_of("initial_voltage_volts"))
    sp.reject_unknown()

    rd = reader("radio")
    ldro_entry = rd.get("low_data_rate_optimize", str, "auto")
    if isinstance(ldro_entry, str) and ldro_entry.lower() == "auto":
        ldro = None
    else:
        try:
            ldro = _parse_bool(ldro_entry)
        except ValueError:
            raise ConfigError("[radio] low_data_rate_optimize: expected true/false/auto",
                              source, rd.line_of("low_data_rate_optimize")) from None
    radio = build("radio", RadioConfig,
        freq=rd.get("frequency_hz", float, 915e6, minimum=0.0, min_exclusive=True),
        sf=rd.get("spreading_factor", int, 7, minimum=7, maximum=12),
        bw=rd.get("bandwidth_hz", float, 250e3, choices=set(ALLOWED_BW)),
        cr_denominator=rd.get("coding_rate_denominator", int, 5, minimum=5, maximum=8),
        preamble_len=rd.get("preamble_symbols", int, 8, minimum=0),
        explicit_header=rd.get("explicit_header", bool, True),
        crc_on=rd.get("crc", bool, True),
        low_data_rate_optimize=ldro,
        tx_power=rd.get("tx_power_dbm", float, 20.0),
        antenna_gain=rd.get("antenna_gain_dbi", float, 0.0),
    )
    rd.reject_unknown()

    gw = reader("gateway")
    sens_file = gw.get("sensitivity_file", str, None)
    link_kwargs = dict(
        path_loss_exponent=gw.get("path_loss_exponent", float, 3.0, minimum=2.0),
        ref_loss_at_1m=gw.get("ref_loss_at_1m_db", float, 31.7),
        wall_loss=gw.get("wall_loss_db", float, 5.0, minimum=0.0),
        n_walls=gw.get("n_walls", int, 0, minimum=0),
        noise_fade_margin=gw.get("noise_fade_margin_db", float, 10.0, minimum=0.0),
    )
    if sens_file is not None:
        path = Path(sens_file)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        try:
            link_kwargs["sensitivity_table"] = load_sensitivity_table(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"[gateway] sensitivity_file: {exc}",
                              source, gw.line_of("sensitivity_file")) from None
    gateway = GatewaySpec(
        position=(gw.get("x_meters", float, 0.0), gw.get("y_meters", float, 0.0)),
        link=LinkParams(**link_kwargs),
    )
    gw.reject_unknown()

    nodes = []
    for name in node_sections:    # file order
        node_id = name[len("node."):]
        if not node_id:
            raise ConfigError("node section needs an id: [node.<id>]",
                              source, raw.section_lines[name])
        nd = reader(name)
        water = None
        if nd.has("water_onset_seconds") or nd.has("water_depth_mm"):
            onset = nd.require("water_onset_seconds", float, minimum=0.0)
            depth = nd.require("water_depth_mm", float, minimum=0.0)
            water = WaterEvent(onset=onset, depth=depth)
        config = build(name, NodeConfig,
            v_on=nd.get("v_on_volts", float, 3.7, minimum=0.0, min_exclusive=True),
            v_off=nd.get("v_off_volts", float, 2.5, minimum=0.0),
            tx_interval=nd.get("tx_interval_seconds", float, 10.0, minimum=0.0, min_exclusive=True),
            i_tx=nd.get("i_tx_amperes", float, 0.080, minimum=0.0),
            i_idle=nd.get("i_idle_amperes", float, 0.0015, minimum=0.0),
            boot_surge_current=nd.get("boot_surge_current_amperes", float, 0.120, minimum=0.0),
            boot_duration=nd.get("boot_duration_seconds", float, 0.3, minimum=0.0),
            payload_len=nd.get("payload_len_bytes", int, 12, minimum=0, maximum=255),
        )
        position = (nd.get("x_meters", float, 0.0), nd.get("y_meters", float, 0.0))
        dx = position[0] - gateway.position[0]
        dy = position[1] - gateway.position[1]
        if (dx * dx + dy * dy) ** 0.5 < 1.0:
            raise ConfigError(
                f"[{name}] is closer than 1 m to the gateway (propagation reference distance)",
                source, raw.section_lines[name])
        nd.reject_unknown()
        nodes.append(NodeSpec(node_id=node_id, position=position, config=config,
                              harvester=harvester, water=water))

    try:
        return Scenario(
            nodes=tuple(nodes), gateway=gateway, radio=radio, converter=converter,
            supercap=supercap, horizon=horizon, dt=dt, seed=seed,
            onset_jitter=onset_jitter, capture_threshold_db=capture_db,
        )
    except ValueError as exc:
        raise ConfigError(str(exc), source) from None


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    return parse_scenario_text(text, source=str(path), base_dir=path.parent)


def canonical_text(scenario: Scenario) -> str:
    """Canonical serialization: every field explicit, fixed order."""
    lines: list[str] = [f"schema_version = {SCHEMA_VERSION}", ""]

    def section(name: str, pairs: list[tuple[str, object]]) -> None:
        lines.append(f"[{name}]")
        for key, value in pairs:
            lines.append(f"{key} = {_fmt(value)}")
        lines.append("")

    section("scenario", [
        ("horizon_seconds", scenario.horizon),
        ("dt_seconds", scenario.dt),
        ("seed", scenario.seed),
        ("onset_jitter_seconds", scenario.onset_jitter),
        ("capture_threshold_db", scenario.capture_threshold_db),
    ])
    hv = scenario.nodes[0].harvester if scenario.nodes else HarvesterParams()
    if any(node.harvester != hv for node in scenario.nodes):
        raise ValueError("canonical form holds one shared [harvester] section; "
                         "per-node harvester parameters cannot be serialized")
    section("harvester", [
        ("v_peak_volts", hv.v_peak),
        ("v_steady_volts", hv.v_steady),
        ("i_peak_amperes", hv.i_peak),
        ("i_steady_amperes", hv.i_steady),
        ("t_rise_seconds", hv.t_rise),
        ("tau_decay_seconds", hv.tau_decay),
        ("min_depth_mm", hv.min_depth),
    ])
    cv = scenario.converter
    section("converter", [
        ("v_target_volts", cv.v_target),
        ("efficiency", cv.efficiency),
        ("v_in_min_volts", cv.v_in_min),
        ("i_quiescent_amperes", cv.i_quiescent),
    ])
    sp = scenario.supercap
    section("supercap", [
        ("capacitance_farads", sp.capacitance),
        ("initial_voltage_volts", sp.voltage),
        ("leak_conductance_siemens", sp.leak_conductance),
    ])
    rd = scenario.radio
    ldro = "auto" if rd.low_data_rate_optimize is None else _fmt(rd.low_data_rate_optimize)
    section("radio", [
        ("frequency_hz", rd.freq),
        ("spreading_factor", rd.sf),
        ("bandwidth_hz", rd.bw),
        ("coding_rate_denominator", rd.cr_denominator),
        ("preamble_symbols", rd.preamble_len),
        ("explicit_header", rd.explicit_header),
        ("crc", rd.crc_on),
        ("low_data_rate_optimize", ldro),
        ("tx_power_dbm", rd.tx_power),
        ("antenna_gain_dbi", rd.antenna_gain),
    ])
    gw = scenario.gateway
    link = gw.link
    section("gateway", [
        ("x_meters", gw.position[0]),
        ("y_meters", gw.position[1]),
        ("path_loss_exponent", link.path_loss_exponent),
        ("ref_loss_at_1m_db", link.ref_loss_at_1m),
        ("wall_loss_db", link.wall_loss),
        ("n_walls", link.n_walls),
        ("noise_fade_margin_db", link.noise_fade_margin),
    ])
    for node in scenario.nodes:
        pairs: list[tuple[str, object]] = [
            ("x_meters", node.position[0]),
            ("y_meters", node.position[1]),
        ]
        if node.water is not None:
            pairs += [
                ("water_onset_seconds", node.water.onset),
                ("water_depth_mm", node.water.depth),
            ]
        cfg = node.config
        pairs += [
            ("v_on_volts", cfg.v_on),
            ("v_off_volts", cfg.v_off),
            ("tx_interval_seconds", cfg.tx_interval),
            ("i_tx_amperes", cfg.i_tx),
            ("i_idle_amperes", cfg.i_idle),
            ("boot_surge_current_amperes", cfg.boot_surge_current),
            ("boot_duration_seconds", cfg.boot_duration),
            ("payload_len_bytes", cfg.payload_len),
        ]
        section(f"node.{node.node_id}", pairs)
    return "\n".join(lines)


def scenario_digest(scenario: Scenario) -> str:
    """SHA-256 of the canonical serialization (hex)."""
    return hashlib.sha256(canonical_text(scenario).encode("utf-8")).hexdigest()
