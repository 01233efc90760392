"""LoRa modulation arithmetic and link-budget evaluation.

Airtime follows the standard transceiver-datasheet symbol-count formula.
Propagation is log-distance with a per-wall penalty, referenced to the
free-space loss at 1 m; deliverability compares the received power against
a per-(SF, BW) sensitivity table plus a fade margin. The sensitivity
defaults are datasheet-style figures and can be overridden from a file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

MAX_PAYLOAD = 255

# Receiver sensitivity (dBm) by (spreading factor, bandwidth Hz).
# Datasheet-style table: each bandwidth doubling costs about 3 dB, each
# spreading-factor step buys back 2 to 3 dB.
DEFAULT_SENSITIVITY: dict[tuple[int, float], float] = {
    (7, 125e3): -124.0, (8, 125e3): -127.0, (9, 125e3): -130.0,
    (10, 125e3): -133.0, (11, 125e3): -135.0, (12, 125e3): -137.0,
    (7, 250e3): -121.0, (8, 250e3): -124.0, (9, 250e3): -127.0,
    (10, 250e3): -130.0, (11, 250e3): -132.0, (12, 250e3): -134.0,
    (7, 500e3): -118.0, (8, 500e3): -121.0, (9, 500e3): -124.0,
    (10, 500e3): -127.0, (11, 500e3): -129.0, (12, 500e3): -131.0,
}

# Symbol durations above this get the low-data-rate optimization by default.
LDRO_SYMBOL_TIME = 0.016

ALLOWED_BW = (125e3, 250e3, 500e3)


@dataclass(frozen=True)
class RadioConfig:
    freq: float = 915e6             # Hz, carrier
    sf: int = 7                     # spreading factor, 7..12
    bw: float = 250e3               # Hz, one of 125k/250k/500k
    cr_denominator: int = 5         # 5..8, coding rate 4/cr_denominator
    preamble_len: int = 8           # symbols
    explicit_header: bool = True
    crc_on: bool = True
    low_data_rate_optimize: bool | None = None  # None = auto by symbol time
    tx_power: float = 20.0          # dBm
    antenna_gain: float = 0.0       # dBi

    def __post_init__(self) -> None:
        if not 7 <= self.sf <= 12:
            raise ValueError(f"sf must be in [7, 12], got {self.sf}")
        if self.bw not in ALLOWED_BW:
            raise ValueError(f"bw must be one of {ALLOWED_BW}, got {self.bw}")
        if not 5 <= self.cr_denominator <= 8:
            raise ValueError(f"cr_denominator must be in [5, 8], got {self.cr_denominator}")
        if self.preamble_len < 0:
            raise ValueError("preamble_len must be >= 0")

    @property
    def symbol_time(self) -> float:
        """Chirp duration 2^sf / bw (s)."""
        return (2.0 ** self.sf) / self.bw

    @property
    def ldro(self) -> bool:
        if self.low_data_rate_optimize is not None:
            return self.low_data_rate_optimize
        return self.symbol_time > LDRO_SYMBOL_TIME


@dataclass(frozen=True)
class LinkParams:
    """Log-distance indoor propagation plus receiver characteristics."""

    path_loss_exponent: float = 3.0     # indoor, obstructed
    ref_loss_at_1m: float = 31.7        # dB, free-space loss at 915 MHz / 1 m
    wall_loss: float = 5.0              # dB per wall
    n_walls: int = 0
    noise_fade_margin: float = 10.0     # dB required on top of sensitivity
    sensitivity_table: dict[tuple[int, float], float] = field(
        default_factory=lambda: dict(DEFAULT_SENSITIVITY))

    def __post_init__(self) -> None:
        if self.path_loss_exponent < 2.0:
            raise ValueError("path_loss_exponent must be >= 2 (free space)")
        if self.n_walls < 0:
            raise ValueError("n_walls must be >= 0")
        if any(v >= 0.0 for v in self.sensitivity_table.values()):
            raise ValueError("sensitivity values must be negative (dBm)")

    def sensitivity(self, sf: int, bw: float) -> float:
        try:
            return self.sensitivity_table[(sf, bw)]
        except KeyError:
            raise KeyError(f"no sensitivity entry for sf={sf}, bw={bw:g}") from None


@dataclass(frozen=True)
class Transmission:
    """One on-air frame, the unit the interference model works on."""

    node_id: str
    start: float                # s
    duration: float             # s
    channel: float              # Hz
    sf: int
    rx_power_at_gateway: float  # dBm

    def __post_init__(self) -> None:
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")

    @property
    def end(self) -> float:
        return self.start + self.duration


def time_on_air(cfg: RadioConfig, payload_len: int) -> float:
    """Frame airtime in seconds for a payload of payload_len bytes.

    Preamble takes (preamble_len + 4.25) symbols. The payload symbol count
    is 8 plus the coded block count ceil((8*PL - 4*SF + 28 + 16*CRC
    - 20*IH) / (4*(SF - 2*DE))) times the coding-rate denominator,
    clamped at zero.
    """
    if not 0 <= payload_len <= MAX_PAYLOAD:
        raise ValueError(f"payload_len must be in [0, {MAX_PAYLOAD}], got {payload_len}")
    t_sym = cfg.symbol_time
    de = 1 if cfg.ldro else 0
    ih = 0 if cfg.explicit_header else 1
    crc = 1 if cfg.crc_on else 0
    numerator = 8.0 * payload_len - 4.0 * cfg.sf + 28.0 + 16.0 * crc - 20.0 * ih
    denominator = 4.0 * (cfg.sf - 2 * de)
    n_payload = 8 + max(math.ceil(numerator / denominator) * cfg.cr_denominator, 0)
    return (cfg.preamble_len + 4.25) * t_sym + n_payload * t_sym


def tx_energy(cfg: RadioConfig, payload_len: int, v_supply: float, i_tx: float) -> float:
    """Energy one transmission pulls from the supply: ToA * V * I (J)."""
    if v_supply < 0.0 or i_tx < 0.0:
        raise ValueError("supply voltage and current must be >= 0")
    return time_on_air(cfg, payload_len) * v_supply * i_tx


def received_power(link: LinkParams, cfg: RadioConfig, distance: float) -> float:
    """Power at the gateway (dBm) over a distance in meters.

    Log-distance path loss anchored at 1 m, plus a fixed per-wall penalty.
    Distances inside the reference distance are rejected.
    """
    if distance < 1.0:
        raise ValueError("distance must be >= 1 m (reference distance)")
    path_loss = (link.ref_loss_at_1m
                 + 10.0 * link.path_loss_exponent * math.log10(distance)
                 + link.wall_loss * link.n_walls)
    return cfg.tx_power + cfg.antenna_gain - path_loss


def link_margin(link: LinkParams, cfg: RadioConfig, distance: float) -> float:
    """Margin above (sensitivity + fade margin) in dB; positive = deliverable."""
    rx = received_power(link, cfg, distance)
    return rx - link.sensitivity(cfg.sf, cfg.bw) - link.noise_fade_margin


def is_deliverable(link: LinkParams, cfg: RadioConfig, distance: float) -> bool:
    """Whether a frame at this distance clears sensitivity plus fade margin."""
    return link_margin(link, cfg, distance) >= 0.0


def boundary_distance(link: LinkParams, cfg: RadioConfig,
                      d_max: float = 1e7, tol: float = 1e-6) -> float:
    """Zero-margin distance in meters, found by bisection.

    Margin decreases monotonically with distance, so the boundary is the
    unique root of link_margin between 1 m and d_max. Returns 1.0 if even
    the reference distance has no margin, and d_max if the margin never
    drops to zero inside the search bracket.
    """
    lo, hi = 1.0, d_max
    if link_margin(link, cfg, lo) < 0.0:
        return lo
    if link_margin(link, cfg, hi) >= 0.0:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if link_margin(link, cfg, mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def load_sensitivity_table(path: str | Path) -> dict[tuple[int, float], float]:
    """Read a sensitivity table override: one 'sf:bw_hz  dBm' pair per line.

    Blank lines and '#' comments are skipped. Example line: '7:250000 -121'.
    """
    table: dict[tuple[int, float], float] = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or ":" not in parts[0]:
            raise ValueError(f"{path}:{lineno}: expected 'sf:bw_hz value', got {raw!r}")
        sf_str, bw_str = parts[0].split(":", 1)
        try:
            key = (int(sf_str), float(bw_str))
            value = float(parts[1])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        table[key] = value
    if not table:
        raise ValueError(f"{path}: no sensitivity entries found")
    return table
