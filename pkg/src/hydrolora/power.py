"""Boost converter and supercapacitor energy buffer.

The converter is an averaged power-flow model, not a switching simulation:
its input operating point is the source's maximum power point, and every
departure from ideal transfer is folded into a single end-to-end efficiency
factor. Output current into the storage node is therefore
eta * p_mpp / v_cap, with a floor on the denominator so startup current
into an empty capacitor stays bounded. Charging stops at the regulation
ceiling v_target.

The supercapacitor integrates a plain charge balance with forward Euler.
The step bound (dt <= 10 ms) keeps the explicit scheme well inside the
stable region for the RC scales this model is used at.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .harvester import HarvesterOutput

# Denominator floor for the converter current law, so a fully discharged
# capacitor does not demand unbounded current.
V_FLOOR = 0.5

# Integration step bound for the explicit supercap update.
DT_MAX = 0.010


@dataclass(frozen=True)
class ConverterParams:
    v_target: float = 5.0       # V, regulated output ceiling
    efficiency: float = 0.11    # harvested-to-stored fraction, calibrated default
    v_in_min: float = 0.3       # V, minimum source voltage to start/run
    i_quiescent: float = 0.0    # A, converter self-consumption at the output node

    # Switching-stage component values, recorded as documentation only;
    # the averaged model does not simulate the switch ripple.
    inductor_henries: float = 22e-6
    filter_cap_farads: float = 12e-6
    switching_freq_hz: float = 150e3

    def __post_init__(self) -> None:
        if not (0.0 < self.efficiency <= 1.0):
            raise ValueError("efficiency must be in (0, 1]")
        if self.v_target <= 0.0:
            raise ValueError("v_target must be positive")
        if self.v_in_min < 0.0 or self.i_quiescent < 0.0:
            raise ValueError("v_in_min and i_quiescent must be >= 0")


@dataclass(frozen=True)
class SupercapState:
    capacitance: float = 0.1        # F
    voltage: float = 0.0            # V
    leak_conductance: float = 0.0   # S, parallel self-discharge

    def __post_init__(self) -> None:
        if self.capacitance <= 0.0:
            raise ValueError("capacitance must be positive")
        if self.voltage < 0.0:
            raise ValueError("voltage must be >= 0")
        if self.leak_conductance < 0.0:
            raise ValueError("leak_conductance must be >= 0")


@dataclass(frozen=True)
class PowerSample:
    """One recorded observable: storage voltage plus the currents that
    flowed during the step ending at t."""

    t: float                # s
    v_cap: float            # V
    i_harvest_out: float    # A, converter output current actually delivered
    i_load: float           # A, current actually drawn by the node


def converter_output_current(params: ConverterParams, src: HarvesterOutput, v_cap: float) -> float:
    """Current the converter pushes into the storage node (A).

    Zero when the source is too weak to run the converter or the output
    has reached the regulation ceiling; otherwise the MPP power scaled by
    efficiency, delivered at the capacitor voltage.
    """
    if v_cap < 0.0:
        raise ValueError("v_cap must be >= 0")
    if src.v_oc < params.v_in_min or v_cap >= params.v_target:
        return 0.0
    i = params.efficiency * src.p_mpp / max(v_cap, V_FLOOR)
    return i if i > 0.0 else 0.0


def step_voltage(voltage: float, capacitance: float, leak_conductance: float,
                 i_in: float, i_load: float, dt: float, v_max: float) -> float:
    """One forward-Euler charge-balance update, clamped to [0, v_max].

    The top clamp stands in for the converter's regulation at the ceiling;
    the bottom clamp for the load browning out an empty capacitor.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if dt > DT_MAX:
        raise ValueError(f"dt={dt} exceeds the {DT_MAX} s integration bound")
    v = voltage + (i_in - i_load - leak_conductance * voltage) * dt / capacitance
    if v < 0.0:
        return 0.0
    if v > v_max:
        return v_max
    return v


def step_supercap(state: SupercapState, i_in: float, i_load: float, dt: float,
                  v_max: float = 5.0) -> SupercapState:
    """Advance the supercap one step; rejects mis-sized dt (see step_voltage)."""
    v = step_voltage(state.voltage, state.capacitance, state.leak_conductance,
                     i_in, i_load, dt, v_max)
    return replace(state, voltage=v)


def energy_stored(state: SupercapState) -> float:
    """Stored energy 0.5 * C * V^2 (J)."""
    return 0.5 * state.capacitance * state.voltage ** 2


def analytic_time_to_threshold(params: ConverterParams, p_in: float, capacitance: float,
                               v0: float, v_th: float) -> float:
    """Closed-form charge time under constant input power (s).

    Ignores leakage and quiescent draw: the stored energy grows at
    eta * p_in, so t = C * (v_th^2 - v0^2) / (2 * eta * p_in). Used as the
    oracle against the stepped integrator and by the calibration fit.
    Returns inf when there is no input power (threshold unreachable), and
    0 when the start voltage already meets the threshold.
    """
    if v0 < 0.0:
        raise ValueError("v0 must be >= 0")
    p_net = params.efficiency * p_in
    if p_net <= 0.0:
        return math.inf
    if v_th <= v0:
        return 0.0
    return capacitance * (v_th ** 2 - v0 ** 2) / (2.0 * p_net)
