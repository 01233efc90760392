"""Water-activated hydroelectric harvester cell model.

The cell is modeled as a time-varying Thevenin source: after wetting, the
open-circuit voltage and short-circuit current ramp linearly to their peak
values, then relax exponentially toward their steady values. Both traces
share the same shape; only the (peak, steady) pairs differ. A dry cell
(no water, or water shallower than the activation depth) produces nothing.

Depths at or above the activation threshold all produce the same output:
the model deliberately has no depth dependence above threshold, because
above-threshold behavior is depth-insensitive at the level the parameters
are defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class HarvesterParams:
    """Parametric fit of the cell's electrical transient.

    Peak/steady values are measured quantities; t_rise and tau_decay are
    calibration parameters (the source waveform's time axis is not pinned
    by measurement and may be re-fit against digitized traces).
    """

    v_peak: float = 1.65        # V, open-circuit peak after wetting
    v_steady: float = 1.3       # V, open-circuit asymptote
    i_peak: float = 0.5         # A, short-circuit peak
    i_steady: float = 0.22      # A, short-circuit asymptote
    t_rise: float = 10.0        # s, wetting onset to peak
    tau_decay: float = 30.0     # s, exponential relaxation constant
    min_depth: float = 0.5      # mm, minimum water depth that activates the cell

    def __post_init__(self) -> None:
        if not (self.v_peak >= self.v_steady > 0.0):
            raise ValueError("require v_peak >= v_steady > 0")
        if not (self.i_peak >= self.i_steady > 0.0):
            raise ValueError("require i_peak >= i_steady > 0")
        if self.t_rise <= 0.0 or self.tau_decay <= 0.0 or self.min_depth <= 0.0:
            raise ValueError("t_rise, tau_decay and min_depth must be positive")


@dataclass(frozen=True)
class WaterEvent:
    """A water arrival: onset time (simulation clock) and standing depth."""

    onset: float    # s
    depth: float    # mm

    def __post_init__(self) -> None:
        if self.onset < 0.0:
            raise ValueError("onset must be >= 0")
        if self.depth < 0.0:
            raise ValueError("depth must be >= 0")


@dataclass(frozen=True)
class HarvesterOutput:
    """Thevenin snapshot of the cell at one instant.

    r_int = v_oc / i_sc and p_mpp = v_oc * i_sc / 4 (the maximum power a
    linear source can deliver). All fields are zero while the cell is dry.
    """

    v_oc: float     # V
    i_sc: float     # A
    r_int: float    # ohm
    p_mpp: float    # W


DRY = HarvesterOutput(0.0, 0.0, 0.0, 0.0)


def _transient(t_wet: float, peak: float, steady: float, t_rise: float, tau: float) -> float:
    # Shared trace shape: 0 before wetting, linear ramp to the peak,
    # then exponential relaxation onto the steady value. Continuous at
    # both joints (0 at t_wet=0, peak at t_wet=t_rise).
    if t_wet < 0.0:
        return 0.0
    if t_wet <= t_rise:
        return peak * (t_wet / t_rise)
    return steady + (peak - steady) * math.exp(-(t_wet - t_rise) / tau)


def open_circuit_voltage(params: HarvesterParams, t_wet: float) -> float:
    """Open-circuit voltage at time t_wet since wetting onset (V)."""
    return _transient(t_wet, params.v_peak, params.v_steady, params.t_rise, params.tau_decay)


def short_circuit_current(params: HarvesterParams, t_wet: float) -> float:
    """Short-circuit current at time t_wet since wetting onset (A)."""
    return _transient(t_wet, params.i_peak, params.i_steady, params.t_rise, params.tau_decay)


def sample(params: HarvesterParams, event: WaterEvent, t: float) -> HarvesterOutput:
    """Thevenin source state at simulation time t for a given water event.

    Sub-threshold depths produce exactly zero output (step model): depths
    below min_depth are treated as never activating the cell, and there is
    no partial scaling in between.
    """
    if event.depth < params.min_depth or t < event.onset:
        return DRY
    t_wet = t - event.onset
    v_oc = open_circuit_voltage(params, t_wet)
    i_sc = short_circuit_current(params, t_wet)
    if i_sc <= 0.0:
        return DRY
    return HarvesterOutput(
        v_oc=v_oc,
        i_sc=i_sc,
        r_int=v_oc / i_sc,
        p_mpp=v_oc * i_sc / 4.0,
    )


class TraceOverride:
    """Measured-waveform replacement for the parametric transient.

    Loads a two-column time/value series (seconds, volts or amperes) and
    interpolates linearly between samples, holding the last value beyond
    the end of the series. Intended for validating the simulator against
    digitized source measurements.
    """

    def __init__(self, times, values):
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ValueError("trace needs two equal-length 1-D columns with >= 2 rows")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("trace times must be strictly increasing")
        self._t = t
        self._v = v

    @classmethod
    def load(cls, path: str | Path) -> "TraceOverride":
        """Read a whitespace-separated two-column file; '#' starts a comment."""
        rows = np.loadtxt(path, comments="#", ndmin=2)
        if rows.shape[1] != 2:
            raise ValueError(f"{path}: expected exactly two columns, got {rows.shape[1]}")
        return cls(rows[:, 0], rows[:, 1])

    def __call__(self, t_wet: float) -> float:
        if t_wet < self._t[0]:
            return 0.0
        return float(np.interp(t_wet, self._t, self._v))
