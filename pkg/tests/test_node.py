"""Firmware lifecycle tests: load table, transition edges, full runs."""

import pytest

from hydrolora.engine import NodeSpec, Scenario, run
from hydrolora.harvester import HarvesterParams, WaterEvent
from hydrolora.lora import RadioConfig, time_on_air
from hydrolora.node import (NodeConfig, NodeState, Phase, load_current,
                            run_node, transition)

CFG = NodeConfig()
RADIO = RadioConfig()
TOA = time_on_air(RADIO, CFG.payload_len)


def make_scenario(depth=1.0, horizon=120.0, onset=0.0, **node_kwargs):
    spec = NodeSpec("n1", (10.0, 0.0), NodeConfig(**node_kwargs),
                    HarvesterParams(), WaterEvent(onset, depth))
    return Scenario(nodes=(spec,), horizon=horizon)


class TestLoadCurrent:
    @pytest.mark.parametrize("phase,expected", [
        (Phase.DORMANT, 0.0),
        (Phase.CHARGING, 0.0),
        (Phase.BROWNOUT, 0.0),
        (Phase.IDLE, 0.0015),
        (Phase.TRANSMITTING, 0.080),
        (Phase.BOOTING, 0.120),
    ])
    def test_phase_current_table(self, phase, expected):
        state = NodeState(phase=phase)
        assert load_current(CFG, state) == expected


class TestTransitionEdges:
    def test_dormant_until_harvest(self):
        state = NodeState()
        assert transition(CFG, state, 0.0, 1.0, RADIO, harvesting=False) is state
        after = transition(CFG, state, 0.0, 1.0, RADIO, harvesting=True)
        assert after.phase is Phase.CHARGING
        assert after.phase_entered_at == 1.0

    def test_charging_strictly_below_threshold_stays(self):
        state = NodeState(phase=Phase.CHARGING)
        assert transition(CFG, state, 3.69, 10.0, RADIO).phase is Phase.CHARGING

    def test_charging_boots_at_threshold(self):
        state = NodeState(phase=Phase.CHARGING)
        assert transition(CFG, state, 3.70, 10.0, RADIO).phase is Phase.BOOTING

    def test_boot_completes_after_duration_and_schedules_uplink(self):
        state = NodeState(phase=Phase.BOOTING, phase_entered_at=50.0)
        still = transition(CFG, state, 3.7, 50.0 + CFG.boot_duration / 2, RADIO)
        assert still.phase is Phase.BOOTING
        done = transition(CFG, state, 3.7, 50.0 + CFG.boot_duration, RADIO)
        assert done.phase is Phase.IDLE
        assert done.next_tx_at == 50.0 + CFG.boot_duration   # first uplink immediately

    def test_idle_transmits_at_schedule(self):
        state = NodeState(phase=Phase.IDLE, phase_entered_at=50.0, next_tx_at=60.0)
        assert transition(CFG, state, 3.6, 59.999, RADIO).phase is Phase.IDLE
        assert transition(CFG, state, 3.6, 60.0, RADIO).phase is Phase.TRANSMITTING

    def test_transmit_lasts_exactly_time_on_air(self):
        state = NodeState(phase=Phase.TRANSMITTING, phase_entered_at=60.0, next_tx_at=60.0)
        mid = transition(CFG, state, 3.6, 60.0 + TOA * 0.99, RADIO)
        assert mid.phase is Phase.TRANSMITTING
        done = transition(CFG, state, 3.6, 60.0 + TOA, RADIO)
        assert done.phase is Phase.IDLE
        assert done.next_tx_at == 60.0 + CFG.tx_interval     # advanced by the period

    @pytest.mark.parametrize("phase", [Phase.BOOTING, Phase.IDLE, Phase.TRANSMITTING])
    def test_any_powered_phase_browns_out(self, phase):
        state = NodeState(phase=phase, phase_entered_at=60.0, next_tx_at=60.0)
        after = transition(CFG, state, CFG.v_off - 0.001, 61.0, RADIO)
        assert after.phase is Phase.BROWNOUT

    def test_unpowered_phases_ignore_low_voltage(self):
        for phase in (Phase.DORMANT, Phase.CHARGING):
            state = NodeState(phase=phase)
            after = transition(CFG, state, 0.0, 1.0, RADIO)
            assert after.phase is phase

    def test_brownout_rearms_through_full_hysteresis(self):
        state = NodeState(phase=Phase.BROWNOUT, phase_entered_at=70.0)
        assert transition(CFG, state, 3.0, 71.0, RADIO).phase is Phase.BROWNOUT
        assert transition(CFG, state, CFG.v_off + 0.1, 71.0, RADIO).phase is Phase.BROWNOUT
        rearmed = transition(CFG, state, CFG.v_on, 72.0, RADIO)
        assert rearmed.phase is Phase.CHARGING

    def test_rejects_time_reversal(self):
        state = NodeState(phase=Phase.IDLE, phase_entered_at=10.0, next_tx_at=10.0)
        with pytest.raises(ValueError):
            transition(CFG, state, 3.7, 9.0, RADIO)


class TestConfigValidation:
    def test_threshold_ordering(self):
        with pytest.raises(ValueError):
            NodeConfig(v_on=2.0, v_off=2.5)

    def test_tx_current_covers_idle(self):
        with pytest.raises(ValueError):
            NodeConfig(i_tx=0.001, i_idle=0.002)


class TestRunNode:
    def test_default_activation_near_reference_time(self):
        trace = run_node(make_scenario())
        assert trace.activation_time is not None
        assert 40.0 <= trace.activation_time <= 60.0     # 50 s +/- 20%

    def test_subthreshold_depth_never_activates(self):
        trace = run_node(make_scenario(depth=0.2))
        assert trace.activation_time is None
        assert trace.tx_events == []

    def test_uplink_spacing_is_the_tx_interval(self):
        trace = run_node(make_scenario())
        starts = [start for start, _ in trace.tx_events]
        assert len(starts) >= 2
        for a, b in zip(starts, starts[1:]):
            assert b - a == pytest.approx(10.0, abs=1e-9)

    def test_every_tx_duration_is_time_on_air(self):
        trace = run_node(make_scenario())
        for _, duration in trace.tx_events:
            assert duration == TOA

    def test_first_uplink_right_after_boot(self):
        trace = run_node(make_scenario())
        assert trace.tx_events[0][0] == trace.activation_time + CFG.boot_duration

    def test_threshold_ordering_invariant_across_run(self):
        """Never booting below v_on; never idle/transmitting below v_off."""
        trace = run_node(make_scenario())
        for sample, phase in zip(trace.samples, trace.phases):
            if phase == Phase.BOOTING.value:
                assert sample.v_cap >= CFG.v_off
            if phase in (Phase.IDLE.value, Phase.TRANSMITTING.value):
                assert sample.v_cap >= CFG.v_off

    def test_voltage_dips_within_each_transmission(self):
        """Each uplink leaves a strict local minimum in the supply trace."""
        trace = run_node(make_scenario())
        times = [s.t for s in trace.samples]
        volts = [s.v_cap for s in trace.samples]
        for start, duration in trace.tx_events:
            before = max(v for t, v in zip(times, volts) if start - 0.002 <= t <= start)
            inside = [v for t, v in zip(times, volts) if start < t <= start + duration]
            after = [v for t, v in zip(times, volts)
                     if start + duration < t <= start + duration + 0.5]
            assert inside and after
            assert min(inside) < before
            assert min(inside) < max(after)

    def test_deterministic_traces(self):
        t1 = run_node(make_scenario())
        t2 = run_node(make_scenario())
        assert t1.activation_time == t2.activation_time
        assert t1.tx_events == t2.tx_events
        assert [s.v_cap for s in t1.samples] == [s.v_cap for s in t2.samples]

    def test_requires_single_node_with_water(self):
        sc = make_scenario()
        two = Scenario(nodes=(sc.nodes[0],
                              NodeSpec("n2", (11.0, 0.0), NodeConfig(),
                                       HarvesterParams(), None)),
                       horizon=10.0)
        with pytest.raises(ValueError):
            run_node(two)
        dry = Scenario(nodes=(NodeSpec("n1", (10.0, 0.0), NodeConfig(),
                                       HarvesterParams(), None),), horizon=10.0)
        with pytest.raises(ValueError):
            run_node(dry)


class TestBrownoutRun:
    def test_heavy_load_browns_out_and_recovers(self):
        # an idle current far above what the source can sustain forces the
        # node below v_off shortly after boot, then it recharges
        sc = make_scenario(horizon=90.0, i_idle=0.5, i_tx=0.5)
        trace = run_node(sc)
        assert trace.activation_time is not None
        assert len(trace.brownout_events) >= 1
        first_brownout = trace.brownout_events[0]
        assert first_brownout > trace.activation_time
        # after the brownout the phase column shows charging again
        idx = next(i for i, s in enumerate(trace.samples) if s.t >= first_brownout)
        assert trace.phases[idx] == Phase.BROWNOUT.value
