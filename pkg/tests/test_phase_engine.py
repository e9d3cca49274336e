import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from sonotrap import (
    ControllerTiming,
    FocalCommand,
    InvalidArgumentError,
    MediumState,
    OutOfVolumeError,
    QuantizationConfig,
    batch_compute,
    benchmark,
    compute_frame,
    focal_width,
    multiplex,
    path_length,
    phase_shift,
    wavelength,
)


def naive_phase(pos, target, lam):
    """Independent per-channel oracle: plain math, no vectorization."""
    d = math.sqrt(sum((a - b) ** 2 for a, b in zip(pos, target)))
    return 2.0 * math.pi * math.fmod(d, lam) / lam


class TestPathLength:
    def test_axis_aligned(self):
        assert path_length((0, 0, 0), (0, 0, 100)) == pytest.approx(100.0)

    def test_corner_to_focus(self):
        # brute force: sqrt(57.75^2 + 57.75^2 + 100^2)
        expect = math.sqrt(57.75**2 + 57.75**2 + 100**2)
        assert expect == pytest.approx(129.113, abs=5e-4)
        assert path_length((-57.75, -57.75, 0), (0, 0, 100)) == pytest.approx(expect)

    def test_coincident(self):
        assert path_length((3.2, -1.0, 45.0), (3.2, -1.0, 45.0)) == 0.0


class TestPhaseShift:
    def test_exact_multiple(self):
        assert phase_shift(17.0, 8.5) == 0.0

    def test_worked_example(self):
        # 136.79 - 16*8.5 = 0.79; 0.79/8.5*2pi, cross-checked by fmod
        assert phase_shift(136.79, 8.5) == pytest.approx(0.5838, abs=2e-4)
        assert phase_shift(136.79, 8.5) == pytest.approx(
            2 * math.pi * math.fmod(136.79, 8.5) / 8.5
        )

    def test_half_wavelength(self):
        assert phase_shift(4.25, 8.5) == pytest.approx(math.pi)

    def test_rejects_nonpositive_wavelength(self):
        with pytest.raises(InvalidArgumentError):
            phase_shift(10.0, 0.0)

    @settings(max_examples=200, deadline=None)
    @given(
        path=hst.floats(min_value=0.0, max_value=1e4),
        lam=hst.floats(min_value=1e-3, max_value=50.0),
    )
    def test_range_and_periodicity(self, path, lam):
        phi = phase_shift(path, lam)
        assert 0.0 <= phi < 2 * math.pi
        # wrap-around continuity: period lambda in the path length
        # (compared circularly; float mod can land either side of the wrap)
        diff = abs(phase_shift(path + lam, lam) - phi)
        assert min(diff, 2 * math.pi - diff) < 1e-6 * (1.0 + path / lam)


class TestComputeFrame:
    def test_symmetry_on_axis(self, flat64, medium340, quant40):
        frame = compute_frame(flat64, FocalCommand((0, 0, 100)), medium340, quant40)
        phases = {}
        for t, phi in zip(flat64.emitters, frame.phases):
            phases[(round(t.position[0], 6), round(t.position[1], 6))] = phi
        for (x, y), phi in phases.items():
            assert phases[(-x, y)] == pytest.approx(phi, abs=1e-12)
            assert phases[(x, -y)] == pytest.approx(phi, abs=1e-12)

    def test_against_naive_oracle(self, flat64, medium340, quant40):
        target = (0.0, 0.0, 100.0)
        frame = compute_frame(flat64, FocalCommand(target), medium340, quant40)
        lam = wavelength(40e3, medium340)
        for t, phi in zip(flat64.emitters, frame.phases):
            assert abs(phi - naive_phase(t.position, target, lam)) < 1e-9

    def test_delay_range_at_100mhz(self, medium340, quant40):
        from sonotrap import build_flat_array

        single = build_flat_array(1, 1, 10.0, 40e3)
        frame = compute_frame(single, FocalCommand((0, 0, 100)), medium340, quant40)
        assert frame.phases.shape == (1,)
        assert 0 <= frame.delays_cycles[0] < 2500
        assert quant40.cycles_per_period == 2500

    def test_out_of_volume(self, flat64, medium340, quant40):
        with pytest.raises(OutOfVolumeError):
            compute_frame(flat64, FocalCommand((0, 0, -10)), medium340, quant40)

    def test_receivers_get_no_entry(self, medium340, quant40):
        from sonotrap import flat_echo_rig

        rig = flat_echo_rig(carrier=40e3, receiver_carrier=25e3)
        frame = compute_frame(rig, FocalCommand((0, 0, 100)), medium340, quant40)
        assert len(frame.phases) == 62
        assert set(frame.emitter_ids.tolist()) == set(t.id for t in rig.emitters)

    def test_quantization_bound(self, flat64, medium340, quant40, rng):
        cpp = quant40.cycles_per_period
        vol = flat64.working_volume()
        commands = [FocalCommand(t) for t in vol.sample(rng, 50)]
        for frame in batch_compute(flat64, commands, medium340, quant40):
            recon = 2 * np.pi * frame.delays_cycles / cpp
            diff = np.abs(frame.phases - recon)
            circ = np.minimum(diff, 2 * np.pi - diff)
            assert np.all(circ <= np.pi / cpp + 1e-12)

    def test_shift_invariance(self, medium340, quant40):
        from sonotrap import build_flat_array
        from sonotrap.geometry import ArrayLayout
        from dataclasses import replace

        layout = build_flat_array(4, 4, 16.5, 40e3)
        shift = np.array([7.3, -2.1, 5.5])
        shifted = ArrayLayout(
            transducers=tuple(
                replace(t, position=t.position + shift) for t in layout.transducers
            ),
            kind=layout.kind,
            side_length_D=layout.side_length_D,
        )
        target = np.array([5.0, -3.0, 120.0])
        f1 = compute_frame(layout, FocalCommand(target), medium340, quant40)
        f2 = compute_frame(
            shifted, FocalCommand(target + shift), medium340, quant40,
            volume=shifted.working_volume(),
        )
        assert np.allclose(f1.phases, f2.phases, atol=1e-9)

    def test_temperature_coupling(self, flat64, quant40):
        cold = MediumState.from_temperature(15.0)
        warm = MediumState.from_temperature(16.0)
        target = FocalCommand((20.0, 0, 100))
        f_cold = compute_frame(flat64, target, cold, quant40)
        f_warm = compute_frame(flat64, target, warm, quant40)
        assert abs(f_cold.phases[0] - f_warm.phases[0]) > 1e-3


class TestQuantizationConfig:
    def test_cycles_per_period(self):
        assert QuantizationConfig(carrier_hz=40e3).cycles_per_period == 2500
        assert QuantizationConfig(carrier_hz=25e3).cycles_per_period == 4000

    def test_non_integer_ratio_rejected(self):
        with pytest.raises(InvalidArgumentError):
            QuantizationConfig(carrier_hz=33e3)


class TestFocalWidth:
    def test_published_value(self):
        assert focal_width(8.5, 100, 132) == pytest.approx(12.88, abs=0.01)

    def test_round_trip(self):
        w = focal_width(8.5, 100, 132)
        assert 2 * 8.5 * 100 / w == pytest.approx(132.0)

    def test_25khz(self):
        assert focal_width(13.6, 100, 132) == pytest.approx(20.6, abs=0.02)

    def test_zero_d_rejected(self):
        with pytest.raises(InvalidArgumentError):
            focal_width(8.5, 100, 0)


class TestBatch:
    def test_batch_equals_sequential(self, flat64, medium340, quant40, rng):
        vol = flat64.working_volume()
        commands = [FocalCommand(t) for t in vol.sample(rng, 160)]
        frames = batch_compute(flat64, commands, medium340, quant40)
        for cmd, frame in zip(commands, frames):
            single = compute_frame(flat64, cmd, medium340, quant40)
            assert np.array_equal(single.phases, frame.phases)
            assert np.array_equal(single.delays_cycles, frame.delays_cycles)

    def test_single_command(self, flat64, medium340, quant40):
        cmd = FocalCommand((0, 0, 100))
        assert np.array_equal(
            batch_compute(flat64, [cmd], medium340, quant40)[0].phases,
            compute_frame(flat64, cmd, medium340, quant40).phases,
        )

    def test_out_of_volume_names_index(self, flat64, medium340, quant40):
        commands = [FocalCommand((0, 0, 100)), FocalCommand((0, 0, 9999.0))]
        with pytest.raises(OutOfVolumeError, match="command 1"):
            batch_compute(flat64, commands, medium340, quant40)

    def test_empty_rejected(self, flat64, medium340, quant40):
        with pytest.raises(InvalidArgumentError):
            batch_compute(flat64, [], medium340, quant40)


class TestMultiplex:
    def test_single_command_rate(self, flat64, medium340, quant40):
        timing = ControllerTiming.from_refresh_rate(16600.0)
        sched = multiplex(flat64, [FocalCommand((0, 0, 100))], medium340, quant40, timing)
        assert sched.cycle_rate == pytest.approx(16600.0)

    def test_two_commands_halve_rate(self, flat64, medium340, quant40):
        timing = ControllerTiming.from_refresh_rate(16600.0)
        sched = multiplex(
            flat64,
            [FocalCommand((0, 0, 100)), FocalCommand((10, 0, 100))],
            medium340,
            quant40,
            timing,
        )
        assert sched.cycle_rate == pytest.approx(8300.0)
        assert sched.dwell == pytest.approx(timing.latency)

    def test_frame_cycling(self, flat64, medium340, quant40):
        timing = ControllerTiming.from_refresh_rate(1000.0)
        cmds = [FocalCommand((0, 0, 100)), FocalCommand((5, 0, 100))]
        sched = multiplex(flat64, cmds, medium340, quant40, timing)
        assert sched.frame_at(0.0) is sched.frames[0]
        assert sched.frame_at(0.0015) is sched.frames[1]
        assert sched.frame_at(0.0025) is sched.frames[0]


class TestControllerTiming:
    def test_published_latencies(self):
        assert ControllerTiming.from_latency(154e-6).refresh_rate == pytest.approx(6493.5, abs=0.1)
        assert ControllerTiming.from_latency(60e-6).refresh_rate == pytest.approx(16666.7, abs=0.1)

    def test_inconsistent_rejected(self):
        with pytest.raises(InvalidArgumentError):
            ControllerTiming(latency=1e-4, refresh_rate=5000.0)


class TestBenchmark:
    def test_report_identity(self, flat64, medium340, quant40):
        report = benchmark(flat64, medium340, quant40, n_frames=8, repetitions=3)
        assert report.identity_ok()
        assert report.frames == 8
        assert report.latency_per_frame > 0
        assert report.frames_per_second == pytest.approx(report.refresh_rate, rel=1e-9)

    def test_reference_latency_arithmetic(self):
        # identity check on the report formula, not a measured claim
        assert 1.0 / 154e-6 == pytest.approx(6493.5, abs=0.1)
        assert 1.0 / 60e-6 == pytest.approx(16666.7, abs=0.1)
