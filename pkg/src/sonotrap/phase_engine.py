"""Per-channel phase computation for commanded focal points.

The drive phase of channel i for a focus at r_f is the fractional part of
the emitter-to-focus path length in wavelengths, scaled to radians:

    phi_i = 2*pi * (|r_f - r_i| mod lambda) / lambda

Phases are quantized round-to-nearest onto the controller's clock grid
(cycles_per_period = clock / carrier, e.g. 2500 at 100 MHz / 40 kHz) and
written to the register file as cycle delays. Multiple focal points are
realized by time-division multiplexing whole frames.
"""

from __future__ import annotations

import enum
import time
import statistics
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, OutOfVolumeError
from .geometry import ArrayLayout, WorkingVolume
from .medium import MediumState, wavelength


class TrapSignature(enum.Enum):
    SINGLE_FOCUS = "single_focus"


@dataclass(frozen=True)
class FocalCommand:
    """A commanded focal point (mm) above the array."""

    target: np.ndarray
    signature: TrapSignature = TrapSignature.SINGLE_FOCUS

    def __post_init__(self):
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float).reshape(3))


@dataclass(frozen=True)
class QuantizationConfig:
    """Clock / carrier pair defining the delay grid."""

    carrier_hz: float
    clock_hz: float = 100e6

    def __post_init__(self):
        if self.carrier_hz <= 0 or self.clock_hz <= 0:
            raise InvalidArgumentError("clock and carrier must be positive")
        ratio = self.clock_hz / self.carrier_hz
        if abs(ratio - round(ratio)) > 1e-6 or round(ratio) < 2:
            raise InvalidArgumentError(
                f"clock/carrier = {ratio} must be an integer >= 2 clock cycles per period"
            )

    @property
    def cycles_per_period(self) -> int:
        return int(round(self.clock_hz / self.carrier_hz))


@dataclass(frozen=True, eq=False)
class PhaseFrame:
    """One complete phase pattern: continuous phases plus register payload.

    phases[i] and delays_cycles[i] belong to the i-th *emitter* channel
    (receivers get no entry); emitter_ids maps rows back to channel ids.
    """

    phases: np.ndarray  # radians, [0, 2*pi)
    delays_cycles: np.ndarray  # int, [0, cycles_per_period)
    emitter_ids: np.ndarray
    command: FocalCommand
    medium_snapshot: MediumState
    cycles_per_period: int

    def __post_init__(self):
        object.__setattr__(self, "phases", np.asarray(self.phases, dtype=float))
        object.__setattr__(self, "delays_cycles", np.asarray(self.delays_cycles, dtype=np.int64))
        object.__setattr__(self, "emitter_ids", np.asarray(self.emitter_ids, dtype=int))


@dataclass(frozen=True)
class ControllerTiming:
    """Per-frame computation latency and the refresh rate it implies."""

    latency: float  # seconds
    refresh_rate: float  # Hz

    def __post_init__(self):
        if self.latency <= 0:
            raise InvalidArgumentError("latency must be positive")
        if abs(self.refresh_rate * self.latency - 1.0) > 1e-9:
            raise InvalidArgumentError("refresh_rate must equal 1/latency")

    @classmethod
    def from_latency(cls, latency_s: float) -> "ControllerTiming":
        return cls(latency_s, 1.0 / latency_s)

    @classmethod
    def from_refresh_rate(cls, refresh_hz: float) -> "ControllerTiming":
        return cls(1.0 / refresh_hz, refresh_hz)


@dataclass(frozen=True, eq=False)
class MultiplexSchedule:
    """Frames cycled in order, one dwell each."""

    frames: tuple[PhaseFrame, ...]
    dwell: float  # seconds per frame
    cycle_rate: float  # Hz, full cycles through the frame list

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise InvalidArgumentError("schedule needs at least one frame")

    @property
    def refresh_rate(self) -> float:
        return 1.0 / self.dwell

    def frame_at(self, t: float) -> PhaseFrame:
        """Active frame at time t (cycling)."""
        return self.frames[int(t / self.dwell) % len(self.frames)]


def path_length(transducer_pos, target) -> float:
    """Euclidean distance between an emitter center and the target, mm."""
    a = np.asarray(transducer_pos, dtype=float)
    b = np.asarray(target, dtype=float)
    return float(np.sqrt(np.sum((b - a) ** 2)))


def phase_shift(path_mm: float, lam_mm: float) -> float:
    """Drive phase in radians, [0, 2*pi): the path-length remainder modulo
    one wavelength, scaled by 2*pi."""
    if lam_mm <= 0:
        raise InvalidArgumentError("wavelength must be positive")
    return float(2.0 * np.pi * np.mod(path_mm, lam_mm) / lam_mm) % (2.0 * np.pi)


def focal_width(lam_mm: float, focal_length_mm: float, side_length_mm: float) -> float:
    """Focal-point width w = 2*lambda*R/D, mm."""
    if lam_mm <= 0 or focal_length_mm <= 0 or side_length_mm <= 0:
        raise InvalidArgumentError("lambda, R and D must all be positive")
    return 2.0 * lam_mm * focal_length_mm / side_length_mm


def _phase_kernel(positions: np.ndarray, targets: np.ndarray, lam_mm: float) -> np.ndarray:
    """Vectorized phases for targets (N,3) against emitters (M,3) -> (N,M).

    compute_frame routes through this same kernel with N=1, so batch and
    single-frame results are bit-identical.
    """
    diff = targets[:, None, :] - positions[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=2))
    return (2.0 * np.pi) * np.mod(d, lam_mm) / lam_mm % (2.0 * np.pi)


def _quantize(phases: np.ndarray, cycles_per_period: int) -> np.ndarray:
    """Round-to-nearest cycle delays (ties to even), wrapped into [0, cpp)."""
    d = np.rint(phases / (2.0 * np.pi) * cycles_per_period).astype(np.int64)
    return np.mod(d, cycles_per_period)


def batch_compute(
    layout: ArrayLayout,
    commands: list[FocalCommand],
    medium: MediumState,
    quant: QuantizationConfig,
    volume: WorkingVolume | None = None,
) -> list[PhaseFrame]:
    """Phase frames for a batch of focal commands.

    Channels and frames are evaluated data-parallel; the output is
    element-wise identical to sequential compute_frame calls.
    """
    if not commands:
        raise InvalidArgumentError("need at least one focal command")
    carrier = layout.emitter_carrier()
    if abs(carrier - quant.carrier_hz) > 1e-6:
        raise InvalidArgumentError(
            f"quantization carrier {quant.carrier_hz} != emitter carrier {carrier}"
        )
    vol = layout.working_volume() if volume is None else volume
    for i, cmd in enumerate(commands):
        if not vol.contains(cmd.target):
            raise OutOfVolumeError(f"command {i} target {cmd.target.tolist()} outside working volume")
    lam = wavelength(carrier, medium)
    targets = np.stack([cmd.target for cmd in commands])
    phases = _phase_kernel(layout.emitter_positions, targets, lam)
    delays = _quantize(phases, quant.cycles_per_period)
    return [
        PhaseFrame(
            phases=phases[i],
            delays_cycles=delays[i],
            emitter_ids=layout.emitter_ids,
            command=commands[i],
            medium_snapshot=medium,
            cycles_per_period=quant.cycles_per_period,
        )
        for i in range(len(commands))
    ]


def compute_frame(
    layout: ArrayLayout,
    command: FocalCommand,
    medium: MediumState,
    quant: QuantizationConfig,
    volume: WorkingVolume | None = None,
) -> PhaseFrame:
    """Phase frame for a single focal command."""
    return batch_compute(layout, [command], medium, quant, volume)[0]


def multiplex(
    layout: ArrayLayout,
    commands: list[FocalCommand],
    medium: MediumState,
    quant: QuantizationConfig,
    timing: ControllerTiming,
    volume: WorkingVolume | None = None,
) -> MultiplexSchedule:
    """Time-division schedule cycling the commands in order.

    The array produces one focal point at a time; cycling fast enough
    creates the effect of several. Each frame dwells for one controller
    latency, so cycle_rate = refresh_rate / len(commands).
    """
    frames = batch_compute(layout, commands, medium, quant, volume)
    return MultiplexSchedule(
        frames=tuple(frames),
        dwell=timing.latency,
        cycle_rate=timing.refresh_rate / len(frames),
    )


@dataclass(frozen=True)
class BenchmarkReport:
    """Host timing for the batch phase kernel. The original controller's
    hardware numbers are platform-specific and are reported as reference
    context only, never measured here."""

    frames: int
    repetitions: int
    latency_per_frame: float  # seconds, median over repetitions
    refresh_rate: float  # Hz, 1/latency_per_frame
    frames_per_second: float
    channels: int

    def identity_ok(self, tol: float = 1e-9) -> bool:
        return abs(self.refresh_rate * self.latency_per_frame - 1.0) <= tol

    def to_dict(self) -> dict:
        return {
            "frames": self.frames,
            "repetitions": self.repetitions,
            "latency_per_frame_s": self.latency_per_frame,
            "refresh_rate_hz": self.refresh_rate,
            "frames_per_second": self.frames_per_second,
            "channels": self.channels,
            "identity_refresh_eq_inv_latency": self.identity_ok(),
        }


#: Published figures for the FPGA-based controller this package models.
#: Hardware-specific; kept for context in bench reports, not reproduced.
REFERENCE_CONTROLLER = {
    "note": "reference FPGA controller figures (platform-specific, not measured by this package)",
    "speedup_single_compute_unit": 2.7,
    "speedup_four_compute_units_batch160": 21.0,
    "latency_software_us": 154.0,
    "latency_accelerated_us": 60.0,
    "refresh_software_khz": 6.49,
    "refresh_accelerated_khz": 16.6,
    "power_cpu_mw": 700.0,
    "power_fpga_mw": 520.0,
}


def benchmark(
    layout: ArrayLayout,
    medium: MediumState,
    quant: QuantizationConfig,
    n_frames: int = 160,
    repetitions: int = 10,
    seed: int = 0,
) -> BenchmarkReport:
    """Median-of-repetitions timing of batch_compute on this host."""
    if n_frames < 1 or repetitions < 1:
        raise InvalidArgumentError("n_frames and repetitions must be >= 1")
    rng = np.random.default_rng(seed)
    vol = layout.working_volume()
    commands = [FocalCommand(t) for t in vol.sample(rng, n_frames)]
    batch_compute(layout, commands, medium, quant)  # warm-up
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        batch_compute(layout, commands, medium, quant)
        times.append(time.perf_counter() - t0)
    elapsed = statistics.median(times)
    latency = elapsed / n_frames
    return BenchmarkReport(
        frames=n_frames,
        repetitions=repetitions,
        latency_per_frame=latency,
        refresh_rate=1.0 / latency,
        frames_per_second=n_frames / elapsed,
        channels=len(layout.emitters),
    )
