"""Register-level emulation of the phased-array controller.

Each channel owns a delay register (clock cycles); the controller derives
every output from one master clock and emits a 50%-duty square wave at the
carrier, shifted by the registered delay. Frames load atomically: a new
frame takes effect at the next carrier-period boundary, so no generated
period ever mixes delays from two frames.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .errors import FrameShapeError, InvalidArgumentError, NoEdgesError
from .phase_engine import PhaseFrame, QuantizationConfig


@dataclass(frozen=True, eq=False)
class RegisterFile:
    """Snapshot of all channel delay registers."""

    delays: np.ndarray  # int64 cycles, [0, cycles_per_period)
    enabled: np.ndarray  # bool per channel
    cycles_per_period: int

    def __post_init__(self):
        delays = np.asarray(self.delays, dtype=np.int64)
        enabled = np.asarray(self.enabled, dtype=bool)
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "enabled", enabled)
        if delays.shape != enabled.shape:
            raise FrameShapeError("delays and enabled must have matching shapes")
        if np.any((delays < 0) | (delays >= self.cycles_per_period)):
            raise InvalidArgumentError("delays must lie in [0, cycles_per_period)")

    @property
    def n_channels(self) -> int:
        return len(self.delays)


@dataclass(frozen=True, eq=False)
class DigitalWaveform:
    """Sampled logic-level output of one channel at the master clock rate."""

    channel: int
    samples: np.ndarray  # uint8 0/1
    sample_rate: float  # Hz

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.uint8))

    def rising_edges(self) -> np.ndarray:
        """Tick indices of 0 -> 1 transitions (a high first sample counts)."""
        s = self.samples.astype(np.int8)
        edges = np.flatnonzero(np.diff(s) == 1) + 1
        if len(s) and s[0] == 1:
            edges = np.concatenate([[0], edges])
        return edges


def make_register_file(n_channels: int, quant: QuantizationConfig) -> RegisterFile:
    """All-zero register file with every channel enabled."""
    return RegisterFile(
        delays=np.zeros(n_channels, dtype=np.int64),
        enabled=np.ones(n_channels, dtype=bool),
        cycles_per_period=quant.cycles_per_period,
    )


def load_frame(registers: RegisterFile, frame: PhaseFrame) -> RegisterFile:
    """New register file carrying the frame's delay payload verbatim."""
    if len(frame.delays_cycles) != registers.n_channels:
        raise FrameShapeError(
            f"frame has {len(frame.delays_cycles)} channels, register file has {registers.n_channels}"
        )
    if frame.cycles_per_period != registers.cycles_per_period:
        raise FrameShapeError("frame and register file disagree on cycles_per_period")
    return RegisterFile(
        delays=frame.delays_cycles.copy(),
        enabled=registers.enabled.copy(),
        cycles_per_period=registers.cycles_per_period,
    )


def _square_samples(ticks: np.ndarray, delay: int, cpp: int) -> np.ndarray:
    half = cpp // 2
    return (np.mod(ticks - delay, cpp) < half).astype(np.uint8)


def generate(registers: RegisterFile, duration_s: float, clock: QuantizationConfig) -> list[DigitalWaveform]:
    """Square waves for every channel over the given duration.

    Channel i is the carrier square wave delayed by delays[i] clock ticks;
    disabled channels hold constant 0. Duration must cover at least two
    carrier periods so phase can be measured downstream.
    """
    cpp = clock.cycles_per_period
    if cpp != registers.cycles_per_period:
        raise InvalidArgumentError("clock disagrees with register file cycles_per_period")
    n_ticks = int(round(duration_s * clock.clock_hz))
    if n_ticks < 2 * cpp:
        raise InvalidArgumentError("duration must cover at least 2 carrier periods")
    ticks = np.arange(n_ticks)
    out = []
    for ch in range(registers.n_channels):
        if registers.enabled[ch]:
            samples = _square_samples(ticks, int(registers.delays[ch]), cpp)
        else:
            samples = np.zeros(n_ticks, dtype=np.uint8)
        out.append(DigitalWaveform(channel=ch, samples=samples, sample_rate=clock.clock_hz))
    return out


def epoch_reference(clock: QuantizationConfig, duration_s: float) -> DigitalWaveform:
    """Zero-delay square wave, the common epoch all channel phases refer to."""
    cpp = clock.cycles_per_period
    n_ticks = int(round(duration_s * clock.clock_hz))
    if n_ticks < 2 * cpp:
        raise InvalidArgumentError("duration must cover at least 2 carrier periods")
    return DigitalWaveform(
        channel=-1,
        samples=_square_samples(np.arange(n_ticks), 0, cpp),
        sample_rate=clock.clock_hz,
    )


def measured_phase(waveform_a: DigitalWaveform, waveform_b: DigitalWaveform) -> float:
    """Phase of b relative to a, [0, 2*pi), from rising-edge offsets.

    Edges are taken from the end of the capture: the first period can start
    mid-pulse (a high sample at tick 0 is the tail of the previous period),
    so steady state lives at the back.
    """
    edges_a = waveform_a.rising_edges()
    edges_b = waveform_b.rising_edges()
    if len(edges_a) < 2 or len(edges_b) < 2:
        raise NoEdgesError("waveforms must contain rising edges over >= 2 periods")
    period = int(edges_a[-1] - edges_a[-2])
    if int(edges_b[-1] - edges_b[-2]) != period:
        raise InvalidArgumentError("waveforms carry different carrier periods")
    delta = int(edges_b[-1] - edges_a[-1]) % period
    return 2.0 * np.pi * delta / period


class UpacEmulator:
    """Stateful controller front: single-writer register loads, generation
    that applies pending frames only at carrier-period boundaries."""

    def __init__(self, n_channels: int, quant: QuantizationConfig):
        self.quant = quant
        self._lock = threading.Lock()
        self._registers = make_register_file(n_channels, quant)
        self._pending: RegisterFile | None = None

    @property
    def registers(self) -> RegisterFile:
        with self._lock:
            return self._registers

    def load_frame(self, frame: PhaseFrame) -> None:
        regs = load_frame(self._registers, frame)
        with self._lock:
            self._pending = regs

    def set_enabled(self, channel: int, enabled: bool) -> None:
        with self._lock:
            mask = self._registers.enabled.copy()
            mask[channel] = enabled
            self._registers = RegisterFile(self._registers.delays, mask, self._registers.cycles_per_period)

    def generate(self, duration_s: float, load_events: list[tuple[int, PhaseFrame]] | None = None) -> list[DigitalWaveform]:
        """Generate waveforms period by period.

        load_events is a list of (tick, frame) pairs modelling host writes
        arriving mid-generation; each takes effect at the first period
        boundary at or after its tick, so no period mixes two frames.
        """
        cpp = self.quant.cycles_per_period
        n_ticks = int(round(duration_s * self.quant.clock_hz))
        if n_ticks < 2 * cpp:
            raise InvalidArgumentError("duration must cover at least 2 carrier periods")
        events = sorted(load_events or [], key=lambda e: e[0])
        n_channels = self._registers.n_channels
        out = np.zeros((n_channels, n_ticks), dtype=np.uint8)
        ev = 0
        for start in range(0, n_ticks, cpp):
            while ev < len(events) and events[ev][0] <= start:
                self.load_frame(events[ev][1])
                ev += 1
            with self._lock:
                if self._pending is not None:
                    self._registers = self._pending
                    self._pending = None
                regs = self._registers
            stop = min(start + cpp, n_ticks)
            ticks = np.arange(start, stop)
            for ch in range(n_channels):
                if regs.enabled[ch]:
                    out[ch, start:stop] = _square_samples(ticks, int(regs.delays[ch]), cpp)
        return [
            DigitalWaveform(channel=ch, samples=out[ch], sample_rate=self.quant.clock_hz)
            for ch in range(n_channels)
        ]


def dump_edges(waveforms: list[DigitalWaveform]) -> str:
    """Value-change dump: one line per transition, `tick channel level`.

    A high level at tick 0 is emitted as an edge from the implicit idle-low
    state. Lines are ordered by tick, then channel.
    """
    rows = []
    for wf in waveforms:
        s = wf.samples.astype(np.int8)
        change = np.flatnonzero(np.diff(s) != 0) + 1
        if len(s) and s[0] != 0:
            rows.append((0, wf.channel, int(s[0])))
        rows.extend((int(t), wf.channel, int(s[t])) for t in change)
    rows.sort()
    return "\n".join(f"{t} {ch} {level}" for t, ch, level in rows) + ("\n" if rows else "")


def parse_edges(text: str) -> list[tuple[int, int, int]]:
    """Inverse of dump_edges: list of (tick, channel, level)."""
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        t, ch, level = line.split()
        rows.append((int(t), int(ch), int(level)))
    return rows
