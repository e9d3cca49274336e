"""Closed-loop object detection from scattered probe bursts.

A probe tone burst is emitted from the array center, scatters off the
levitated sphere (Rayleigh regime, amplitude ~ a^3/lambda^2 with a smooth
roll-off near the half-wavelength size bound) and is picked up by the one
or two channels re-roled as receivers. The receive chain models the
transducer resonance (2nd-order band-pass, Q=10), the 2-channel 12-bit
ADC at up to 1 MSPS, and additive Gaussian sampling noise. Detection is a
matched filter against the probe burst as shaped by the same receive
filter; direction comes from the signed inter-channel delay (amplitude
asymmetry as tie-break).

Continuous levitation drive leaks into the receivers along the in-plane
path; it is attenuated by both piston directivities at 90 degrees and a
PCB-baffle shielding constant. With probe == levitation carrier the leak
dominates the matched-filter output (same-frequency detection is not
usable); with split carriers the echo wins.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import bilinear, lfilter
from scipy.special import j1

from .errors import InvalidArgumentError, NoReceiverError
from .geometry import ArrayLayout
from .medium import MediumState, wavelength

#: Lumped drive * receiver sensitivity, V*mm^2 (model-level constant chosen
#: so a 1 mm sphere at ~110 mm returns a few-hundred-millivolt echo).
DEFAULT_DRIVE_GAIN = 5e5
#: In-plane (emitter -> receiver) shielding from the PCB baffle, dB.
DEFAULT_LATERAL_SHIELDING_DB = 40.0
RECEIVER_Q = 10.0
DEFAULT_BURST_CYCLES = 32
NOISE_SIGMA_STEPS = 2.0


class Direction(enum.Enum):
    WEST = "west"
    EAST = "east"
    NORTH = "north"
    SOUTH = "south"


@dataclass(frozen=True)
class AdcModel:
    """The controller's SAR ADC: 12 bits, 2 channels, <= 1 MSPS."""

    bits: int = 12
    channels: int = 2
    sample_rate: float = 1e6
    full_scale: float = 3.3  # volts

    def __post_init__(self):
        if self.channels > 2:
            raise InvalidArgumentError("the ADC has 2 channels")
        if self.sample_rate > 1e6:
            raise InvalidArgumentError("the ADC samples at up to 1 MSPS")
        if not 1 <= self.bits <= 16:
            raise InvalidArgumentError("bits out of range")

    @property
    def quantization_step(self) -> float:
        return self.full_scale / 2**self.bits

    @property
    def max_code(self) -> int:
        return 2**self.bits - 1

    def quantize(self, volts: np.ndarray) -> np.ndarray:
        """Bipolar signal into unipolar codes around mid-scale."""
        mid = (self.max_code + 1) // 2
        codes = np.rint(volts / self.quantization_step).astype(np.int64) + mid
        return np.clip(codes, 0, self.max_code)

    def to_volts(self, codes: np.ndarray) -> np.ndarray:
        mid = (self.max_code + 1) // 2
        return (np.asarray(codes, dtype=float) - mid) * self.quantization_step


@dataclass(frozen=True, eq=False)
class EchoTrace:
    """One receiver's quantized capture."""

    channel: int
    samples: np.ndarray  # int codes, [0, 2^bits - 1]
    sample_rate: float
    probe_frequency: float

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.int64))


@dataclass(frozen=True)
class DetectionResult:
    detected: bool
    direction: Direction | None
    amplitude: float  # volts-equivalent matched-filter estimate
    estimated_offset_sign: dict
    tof_seconds: float | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.direction is not None and not self.detected:
            raise InvalidArgumentError("direction requires detection")


def piston_directivity(theta_rad: float, radius_mm: float, lam_mm: float) -> float:
    """Far-field baffled piston pattern 2 J1(ka sin)/(ka sin)."""
    x = 2.0 * math.pi / lam_mm * radius_mm * math.sin(theta_rad)
    if abs(x) < 1e-8:
        return 1.0 - x * x / 8.0
    return 2.0 * j1(x) / x


def scatter_length(radius_mm: float, lam_mm: float) -> float:
    """Rayleigh scattering amplitude length (mm): k^2 a^3 with a smooth
    roll-off near the half-wavelength size bound, monotone in a."""
    k = 2.0 * math.pi / lam_mm
    x = 2.0 * radius_mm / (lam_mm / 2.0)  # size relative to the lambda/2 bound
    return k**2 * radius_mm**3 / math.sqrt(1.0 + x**4)


def max_in_trap_size(levitation_carrier_hz: float, medium: MediumState) -> float:
    """Largest liftable particle size (diameter, mm): half a wavelength."""
    return wavelength(levitation_carrier_hz, medium) / 2.0


def _receiver_bandpass(fs: float, center_hz: float, q: float = RECEIVER_Q):
    w0 = 2.0 * math.pi * center_hz
    b, a = bilinear([w0 / q, 0.0], [1.0, w0 / q, w0**2], fs)
    return b, a


def _burst(fs: float, freq: float, n_cycles: int) -> np.ndarray:
    """Hann-windowed tone burst starting at t=0."""
    n = max(2, int(round(n_cycles / freq * fs)))
    t = np.arange(n) / fs
    return np.sin(2.0 * math.pi * freq * t) * np.hanning(n)


def _angle_between(v: np.ndarray, normal: np.ndarray) -> float:
    cos = float(np.dot(v, normal) / np.linalg.norm(v))
    return math.acos(np.clip(cos, -1.0, 1.0))


def simulate_echo(
    layout: ArrayLayout,
    particle,
    probe_frequency: float,
    medium: MediumState,
    adc: AdcModel | None = None,
    duration: float = 2.5e-3,
    drive_gain: float = DEFAULT_DRIVE_GAIN,
    n_cycles: int = DEFAULT_BURST_CYCLES,
    include_levitation_leakage: bool = False,
    levitation_frequency: float | None = None,
    lateral_shielding_db: float = DEFAULT_LATERAL_SHIELDING_DB,
    noise_sigma_steps: float = NOISE_SIGMA_STEPS,
    seed: int = 0,
) -> list[EchoTrace]:
    """Per-receiver quantized echo captures for one probe burst.

    particle is a ParticleState (or anything with .position mm and .radius
    mm). The probe is emitted from the array element closest to the
    centroid; each receiver hears the burst delayed by the two-leg
    time of flight and scaled by 1/(d1 d2), the Rayleigh scatter length and
    both piston patterns, then filtered by its resonance and sampled.
    """
    adc = AdcModel() if adc is None else adc
    receivers = layout.receivers
    if not receivers:
        raise NoReceiverError("layout has no receiver channels")
    if len(receivers) > adc.channels:
        raise InvalidArgumentError("more receivers than ADC channels")
    emitters = layout.emitters
    centroid = layout.emitter_positions.mean(axis=0)
    src = min(emitters, key=lambda t: float(np.linalg.norm(t.position - centroid)))

    pos = np.asarray(particle.position, dtype=float)
    radius = float(particle.radius)
    lam_probe = wavelength(probe_frequency, medium)
    c_mm = medium.speed_of_sound * 1e3  # mm/s
    fs = adc.sample_rate
    n_samples = int(round(duration * fs))
    t = np.arange(n_samples) / fs
    burst = _burst(fs, probe_frequency, n_cycles)

    d1 = float(np.linalg.norm(pos - src.position))
    theta_src = _angle_between(pos - src.position, src.normal)
    scatter = scatter_length(radius, lam_probe)

    rng = np.random.default_rng(seed)
    traces = []
    for rx in receivers:
        d2 = float(np.linalg.norm(rx.position - pos))
        theta_rx = _angle_between(pos - rx.position, rx.normal)
        lam_rx = wavelength(rx.carrier_frequency, medium)
        amp = (
            drive_gain
            * abs(piston_directivity(theta_src, src.radius, lam_probe))
            * abs(piston_directivity(theta_rx, rx.radius, lam_rx))
            * scatter
            / (d1 * d2)
        )
        delay_s = (d1 + d2) / c_mm
        analog = np.zeros(n_samples)
        start = int(round(delay_s * fs))
        if start < n_samples:
            seg = min(len(burst), n_samples - start)
            analog[start : start + seg] += amp * burst[:seg]

        if include_levitation_leakage:
            f_lev = probe_frequency if levitation_frequency is None else levitation_frequency
            lam_lev = wavelength(f_lev, medium)
            shield = 10.0 ** (-lateral_shielding_db / 20.0)
            leak = 0.0 + 0.0j
            k_lev = 2.0 * math.pi / lam_lev
            for em in emitters:
                v = rx.position - em.position
                d = float(np.linalg.norm(v))
                if d < 1e-9:
                    continue
                g = abs(piston_directivity(_angle_between(v, em.normal), em.radius, lam_lev)) * abs(
                    piston_directivity(_angle_between(-v, rx.normal), rx.radius, lam_rx)
                )
                leak += g / d * np.exp(1j * k_lev * d)
            leak_amp = drive_gain * shield * leak / 1.0
            analog += np.real(leak_amp) * np.cos(2.0 * math.pi * f_lev * t) - np.imag(
                leak_amp
            ) * np.sin(2.0 * math.pi * f_lev * t)

        b, a = _receiver_bandpass(fs, rx.carrier_frequency)
        filtered = lfilter(b, a, analog)
        filtered = filtered + rng.normal(0.0, noise_sigma_steps * adc.quantization_step, n_samples)
        traces.append(
            EchoTrace(
                channel=rx.id,
                samples=adc.quantize(filtered),
                sample_rate=fs,
                probe_frequency=probe_frequency,
            )
        )
    return traces


def _matched_template(fs: float, probe_frequency: float, n_cycles: int) -> np.ndarray:
    """The probe burst as shaped by the (probe-centered) receive filter."""
    burst = _burst(fs, probe_frequency, n_cycles)
    b, a = _receiver_bandpass(fs, probe_frequency)
    padded = np.concatenate([burst, np.zeros(int(3 * RECEIVER_Q / probe_frequency * fs))])
    return lfilter(b, a, padded)


def detect(
    traces: list[EchoTrace],
    noise_floor: float = 8.0,
    adc: AdcModel | None = None,
    layout: ArrayLayout | None = None,
    n_cycles: int = DEFAULT_BURST_CYCLES,
) -> DetectionResult:
    """Matched-filter detection and direction estimate.

    noise_floor is in quantization steps; the echo is detected when the
    matched-filter amplitude estimate exceeds it. With two traces the
    direction points toward the receiver with the earlier arrival
    (amplitude asymmetry breaks near-ties); the axis comes from the
    receiver geometry when a layout is given, defaulting to west-east on
    channel order otherwise.
    """
    if not traces:
        raise InvalidArgumentError("need at least one trace")
    adc = AdcModel() if adc is None else adc
    warnings = []
    per_channel = []
    for trace in traces:
        volts = adc.to_volts(trace.samples)
        clipped = np.mean((trace.samples == 0) | (trace.samples == adc.max_code))
        if clipped >= 0.01:
            warnings.append(f"adc-saturation:channel={trace.channel}")
        template = _matched_template(trace.sample_rate, trace.probe_frequency, n_cycles)
        corr = np.correlate(volts, template, mode="valid")
        peak_idx = int(np.argmax(np.abs(corr)))
        alpha = abs(corr[peak_idx]) / float(np.sum(template**2))
        amplitude = float(alpha * np.max(np.abs(template)))
        per_channel.append((trace, peak_idx, amplitude))

    best = max(per_channel, key=lambda x: x[2])
    detected = bool(best[2] > noise_floor * adc.quantization_step)
    tof = float(best[1] / best[0].sample_rate) if detected else None

    direction = None
    offset_sign: dict = {}
    if detected and len(per_channel) == 2:
        (tr_a, idx_a, amp_a), (tr_b, idx_b, amp_b) = per_channel
        axis, negative_dir, positive_dir = "x", Direction.WEST, Direction.EAST
        a_is_negative = True
        if layout is not None:
            rx = {t.id: t for t in layout.receivers}
            pa, pb = rx[tr_a.channel].position, rx[tr_b.channel].position
            d = pb - pa
            if abs(d[1]) > abs(d[0]):
                axis, negative_dir, positive_dir = "y", Direction.SOUTH, Direction.NORTH
                a_is_negative = pa[1] < pb[1]
            else:
                a_is_negative = pa[0] < pb[0]
        lag = idx_a - idx_b  # >0: b arrived first -> particle closer to b
        if lag == 0:
            rel = (amp_a - amp_b) / max(amp_a, amp_b)
            sign = 0 if abs(rel) < 0.1 else (-1 if rel > 0 else 1)
        else:
            sign = 1 if lag > 0 else -1
        if not a_is_negative:
            sign = -sign
        offset_sign[axis] = sign
        if sign > 0:
            direction = positive_dir
        elif sign < 0:
            direction = negative_dir

    return DetectionResult(
        detected=detected,
        direction=direction,
        amplitude=best[2],
        estimated_offset_sign=offset_sign,
        tof_seconds=tof,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class SizeCurvePoint:
    size_mm: float
    amplitude: float
    in_trap: bool


def amplitude_vs_size(
    probe_frequency: float,
    sizes_mm,
    medium: MediumState,
    levitation_frequency: float | None = None,
    drive_gain: float = DEFAULT_DRIVE_GAIN,
    distance_product_mm2: float = 110.0 * 110.0,
) -> list[SizeCurvePoint]:
    """Echo amplitude against particle size (diameter, mm), fixed geometry.

    The in_trap flag marks sizes liftable by the levitation carrier (the
    other frequency of the dual arrangement by default); oversized entries
    are still computed, just flagged.
    """
    if levitation_frequency is None:
        levitation_frequency = 25_000.0 if probe_frequency >= 32_500.0 else 40_000.0
    lam_probe = wavelength(probe_frequency, medium)
    bound = max_in_trap_size(levitation_frequency, medium)
    points = []
    for size in sizes_mm:
        if size <= 0:
            raise InvalidArgumentError("sizes must be positive")
        amp = drive_gain * scatter_length(size / 2.0, lam_probe) / distance_product_mm2
        points.append(SizeCurvePoint(size_mm=size, amplitude=amp, in_trap=size <= bound))
    return points


# -- trace export --------------------------------------------------------------

def trace_to_pcm(trace: EchoTrace) -> bytes:
    """12-bit codes left-justified in 16-bit little-endian words."""
    shifted = (trace.samples.astype(np.uint16) << 4).astype("<u2")
    return shifted.tobytes()


def pcm_to_codes(blob: bytes) -> np.ndarray:
    return (np.frombuffer(blob, dtype="<u2") >> 4).astype(np.int64)


def trace_sidecar_json(trace: EchoTrace) -> str:
    return json.dumps(
        {
            "sample_rate": trace.sample_rate,
            "probe_frequency": trace.probe_frequency,
            "channel": trace.channel,
            "format": "12-bit left-justified in 16-bit little-endian",
        },
        indent=2,
    )


def export_trace(trace: EchoTrace, path_base) -> tuple[str, str]:
    """Write <base>.pcm and <base>.json; returns the two paths."""
    pcm_path = f"{path_base}.pcm"
    json_path = f"{path_base}.json"
    with open(pcm_path, "wb") as fh:
        fh.write(trace_to_pcm(trace))
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(trace_sidecar_json(trace) + "\n")
    return pcm_path, json_path
