"""Temperature-dependent air model and temperature-source abstraction.

The controller compensates for temperature drift by re-reading an ambient
sensor and recomputing the speed of sound (and with it every wavelength and
phase pattern). The linear dry-air model c = 331.4 + 0.6 T is used; it
matches published tables to ~0.3% over the sensor range.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Protocol

from .errors import SensorIOError, SensorRangeError

SENSOR_RANGE_C = (-40.0, 85.0)
AIR_DENSITY_20C = 1.204  # kg/m^3


def speed_of_sound(temperature_c: float) -> float:
    """Speed of sound in air, m/s, for a temperature in the sensor range."""
    if not SENSOR_RANGE_C[0] <= temperature_c <= SENSOR_RANGE_C[1]:
        raise SensorRangeError(
            f"temperature {temperature_c} degC outside sensor range {SENSOR_RANGE_C}"
        )
    return 331.4 + 0.6 * temperature_c


@dataclass(frozen=True)
class MediumState:
    """Snapshot of the propagation medium."""

    temperature: float  # degC
    speed_of_sound: float  # m/s
    density_air: float = AIR_DENSITY_20C  # kg/m^3

    def __post_init__(self):
        expected = speed_of_sound(self.temperature)
        if abs(self.speed_of_sound - expected) > 1e-9:
            raise SensorRangeError(
                f"speed_of_sound {self.speed_of_sound} inconsistent with T={self.temperature} "
                f"(expected {expected})"
            )
        if self.density_air <= 0:
            raise SensorRangeError("density_air must be positive")

    @classmethod
    def from_temperature(cls, temperature_c: float, density_air: float = AIR_DENSITY_20C) -> "MediumState":
        return cls(temperature_c, speed_of_sound(temperature_c), density_air)


def wavelength(carrier_hz: float, state: MediumState) -> float:
    """Acoustic wavelength in mm: lambda = c / f."""
    if carrier_hz <= 0:
        raise SensorRangeError("carrier must be positive")
    return state.speed_of_sound / carrier_hz * 1e3


def max_particle_radius(carrier_hz: float, state: MediumState) -> float:
    """Largest liftable particle radius, mm (half-wavelength diameter bound)."""
    return wavelength(carrier_hz, state) / 4.0


class TemperatureSource(Protocol):
    """Provider of ambient temperature readings.

    read() returns (temperature degC, resolution bits, accuracy degC) and
    raises SensorIOError when no measurement is available.
    """

    def read(self) -> tuple[float, int, float]: ...


class MockTemperatureSource:
    """Fixed-value source for tests and CLI overrides."""

    def __init__(self, temperature_c: float, resolution_bits: int = 14, accuracy_c: float = 0.2):
        if resolution_bits > 14:
            raise SensorRangeError("resolution exceeds the 14-bit sensor capability")
        if accuracy_c > 0.2:
            raise SensorRangeError("accuracy worse than the +-0.2 degC sensor spec")
        self.temperature_c = temperature_c
        self.resolution_bits = resolution_bits
        self.accuracy_c = accuracy_c

    def read(self):
        return (self.temperature_c, self.resolution_bits, self.accuracy_c)


class QuantizedTemperatureSource(MockTemperatureSource):
    """Mock source that quantizes the true value to the sensor resolution.

    The reported value differs from the true one by at most
    range / 2**resolution_bits.
    """

    def read(self):
        lo, hi = SENSOR_RANGE_C
        step = (hi - lo) / 2**self.resolution_bits
        code = round((self.temperature_c - lo) / step)
        return (lo + code * step, self.resolution_bits, self.accuracy_c)


class FileTemperatureSource:
    """Reads a single decimal temperature (degC) from a file, for scripted runs."""

    def __init__(self, path, resolution_bits: int = 14, accuracy_c: float = 0.2):
        self.path = path
        self.resolution_bits = resolution_bits
        self.accuracy_c = accuracy_c

    def read(self):
        try:
            with open(self.path, encoding="utf-8") as fh:
                value = float(fh.read().strip())
        except (OSError, ValueError) as exc:
            raise SensorIOError(f"cannot read temperature from {self.path}: {exc}") from exc
        return (value, self.resolution_bits, self.accuracy_c)


class FailingTemperatureSource:
    """Always raises; used to exercise error paths."""

    def read(self):
        raise SensorIOError("sensor unavailable")


def read_and_update(source: TemperatureSource, state: MediumState) -> MediumState:
    """Fresh MediumState from a sensor reading. The input state is untouched;
    a sensor failure propagates as SensorIOError."""
    temperature, _, _ = source.read()
    return replace(state, temperature=temperature, speed_of_sound=speed_of_sound(temperature))
