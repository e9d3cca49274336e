import pytest

from sonotrap import (
    FileTemperatureSource,
    MediumState,
    MockTemperatureSource,
    QuantizedTemperatureSource,
    SensorIOError,
    SensorRangeError,
    max_particle_radius,
    read_and_update,
    speed_of_sound,
    wavelength,
)
from sonotrap.medium import SENSOR_RANGE_C, FailingTemperatureSource


def test_speed_of_sound_reference_points():
    # oracle: published dry-air values 331.4 / 343.4 m/s at 0 / 20 degC
    assert speed_of_sound(0.0) == pytest.approx(331.4)
    assert speed_of_sound(20.0) == pytest.approx(343.4)


def test_speed_of_sound_gives_published_wavelength():
    # 14.3 degC -> c = 339.98, lambda ~ 8.5 mm at 40 kHz
    c = speed_of_sound(14.3)
    assert c == pytest.approx(339.98)
    state = MediumState.from_temperature(14.3)
    assert wavelength(40e3, state) == pytest.approx(8.5, abs=0.01)


def test_speed_of_sound_range_guard():
    with pytest.raises(SensorRangeError):
        speed_of_sound(-41.0)
    with pytest.raises(SensorRangeError):
        speed_of_sound(86.0)


def test_wavelength_values():
    state = MediumState.from_temperature(43.0 / 3.0)  # c = 340
    assert wavelength(40e3, state) == pytest.approx(8.5)
    assert wavelength(25e3, state) == pytest.approx(13.6)


def test_wavelength_monotone_in_temperature():
    temps = [-10.0, 0.0, 10.0, 20.0, 30.0, 40.0]
    lams = [wavelength(40e3, MediumState.from_temperature(t)) for t in temps]
    assert all(b > a for a, b in zip(lams, lams[1:]))


def test_max_particle_radius():
    state = MediumState.from_temperature(43.0 / 3.0)
    r40 = max_particle_radius(40e3, state)
    assert r40 == pytest.approx(2.125)  # 4.25 mm diameter ~ the "4 mm" bound
    assert max_particle_radius(25e3, state) == pytest.approx(3.4)
    assert max_particle_radius(80e3, state) == pytest.approx(r40 / 2)


def test_state_invariant_enforced():
    with pytest.raises(SensorRangeError):
        MediumState(temperature=20.0, speed_of_sound=999.0)


def test_read_and_update_mock():
    state = MediumState.from_temperature(14.3)
    updated = read_and_update(MockTemperatureSource(20.0), state)
    assert updated.speed_of_sound == pytest.approx(343.4)
    assert state.temperature == 14.3  # original untouched


def test_read_and_update_failure_keeps_state():
    state = MediumState.from_temperature(14.3)
    with pytest.raises(SensorIOError):
        read_and_update(FailingTemperatureSource(), state)
    assert state.speed_of_sound == pytest.approx(speed_of_sound(14.3))


def test_read_and_update_pure():
    state = MediumState.from_temperature(14.3)
    source = MockTemperatureSource(22.5)
    first = read_and_update(source, state)
    second = read_and_update(source, state)
    assert first == second


def test_quantized_source_resolution():
    span = SENSOR_RANGE_C[1] - SENSOR_RANGE_C[0]
    for true in (19.37, -3.1415, 84.99):
        reported, bits, _ = QuantizedTemperatureSource(true).read()
        assert bits == 14
        assert abs(reported - true) <= span / 2**14


def test_hygro_limits_enforced():
    with pytest.raises(SensorRangeError):
        MockTemperatureSource(20.0, resolution_bits=16)
    with pytest.raises(SensorRangeError):
        MockTemperatureSource(20.0, accuracy_c=0.5)


def test_file_source(tmp_path):
    path = tmp_path / "temp.txt"
    path.write_text("21.5\n")
    state = read_and_update(FileTemperatureSource(path), MediumState.from_temperature(10.0))
    assert state.temperature == 21.5
    with pytest.raises(SensorIOError):
        FileTemperatureSource(tmp_path / "missing.txt").read()
