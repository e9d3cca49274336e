import numpy as np
import pytest

from sonotrap import (
    MediumState,
    QuantizationConfig,
    calibrate_source_amplitude,
    flat_8x8,
)
from sonotrap.field_sim import REFERENCE_TEMPERATURE_C


@pytest.fixture(scope="session")
def medium340():
    """Air at the reference lab temperature: c = 340 m/s, lambda(40k) = 8.5 mm."""
    return MediumState.from_temperature(REFERENCE_TEMPERATURE_C)


@pytest.fixture(scope="session")
def flat64():
    return flat_8x8()


@pytest.fixture(scope="session")
def quant40():
    return QuantizationConfig(carrier_hz=40_000.0)


@pytest.fixture(scope="session")
def reference_amplitude(medium340):
    """Source amplitude calibrated to 172 dB on the canonical focus."""
    return calibrate_source_amplitude(medium=medium340)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
