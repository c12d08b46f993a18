"""
Общие фикстуры тестов
"""
import logging

import pytest

from config import PRESETS, Preset
from models import ChannelParams, ModulationConfig


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: статистические проверки на 10⁵ частиц")


@pytest.fixture
def unit_channel() -> ChannelParams:
    """Канал x = 2 м, D = 1 м²/с: erfc(1) при t = 1 с"""
    return ChannelParams(diffusivity=1.0, distance=2.0)


@pytest.fixture
def short_channel() -> ChannelParams:
    """Канал с масштабом x²/D = 1 с"""
    return ChannelParams(diffusivity=1.0, distance=1.0)


@pytest.fixture(params=Preset.ALL_PRESETS)
def preset_channel(request) -> ChannelParams:
    return PRESETS[request.param]


@pytest.fixture
def intracellular() -> ChannelParams:
    return PRESETS[Preset.INTRACELLULAR]


@pytest.fixture
def modulation() -> ModulationConfig:
    return ModulationConfig(bit_period=1.0, molecules_per_pulse=1000)


@pytest.fixture(autouse=True)
def quiet_logs(caplog):
    caplog.set_level(logging.INFO)
