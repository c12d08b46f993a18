"""
Конфигурация запуска симулятора молекулярного канала
"""
import json
import logging
import os
import re
from dataclasses import dataclass, fields, asdict
from typing import Any, Dict, List, Optional, Tuple, Union

from models import ChannelParams, ConfigError, ThresholdPolicy

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = "config.json"
SEED_ENV_VAR = "MOLDIFF_SEED"

# Множители перевода в СИ
DIFFUSIVITY_UNITS = {"m2/s": 1.0, "cm2/s": 1e-4, "mm2/s": 1e-6, "um2/s": 1e-12}
LENGTH_UNITS = {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6}
VELOCITY_UNITS = {"m/s": 1.0, "cm/s": 1e-2, "mm/s": 1e-3, "um/s": 1e-6}

UNITS_BY_KIND = {
    "diffusivity": DIFFUSIVITY_UNITS,
    "length": LENGTH_UNITS,
    "velocity": VELOCITY_UNITS,
}

_QUANTITY_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-z0-9/]*)\s*$")


class Preset:
    """Пресеты каналов: середины диапазонов внутриклеточной и межорганизменной сигнализации"""
    INTRACELLULAR = "intracellular"
    INTERORGANISM = "interorganism"

    ALL_PRESETS = [INTRACELLULAR, INTERORGANISM]


PRESETS: Dict[str, ChannelParams] = {
    Preset.INTRACELLULAR: ChannelParams(diffusivity=100 * 1e-12, distance=100 * 1e-6),
    Preset.INTERORGANISM: ChannelParams(diffusivity=0.5 * 1e-4, distance=2.0),
}


@dataclass(frozen=True)
class RegimeRange:
    """Диапазоны D и x режима сигнализации и качественное утверждение о времени захвата"""
    diffusivity_range: Tuple[float, float]
    distance_range: Tuple[float, float]
    claim: str


# «Несколько метров» для межорганизменного режима прочитано как 1–5 м
REGIME_RANGES: Dict[str, RegimeRange] = {
    Preset.INTRACELLULAR: RegimeRange(
        diffusivity_range=(1e-12, 300e-12),
        distance_range=(1e-6, 200e-6),
        claim="capture of 90% or more in less than a millisecond",
    ),
    Preset.INTERORGANISM: RegimeRange(
        diffusivity_range=(0.1e-4, 1e-4),
        distance_range=(1.0, 5.0),
        claim="capture of 90% or more in a few minutes to an hour",
    ),
}


def parse_quantity(value: Any, kind: str, default_unit: Optional[str] = None) -> float:
    """
    Разбор величины с необязательным суффиксом единиц, например "100um2/s" или "2m"

    Args:
        value: Число или строка
        kind: "diffusivity", "length" или "velocity"
        default_unit: Единица для чисел без суффикса (по умолчанию СИ)

    Returns:
        Значение в СИ
    """
    units = UNITS_BY_KIND[kind]

    if isinstance(value, (int, float)) and not isinstance(value, bool):
        number, unit = float(value), default_unit
    else:
        match = _QUANTITY_RE.match(str(value))
        if not match:
            raise ConfigError(f"Не удалось разобрать величину '{value}'")
        number, unit = float(match.group(1)), match.group(2) or default_unit

    unit = unit or next(iter(units))
    if unit not in units:
        raise ConfigError(f"Неизвестная единица '{unit}' для {kind}, допустимы: {', '.join(units)}")
    return number * units[unit]


def parse_preamble(value: Any) -> Tuple[int, ...]:
    text = "".join(str(value).split())
    if not text or any(ch not in "01" for ch in text):
        raise ConfigError(f"Преамбула должна быть непустой строкой из 0 и 1, получено '{value}'")
    return tuple(int(ch) for ch in text)


@dataclass
class RunConfig:
    # Канал: либо пресет, либо явные D и x
    preset: Optional[str] = None
    diffusivity: Optional[Union[float, str]] = None
    diffusivity_unit: str = "m2/s"
    distance: Optional[Union[float, str]] = None
    distance_unit: str = "m"
    drift_velocity: Union[float, str] = 0.0
    drift_unit: str = "m/s"

    # Модуляция
    guard_multiplier: float = 10.0
    bit_period_s: Optional[float] = None
    molecules_per_pulse: int = 10_000
    preamble: str = "10101010"
    threshold_policy: str = ThresholdPolicy.FIXED
    threshold_alpha: float = 0.5

    # Блуждание
    seed: int = 0
    shards: int = 1
    steps_per_slot: int = 20
    tail_multiplier: float = 5.0
    bridge_correction: bool = True
    interpolate_crossing: bool = False
    check_particles: int = 10_000
    noiseless: bool = False
    molecule_types: int = 1

    # Вывод
    output_dir: str = "output"
    output_format: str = "csv"
    log_file: Optional[str] = None
    debug: bool = False

    @classmethod
    def load_from_file(cls, config_path: str = DEFAULT_CONFIG_PATH, required: bool = True) -> "RunConfig":
        """Загрузка конфигурации из JSON файла"""
        if not os.path.exists(config_path):
            if required:
                raise ConfigError(f"❌ Файл конфигурации '{config_path}' не найден")
            logger.debug(f"Файл конфигурации '{config_path}' не найден, используются значения по умолчанию")
            return cls()

        with open(config_path, "r", encoding="utf-8") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"❌ Файл конфигурации '{config_path}' не является JSON: {e}")

        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"❌ Неизвестные поля конфигурации: {', '.join(unknown)}")
        return cls(**data)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """
        Наложение значений флагов поверх файла; None означает «флаг не задан»

        Явный канал в флагах отменяет пресет из файла и наоборот.
        """
        data = asdict(self)
        given = {key: value for key, value in overrides.items() if value is not None}

        if "preset" in given:
            data["diffusivity"] = None
            data["distance"] = None
        elif "diffusivity" in given or "distance" in given:
            data["preset"] = None

        data.update(given)
        return RunConfig.from_dict(data)

    def validate(self) -> None:
        """Валидация конфигурации"""
        explicit = self.diffusivity is not None or self.distance is not None

        if self.preset is not None and explicit:
            raise ConfigError("❌ Задайте либо пресет канала, либо явные D и x, но не оба")
        if self.preset is None and not explicit:
            raise ConfigError(
                f"❌ Канал не задан: укажите пресет ({', '.join(Preset.ALL_PRESETS)}) или явные D и x"
            )
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigError(
                f"❌ Неизвестный пресет '{self.preset}', допустимы: {', '.join(Preset.ALL_PRESETS)}"
            )
        if explicit and (self.diffusivity is None or self.distance is None):
            raise ConfigError("❌ Явный канал требует и D, и x")

        if self.guard_multiplier <= 0:
            raise ConfigError("❌ Множитель защитного интервала должен быть > 0")
        if self.bit_period_s is not None and self.bit_period_s <= 0:
            raise ConfigError("❌ Длительность бита должна быть > 0")
        if self.molecules_per_pulse < 1:
            raise ConfigError("❌ Число молекул на импульс должно быть >= 1")
        if self.threshold_policy not in ThresholdPolicy.ALL_POLICIES:
            raise ConfigError(
                f"❌ Неизвестная политика порога '{self.threshold_policy}', "
                f"допустимы: {', '.join(ThresholdPolicy.ALL_POLICIES)}"
            )
        if self.steps_per_slot < 1 or self.shards < 1 or self.molecule_types < 1 or self.check_particles < 1:
            raise ConfigError("❌ steps_per_slot, shards, molecule_types и check_particles должны быть >= 1")
        if self.tail_multiplier < 0:
            raise ConfigError("❌ Множитель хвоста должен быть >= 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("❌ Сид должен быть 64-битным беззнаковым целым")
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"❌ Формат вывода '{self.output_format}' не поддерживается, допустимы: csv, json")

        parse_preamble(self.preamble)

    def channel_params(self) -> ChannelParams:
        """Параметры канала в СИ"""
        self.validate()
        drift = parse_quantity(self.drift_velocity, "velocity", self.drift_unit)
        if self.preset is not None:
            base = PRESETS[self.preset]
            return ChannelParams(base.diffusivity, base.distance, drift)

        return ChannelParams(
            diffusivity=parse_quantity(self.diffusivity, "diffusivity", self.diffusivity_unit),
            distance=parse_quantity(self.distance, "length", self.distance_unit),
            drift_velocity=drift,
        )

    def preamble_bits(self) -> Tuple[int, ...]:
        return parse_preamble(self.preamble)

    def documented_regimes(self) -> List[str]:
        """Режимы, для которых выводится огибающая времени захвата: пресет или оба"""
        return [self.preset] if self.preset is not None else list(Preset.ALL_PRESETS)
