"""
Модели предметной области симулятора молекулярного канала связи
"""
import math
from dataclasses import dataclass, field, asdict
from typing import Dict, Any, List, Optional, Tuple

import numpy as np


# ================ ОШИБКИ ================

class InvalidParameterError(ValueError):
    """Нарушен инвариант параметров"""


class DegenerateChannelError(ValueError):
    """Приёмник совпадает с источником, конечного ответа нет"""


class DriftNotSupportedError(ValueError):
    """Замкнутая формула определена только для чистой диффузии"""


class FramingError(ValueError):
    """Длина кадра не согласована с преамбулой и байтами"""


class SyncError(ValueError):
    """Преамбула кадра не совпала"""


class ConfigError(ValueError):
    """Ошибка конфигурации запуска"""


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise InvalidParameterError(f"Поле '{name}' должно быть конечным, получено {value}")


# ================ КАНАЛ ================

@dataclass(frozen=True)
class ChannelParams:
    """Физический канал: коэффициент диффузии, расстояние, скорость дрейфа (всё в СИ)"""
    diffusivity: float
    distance: float
    drift_velocity: float = 0.0

    def __post_init__(self):
        _require_finite("diffusivity", self.diffusivity)
        _require_finite("distance", self.distance)
        _require_finite("drift_velocity", self.drift_velocity)
        if self.diffusivity <= 0:
            raise InvalidParameterError(f"Коэффициент диффузии должен быть > 0, получено {self.diffusivity}")
        if self.distance < 0:
            raise InvalidParameterError(f"Расстояние должно быть >= 0, получено {self.distance}")

    @property
    def has_drift(self) -> bool:
        return self.drift_velocity != 0.0

    @property
    def diffusion_time_scale(self) -> float:
        """Масштаб времени x²/D, через который выражаются все времена захвата"""
        return self.distance ** 2 / self.diffusivity

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class EmissionSchedule:
    """Последовательность мгновенных выбросов (время, число молекул)"""
    events: Tuple[Tuple[float, int], ...] = ()

    def __post_init__(self):
        events = tuple((float(t), int(n)) for t, n in self.events)
        object.__setattr__(self, "events", events)

        previous = None
        for time, count in events:
            _require_finite("event time", time)
            if time < 0:
                raise InvalidParameterError(f"Время выброса должно быть >= 0, получено {time}")
            if count < 1:
                raise InvalidParameterError(f"Число молекул в выбросе должно быть >= 1, получено {count}")
            if previous is not None and time <= previous:
                raise InvalidParameterError("Моменты выбросов должны строго возрастать")
            previous = time

    def __len__(self) -> int:
        return len(self.events)

    @property
    def total_molecules(self) -> int:
        return sum(count for _, count in self.events)


# ================ МОДЕМ ================

class ThresholdPolicy:
    """Политики выбора порога обнаружения"""
    FIXED = "fixed"
    CALIBRATED = "calibrated"

    ALL_POLICIES = [FIXED, CALIBRATED]


DEFAULT_PREAMBLE: Tuple[int, ...] = (1, 0, 1, 0, 1, 0, 1, 0)


@dataclass(frozen=True)
class ModulationConfig:
    """Параметры OOK-модуляции: длительность бита (защитный интервал), молекулы на импульс, преамбула, порог"""
    bit_period: float
    molecules_per_pulse: int
    preamble: Tuple[int, ...] = DEFAULT_PREAMBLE
    threshold_policy: str = ThresholdPolicy.FIXED
    threshold_alpha: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "preamble", tuple(int(b) for b in self.preamble))

        _require_finite("bit_period", self.bit_period)
        if self.bit_period <= 0:
            raise InvalidParameterError(f"Длительность бита должна быть > 0, получено {self.bit_period}")
        if self.molecules_per_pulse < 1:
            raise InvalidParameterError("Число молекул на импульс должно быть >= 1")
        if not self.preamble:
            raise InvalidParameterError("Преамбула не может быть пустой")
        if any(b not in (0, 1) for b in self.preamble):
            raise InvalidParameterError("Преамбула должна состоять из 0 и 1")
        if self.threshold_policy not in ThresholdPolicy.ALL_POLICIES:
            raise InvalidParameterError(
                f"Неизвестная политика порога '{self.threshold_policy}', "
                f"допустимы: {', '.join(ThresholdPolicy.ALL_POLICIES)}"
            )
        if not 0 < self.threshold_alpha < 1:
            raise InvalidParameterError(f"Доля порога должна лежать в (0, 1), получено {self.threshold_alpha}")
        if self.threshold_policy == ThresholdPolicy.CALIBRATED and len(set(self.preamble)) < 2:
            raise InvalidParameterError("Калибровка порога требует преамбулы, содержащей и 0, и 1")

    def with_bit_period(self, bit_period: float) -> "ModulationConfig":
        return ModulationConfig(
            bit_period=bit_period,
            molecules_per_pulse=self.molecules_per_pulse,
            preamble=self.preamble,
            threshold_policy=self.threshold_policy,
            threshold_alpha=self.threshold_alpha,
        )

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["preamble"] = "".join(str(b) for b in self.preamble)
        return data


@dataclass(frozen=True)
class BitFrame:
    """Кадр: преамбула и байты полезной нагрузки, старший бит первым"""
    bits: Tuple[int, ...]
    preamble: Tuple[int, ...] = DEFAULT_PREAMBLE

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        object.__setattr__(self, "preamble", tuple(int(b) for b in self.preamble))
        if any(b not in (0, 1) for b in self.bits):
            raise InvalidParameterError("Кадр должен состоять из 0 и 1")

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def payload_bits(self) -> Tuple[int, ...]:
        return self.bits[len(self.preamble):]

    @property
    def payload_length_bytes(self) -> int:
        return len(self.payload_bits) // 8


# ================ МОНТЕ-КАРЛО ================

@dataclass(frozen=True)
class WalkConfig:
    """Параметры моделирования случайного блуждания"""
    params: ChannelParams
    n_particles: int
    dt: float
    t_max: float
    seed: int = 0
    shards: int = 1
    bridge_correction: bool = False
    interpolate_crossing: bool = False

    def __post_init__(self):
        _require_finite("dt", self.dt)
        _require_finite("t_max", self.t_max)
        if self.n_particles < 1:
            raise InvalidParameterError("Число частиц должно быть >= 1")
        if self.dt <= 0 or self.t_max <= 0:
            raise InvalidParameterError("Шаг и горизонт моделирования должны быть > 0")
        if self.dt >= self.t_max:
            raise InvalidParameterError(f"Шаг dt={self.dt} должен быть меньше горизонта t_max={self.t_max}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidParameterError("Сид должен быть 64-битным беззнаковым целым")
        if self.shards < 1:
            raise InvalidParameterError("Число шардов должно быть >= 1")

    @property
    def max_fine_dt(self) -> float:
        """Верхняя граница шага, при которой пересечение за один шаг редко перескакивает приёмник"""
        return self.params.diffusion_time_scale / 100.0

    @property
    def is_fine(self) -> bool:
        return self.params.distance == 0 or self.dt <= self.max_fine_dt


@dataclass(frozen=True)
class AbsorptionRecord:
    """Результат блуждания: отсортированные моменты поглощения и число невернувшихся частиц"""
    absorption_times: np.ndarray
    n_escaped: int

    def __post_init__(self):
        times = np.sort(np.asarray(self.absorption_times, dtype=np.float64))
        times.flags.writeable = False
        object.__setattr__(self, "absorption_times", times)

    @property
    def n_absorbed(self) -> int:
        return int(self.absorption_times.size)

    @property
    def n_particles(self) -> int:
        return self.n_absorbed + self.n_escaped

    @property
    def absorbed_fraction(self) -> float:
        return self.n_absorbed / self.n_particles if self.n_particles else 0.0

    def __eq__(self, other):
        if not isinstance(other, AbsorptionRecord):
            return NotImplemented
        return self.n_escaped == other.n_escaped and np.array_equal(self.absorption_times, other.absorption_times)


# ================ КАНАЛ ЦЕЛИКОМ ================

@dataclass(frozen=True)
class RateModel:
    """Ресурс B, ёмкость на единицу ресурса C и качество канала S (только метаданные)"""
    bandwidth_resource: float
    capacity_per_resource: float
    channel_quality: Optional[float] = None

    def __post_init__(self):
        _require_finite("bandwidth_resource", self.bandwidth_resource)
        _require_finite("capacity_per_resource", self.capacity_per_resource)
        if self.bandwidth_resource < 0 or self.capacity_per_resource < 0:
            raise InvalidParameterError("Ресурс и ёмкость на единицу ресурса должны быть >= 0")


class CapacityMethod:
    BSC_BOUND = "bsc_bound"


@dataclass(frozen=True)
class LinkReport:
    """Итог одного прогона канала"""
    bits_sent: int
    bit_errors: int
    ber: float
    char_errors: int
    delay_spread_s: float
    throughput_bps: float
    capacity_estimate_bps: float
    seed: int
    config: Dict[str, Any]
    recovered_text: Optional[str] = None
    sync_error: bool = False
    framing_error: bool = False
    noiseless: bool = False
    capacity_method: str = CapacityMethod.BSC_BOUND
    slot_counts: Tuple[float, ...] = field(default=(), compare=True, repr=False)

    def __post_init__(self):
        if not 0 <= self.bit_errors <= self.bits_sent:
            raise InvalidParameterError("Число битовых ошибок вне [0, bits_sent]")

    def to_dict(self) -> Dict[str, Any]:
        """Словарь для JSON-отчёта; отсчёты по слотам пишутся отдельным CSV"""
        data = asdict(self)
        data.pop("slot_counts")
        return data


@dataclass(frozen=True)
class MultiLinkReport:
    """Параллельные каналы, по одному на тип молекул"""
    per_type: Tuple[LinkReport, ...]
    aggregate_throughput_bps: float
    aggregate_capacity_bps: float
    recovered_text: Optional[str] = None

    @property
    def n_types(self) -> int:
        return len(self.per_type)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_types": self.n_types,
            "aggregate_throughput_bps": self.aggregate_throughput_bps,
            "aggregate_capacity_bps": self.aggregate_capacity_bps,
            "recovered_text": self.recovered_text,
            "per_type": [report.to_dict() for report in self.per_type],
        }


@dataclass(frozen=True)
class SweepRow:
    guard_multiplier: float
    bit_period_s: float
    mean_ber: float
    std_ber: float
    n_seeds: int


# ================ СПРАВОЧНЫЕ ДАННЫЕ ================

# Сравнение радиосвязи и химической связи
REFERENCE_SYSTEMS: List[Dict[str, str]] = [
    {"parameter": "System", "em": "4G LTE", "chemical": "Kinboshi"},
    {"parameter": "Resource", "em": "Bandwidth (20MHz)", "chemical": "Chemical Types"},
    {"parameter": "Range", "em": "Very Long (km)", "chemical": "Short (m)"},
    {"parameter": "Delay Spread", "em": "Small (ns)", "chemical": "Long (s)"},
    {"parameter": "Reliability", "em": "Very High", "chemical": "Medium"},
    {"parameter": "Peak Capacity", "em": "5 bits/s/Hz", "chemical": "0.3 bits/s/chemical"},
    {"parameter": "Emitter Size Limitation", "em": "Wavelength (mm-cm)", "chemical": ">Molecule Size"},
    {"parameter": "Propagation Law", "em": "Maxwell", "chemical": "Brownian Motion"},
    {"parameter": "Artificial Gain", "em": "Antenna Gain", "chemical": "Drift Current"},
    {"parameter": "Emission Type", "em": "Active (Antenna)", "chemical": "Passive or Active"},
    {"parameter": "Energy Consumption", "em": "High (Watts)", "chemical": "None (Passive) or Low (Active)"},
]

# Ёмкость на тип молекул: оценка из обзора и пиковое значение стенда (бит/с)
CAPACITY_PER_TYPE_SURVEY_BPS = 0.1
CAPACITY_PER_TYPE_TESTBED_PEAK_BPS = 0.3

# Опорная радиосистема: 20 МГц при 5 бит/с/Гц и SNR = 1000
EM_REFERENCE_BANDWIDTH_HZ = 20e6
EM_REFERENCE_SPECTRAL_EFFICIENCY = 5.0
EM_REFERENCE_SNR = 1000.0
