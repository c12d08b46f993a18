"""
Замкнутые формулы диффузионного канала: импульсный отклик, вероятность захвата и их обращение
"""
import logging
import math
from itertools import product
from typing import Dict, Any, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc, erfcinv

from models import (
    ChannelParams,
    EmissionSchedule,
    DegenerateChannelError,
    DriftNotSupportedError,
    InvalidParameterError,
)

logger = logging.getLogger(__name__)

DEFAULT_SPREAD_LO = 0.1
DEFAULT_SPREAD_HI = 0.9

# Допуски поиска корня для времени захвата
ROOT_RTOL = 1e-12
ROOT_MAX_ITER = 200


class PhysicsService:
    """Одномерный диффузионный канал с поглощающим приёмником на расстоянии x"""

    def concentration_pdf(self, params: ChannelParams, t: float, position: Optional[float] = None) -> float:
        """
        Плотность концентрации через время t после мгновенного выброса

        Args:
            params: Параметры канала
            t: Время после выброса, с
            position: Точка вычисления; по умолчанию расстояние до приёмника

        Returns:
            Плотность, 1/м
        """
        if not math.isfinite(t) or t <= 0:
            raise InvalidParameterError(f"Импульсный отклик определён только при t > 0, получено t={t}")

        x = params.distance if position is None else position
        spread = 4.0 * params.diffusivity * t
        offset = x - params.drift_velocity * t
        return math.exp(-offset * offset / spread) / math.sqrt(math.pi * spread)

    def capture_probability(self, params: ChannelParams, t: float) -> float:
        """
        Вероятность того, что молекула достигла приёмника к моменту t

        Используется положительный аргумент erfc(x / 2√(Dt)): это вероятность
        первого достижения уровня x одномерным броуновским движением.
        """
        self._require_pure_diffusion(params)
        if not math.isfinite(t) or t < 0:
            raise InvalidParameterError(f"Время должно быть >= 0, получено t={t}")

        if params.distance == 0:
            return 1.0
        if t == 0:
            return 0.0

        value = float(erfc(params.distance / (2.0 * math.sqrt(params.diffusivity * t))))
        return min(1.0, max(0.0, value))

    def time_to_capture(self, params: ChannelParams, p_target: float) -> float:
        """
        Время, к которому захвачена доля p_target выпущенных молекул

        Стартовая точка берётся из обратной erfc, ответ уточняется
        скобочным поиском корня brentq на монотонной функции.

        Args:
            params: Параметры канала без дрейфа, x > 0
            p_target: Целевая вероятность захвата в (0, 1)

        Returns:
            Время, с
        """
        self._require_pure_diffusion(params)
        if not 0 < p_target < 1:
            raise InvalidParameterError(f"Целевая вероятность должна лежать в (0, 1), получено {p_target}")
        if params.distance == 0:
            raise DegenerateChannelError("Приёмник совпадает с источником: захват мгновенный")

        z = float(erfcinv(p_target))
        guess = params.diffusion_time_scale / (4.0 * z * z)

        def residual(t: float) -> float:
            return self.capture_probability(params, t) - p_target

        lo, hi = guess / 2.0, guess * 2.0
        while residual(lo) > 0:
            lo /= 2.0
        while residual(hi) < 0:
            hi *= 2.0

        return float(brentq(residual, lo, hi, xtol=guess * 1e-15, rtol=ROOT_RTOL, maxiter=ROOT_MAX_ITER))

    def delay_spread(
        self,
        params: ChannelParams,
        lo: float = DEFAULT_SPREAD_LO,
        hi: float = DEFAULT_SPREAD_HI,
    ) -> float:
        """Ширина окна захвата одиночного импульса между долями lo и hi"""
        if not 0 < lo < hi < 1:
            raise InvalidParameterError(f"Нужно 0 < lo < hi < 1, получено lo={lo}, hi={hi}")
        return self.time_to_capture(params, hi) - self.time_to_capture(params, lo)

    def superpose_capture(self, schedule: EmissionSchedule, params: ChannelParams, t: float) -> float:
        """Ожидаемое число захваченных к моменту t молекул от всех выбросов расписания"""
        self._require_pure_diffusion(params)
        if not math.isfinite(t) or t < 0:
            raise InvalidParameterError(f"Время должно быть >= 0, получено t={t}")

        total = 0.0
        for event_time, count in schedule.events:
            if event_time > t:
                break
            total += count * self.capture_probability(params, t - event_time)
        return total

    def expected_slot_counts(
        self,
        schedule: EmissionSchedule,
        params: ChannelParams,
        slot_period: float,
        n_slots: int,
    ) -> List[float]:
        """
        Ожидаемые захваты в слотах (k·T, (k+1)·T]: канал без шума

        Args:
            schedule: Расписание выбросов
            params: Параметры канала без дрейфа
            slot_period: Длительность слота T, с
            n_slots: Число слотов

        Returns:
            Список ожидаемых отсчётов
        """
        if slot_period <= 0 or n_slots < 0:
            raise InvalidParameterError("Длительность слота должна быть > 0, число слотов >= 0")

        boundaries = [self.superpose_capture(schedule, params, k * slot_period) for k in range(n_slots + 1)]
        return [float(v) for v in np.diff(boundaries)]

    def capture_time_envelope(
        self,
        diffusivity_range: Tuple[float, float],
        distance_range: Tuple[float, float],
        p_target: float = DEFAULT_SPREAD_HI,
    ) -> List[Dict[str, Any]]:
        """Время захвата доли p_target в углах диапазонов D и x"""
        rows = []
        for diffusivity, distance in product(diffusivity_range, distance_range):
            params = ChannelParams(diffusivity=diffusivity, distance=distance)
            rows.append({
                "diffusivity_m2_s": diffusivity,
                "distance_m": distance,
                "p_target": p_target,
                "time_s": self.time_to_capture(params, p_target),
            })
        return rows

    @staticmethod
    def _require_pure_diffusion(params: ChannelParams) -> None:
        if params.has_drift:
            raise DriftNotSupportedError(
                "Замкнутая формула захвата определена только без дрейфа; используйте Монте-Карло"
            )


# Глобальный экземпляр сервиса
physics_service = PhysicsService()
