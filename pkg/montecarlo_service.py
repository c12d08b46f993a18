"""
Сервис моделирования случайного блуждания частиц методом Монте-Карло
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Sequence, Tuple

import numpy as np

from models import AbsorptionRecord, EmissionSchedule, InvalidParameterError, WalkConfig

logger = logging.getLogger(__name__)

# Частицы моделируются блоками фиксированного размера, у каждого блока свой генератор
BLOCK_SIZE = 16_384

# Допуск при сравнении моментов с границами шагов и слотов
_EDGE_TOL = 1e-9

# Блок частиц: ключ сида, число частиц, горизонт
_BlockUnit = Tuple[Tuple[int, ...], int, float]


def _count_steps(horizon: float, dt: float) -> int:
    return max(1, int(math.ceil(horizon / dt - _EDGE_TOL)))


class MonteCarloService:
    """Независимый оракул вероятности захвата и шумный канал для прогонов связи"""

    def simulate_walk(self, cfg: WalkConfig) -> AbsorptionRecord:
        """
        Моделирование блуждания n_particles частиц из точки 0 до поглощения в x

        Шаг Эйлера–Маруямы: гауссово приращение со средним v·dt и дисперсией
        2·D·dt; частица поглощается, как только её положение >= x.

        Args:
            cfg: Конфигурация блуждания

        Returns:
            Моменты поглощения и число частиц, не поглощённых к t_max
        """
        self._check_step(cfg)
        record = self._simulate(cfg, cfg.n_particles, cfg.t_max, spawn_prefix=())
        logger.debug(
            f"Блуждание: {record.n_absorbed}/{cfg.n_particles} поглощено к t={cfg.t_max:.4g} с "
            f"(seed={cfg.seed}, shards={cfg.shards})"
        )
        return record

    def empirical_capture_curve(self, cfg: WalkConfig, sample_times: Sequence[float]) -> List[float]:
        """Доля частиц, поглощённых к каждому из моментов sample_times"""
        times = np.asarray(sample_times, dtype=np.float64)
        if times.size and (np.any(np.diff(times) <= 0) or times[0] < 0 or times[-1] > cfg.t_max):
            raise InvalidParameterError("Моменты выборки должны возрастать и лежать в [0, t_max]")

        record = self.simulate_walk(cfg)
        absorbed = np.searchsorted(record.absorption_times, times, side="right")
        return [float(v) for v in absorbed / cfg.n_particles]

    def empirical_delay_spread(self, cfg: WalkConfig, lo: float = 0.1, hi: float = 0.9) -> float:
        """
        Разброс задержки по квантилям моментов поглощения одиночного импульса

        Returns:
            t(hi) - t(lo) или inf, если к t_max поглощено меньше доли hi
        """
        if not 0 < lo < hi < 1:
            raise InvalidParameterError(f"Нужно 0 < lo < hi < 1, получено lo={lo}, hi={hi}")

        record = self.simulate_walk(cfg)
        if record.absorbed_fraction < hi:
            return math.inf

        times = record.absorption_times

        def quantile(q: float) -> float:
            return float(times[int(math.ceil(q * cfg.n_particles)) - 1])

        return quantile(hi) - quantile(lo)

    def slot_capture_counts(self, schedule: EmissionSchedule, cfg: WalkConfig, slot_period: float) -> List[int]:
        """
        Число поглощений в каждом слоте приёмника

        Каждый выброс моделируется своей группой частиц, сдвинутой на момент
        выброса. Поглощение в момент t попадает в слот k, для которого
        k·T < t <= (k+1)·T: моменты фиксируются на конце шага. Шарды делят
        между собой блоки всех выбросов сразу.

        Args:
            schedule: Расписание выбросов
            cfg: Конфигурация блуждания (n_particles не используется)
            slot_period: Длительность слота, с

        Returns:
            Отсчёты по слотам, покрывающим [0, t_max]
        """
        if not math.isfinite(slot_period) or slot_period <= 0:
            raise InvalidParameterError(f"Длительность слота должна быть > 0, получено {slot_period}")
        self._check_step(cfg)

        n_slots = _count_steps(cfg.t_max, slot_period)
        counts = np.zeros(n_slots, dtype=np.int64)

        units: List[_BlockUnit] = []
        offsets: List[float] = []
        for index, (event_time, count) in enumerate(schedule.events):
            event_units = self._block_units(count, cfg.t_max - event_time, spawn_prefix=(index,))
            units.extend(event_units)
            offsets.extend([event_time] * len(event_units))

        escaped = 0
        for event_time, (times, block_escaped) in zip(offsets, self._run_units(cfg, units)):
            escaped += block_escaped
            if times.size == 0:
                continue
            slots = np.ceil((event_time + times) / slot_period - _EDGE_TOL) - 1
            slots = np.clip(slots, 0, n_slots - 1).astype(np.int64)
            counts += np.bincount(slots, minlength=n_slots)

        logger.debug(f"Слоты: поймано {int(counts.sum())} из {schedule.total_molecules}, ушло {escaped}")
        return [int(v) for v in counts]

    # ================ ВНУТРЕННЕЕ ================

    @staticmethod
    def _check_step(cfg: WalkConfig) -> None:
        """Предупреждение о шаге крупнее x²/(100·D); с поправкой моста только в debug"""
        if cfg.is_fine:
            return

        message = (
            f"Шаг dt={cfg.dt:.3g} с крупнее x²/(100·D)={cfg.max_fine_dt:.3g} с: "
            "частица может перескочить приёмник за один шаг"
        )
        if cfg.bridge_correction:
            logger.debug(message + " (компенсируется поправкой броуновского моста)")
        else:
            logger.warning(f"⚠️ {message}")

    @staticmethod
    def _block_units(n_particles: int, horizon: float, spawn_prefix: Tuple[int, ...]) -> List[_BlockUnit]:
        """Разбиение группы частиц на блоки; ключ сида блока = (*spawn_prefix, номер блока)"""
        if n_particles == 0 or horizon <= 0:
            return []

        n_blocks = int(math.ceil(n_particles / BLOCK_SIZE))
        return [
            ((*spawn_prefix, block), min(BLOCK_SIZE, n_particles - block * BLOCK_SIZE), horizon)
            for block in range(n_blocks)
        ]

    def _simulate(
        self,
        cfg: WalkConfig,
        n_particles: int,
        horizon: float,
        spawn_prefix: Tuple[int, ...],
    ) -> AbsorptionRecord:
        """Блуждание n_particles частиц на горизонте horizon"""
        units = self._block_units(n_particles, horizon, spawn_prefix)
        if not units:
            return AbsorptionRecord(np.empty(0), n_particles)

        blocks = self._run_units(cfg, units)
        times = np.concatenate([block_times for block_times, _ in blocks])
        escaped = sum(block_escaped for _, block_escaped in blocks)
        return AbsorptionRecord(times, escaped)

    def _run_units(self, cfg: WalkConfig, units: List[_BlockUnit]) -> List[Tuple[np.ndarray, int]]:
        """
        Прогон блоков на cfg.shards потоках

        Шард получает непрерывный отрезок списка блоков, результаты
        возвращаются в исходном порядке, поэтому от числа шардов не зависят.
        """
        def run_shard(shard_units: List[_BlockUnit]) -> List[Tuple[np.ndarray, int]]:
            results = []
            for spawn_key, size, horizon in shard_units:
                rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=spawn_key))
                results.append(self._walk_block(cfg, size, horizon, rng))
            return results

        n_shards = min(cfg.shards, len(units))
        if n_shards <= 1:
            return run_shard(units)

        groups = [units[ids[0]:ids[-1] + 1] for ids in np.array_split(np.arange(len(units)), n_shards)]
        with ThreadPoolExecutor(max_workers=n_shards) as executor:
            shard_results = list(executor.map(run_shard, groups))
        return [result for shard in shard_results for result in shard]

    @staticmethod
    def _walk_block(
        cfg: WalkConfig,
        n_particles: int,
        horizon: float,
        rng: np.random.Generator,
    ) -> Tuple[np.ndarray, int]:
        params = cfg.params
        x = params.distance
        dt = cfg.dt

        # Приёмник в источнике: все частицы поглощаются на первой границе шага
        if x == 0:
            return np.full(n_particles, min(dt, horizon)), 0

        diffusivity = params.diffusivity
        drift = params.drift_velocity
        positions = np.zeros(n_particles)
        absorbed: List[np.ndarray] = []

        for k in range(_count_steps(horizon, dt)):
            if positions.size == 0:
                break

            t_start = k * dt
            t_end = min(t_start + dt, horizon)
            h = t_end - t_start

            moved = positions + rng.normal(drift * h, math.sqrt(2.0 * diffusivity * h), size=positions.size)
            crossed = moved >= x
            hit_times = np.full(positions.size, t_end)

            if cfg.interpolate_crossing:
                span = moved[crossed] - positions[crossed]
                hit_times[crossed] = t_start + h * (x - positions[crossed]) / span

            if cfg.bridge_correction:
                # Вероятность того, что броуновский мост между концами шага коснулся x
                uniform = rng.random(positions.size)
                gaps = np.clip((x - positions) * (x - moved), 0.0, None)
                crossed |= uniform < np.exp(-gaps / (diffusivity * h))

            if crossed.any():
                absorbed.append(hit_times[crossed])
            positions = moved[~crossed]

        times = np.concatenate(absorbed) if absorbed else np.empty(0)
        return times, int(positions.size)


# Глобальный экземпляр сервиса
montecarlo_service = MonteCarloService()
