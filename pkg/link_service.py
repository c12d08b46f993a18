"""
Сервис сквозных прогонов канала: передача текста, BER, разброс задержки, пропускная способность и ёмкость
"""
import asyncio
import dataclasses
import logging
import math
from typing import Dict, Any, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import entr

from models import (
    BitFrame,
    ChannelParams,
    FramingError,
    InvalidParameterError,
    LinkReport,
    ModulationConfig,
    MultiLinkReport,
    RateModel,
    SweepRow,
    SyncError,
    WalkConfig,
)
from modem_service import modem_service
from montecarlo_service import montecarlo_service
from physics_service import physics_service

logger = logging.getLogger(__name__)

DEFAULT_TAIL_MULTIPLIER = 5.0
DEFAULT_STEPS_PER_SLOT = 20
DEFAULT_MAX_CONCURRENCY = 4

# Пилотный прогон для оценки разброса задержки при дрейфе
PILOT_PARTICLES = 2_000


class LinkService:
    """Сквозной прогон: кодер → модулятор → канал → приёмник → декодер"""

    # ================ СКОРОСТЬ И ЁМКОСТЬ ================

    def data_rate(self, rm: RateModel) -> float:
        """Скорость R = B × C, бит/с"""
        return rm.bandwidth_resource * rm.capacity_per_resource

    @staticmethod
    def binary_entropy(p: float) -> float:
        """H₂(p) в битах, 0·log 0 = 0"""
        return float((entr(p) + entr(1.0 - p)) / math.log(2.0))

    def capacity_estimate(self, ber: float, bit_period: float) -> float:
        """
        Оценка ёмкости как у двоичного симметричного канала с вероятностью ошибки ber

        Args:
            ber: Измеренная вероятность битовой ошибки; ber > 0.5 сворачивается в 1 - ber
            bit_period: Длительность бита, с

        Returns:
            (1 - H₂(ber)) / T, бит/с
        """
        if not 0 <= ber <= 1:
            raise InvalidParameterError(f"BER должен лежать в [0, 1], получено {ber}")
        if not math.isfinite(bit_period) or bit_period <= 0:
            raise InvalidParameterError(f"Длительность бита должна быть > 0, получено {bit_period}")

        crossover = min(ber, 1.0 - ber)
        return max(0.0, 1.0 - self.binary_entropy(crossover)) / bit_period

    # ================ КОНФИГУРАЦИЯ ПРОГОНА ================

    def reference_delay_spread(
        self,
        params: ChannelParams,
        dt: Optional[float] = None,
        horizon: Optional[float] = None,
        seed: int = 0,
    ) -> float:
        """
        Разброс задержки 10%→90% для канала

        Без дрейфа замкнутая формула, при дрейфе пилотный прогон
        Монте-Карло с шагом dt на горизонте horizon.
        """
        if params.distance == 0:
            return 0.0
        if not params.has_drift:
            return physics_service.delay_spread(params)

        if dt is None or horizon is None:
            raise InvalidParameterError("Оценка разброса при дрейфе требует шага и горизонта пилотного прогона")

        pilot = WalkConfig(
            params=params,
            n_particles=PILOT_PARTICLES,
            dt=dt,
            t_max=horizon,
            seed=seed,
            bridge_correction=True,
        )
        spread = montecarlo_service.empirical_delay_spread(pilot)
        if math.isinf(spread):
            raise InvalidParameterError(
                f"За {horizon:.4g} с приёмник не получает 90% импульса: разброс задержки не определён"
            )
        logger.info(f"📊 Разброс задержки по пилотному прогону: {spread:.4g} с")
        return spread

    def build_walk_config(
        self,
        params: ChannelParams,
        mc: ModulationConfig,
        n_bits: int,
        seed: int = 0,
        steps_per_slot: float = DEFAULT_STEPS_PER_SLOT,
        tail_multiplier: float = DEFAULT_TAIL_MULTIPLIER,
        shards: int = 1,
        bridge_correction: bool = True,
        interpolate_crossing: bool = False,
        delay_spread: Optional[float] = None,
    ) -> WalkConfig:
        """
        Конфигурация блуждания для передачи кадра из n_bits бит

        Шаг dt = T / steps_per_slot, горизонт t_max = n_bits·T + хвост,
        хвост = tail_multiplier × разброс задержки.
        """
        if n_bits < 1 or steps_per_slot <= 0 or tail_multiplier < 0:
            raise InvalidParameterError("Нужно n_bits >= 1, steps_per_slot > 0, tail_multiplier >= 0")

        dt = mc.bit_period / steps_per_slot
        airtime = n_bits * mc.bit_period
        if delay_spread is None:
            delay_spread = self.reference_delay_spread(params, dt=dt, horizon=airtime, seed=seed)

        return WalkConfig(
            params=params,
            n_particles=mc.molecules_per_pulse,
            dt=dt,
            t_max=airtime + tail_multiplier * delay_spread + dt,
            seed=seed,
            shards=shards,
            bridge_correction=bridge_correction,
            interpolate_crossing=interpolate_crossing,
        )

    # ================ ПРОГОНЫ ================

    def run_link(
        self,
        text: bytes,
        params: ChannelParams,
        mc: ModulationConfig,
        wc: WalkConfig,
        noiseless: bool = False,
        tail_multiplier: float = DEFAULT_TAIL_MULTIPLIER,
        delay_spread: Optional[float] = None,
    ) -> LinkReport:
        """
        Передача текста через канал и подсчёт всех показателей отчёта

        Args:
            text: Байты сообщения
            params: Параметры канала
            mc: Параметры модуляции
            wc: Конфигурация блуждания (сид, шаг, горизонт)
            noiseless: Канал ожидаемых значений вместо Монте-Карло
            tail_multiplier: Хвост после последнего бита в разбросах задержки
            delay_spread: Заранее известный разброс задержки

        Returns:
            Отчёт о прогоне
        """
        report, _ = self._transmit(text, params, mc, wc, noiseless, tail_multiplier, delay_spread)
        return report

    async def ber_sweep(
        self,
        text: bytes,
        params: ChannelParams,
        mc: ModulationConfig,
        wc: WalkConfig,
        guard_multipliers: Sequence[float],
        n_seeds: int,
        noiseless: bool = False,
        tail_multiplier: float = DEFAULT_TAIL_MULTIPLIER,
        max_concurrency: int = DEFAULT_MAX_CONCURRENCY,
    ) -> List[SweepRow]:
        """
        BER в зависимости от защитного интервала T = множитель × разброс задержки

        Каждая ячейка (множитель, сид) считается отдельным run_link; сиды wc.seed + i.
        Отношение T / dt базовой конфигурации сохраняется для всех множителей.

        Returns:
            Строки по возрастанию множителя
        """
        if not guard_multipliers or any(not math.isfinite(m) or m <= 0 for m in guard_multipliers):
            raise InvalidParameterError("Множители защитного интервала должны быть положительными")
        if n_seeds < 1:
            raise InvalidParameterError("Число сидов должно быть >= 1")

        n_bits = len(modem_service.encode_text(text, mc.preamble))
        steps_per_slot = self._steps_per_slot(mc, wc)
        spread = self.reference_delay_spread(params, dt=wc.dt, horizon=wc.t_max, seed=wc.seed)
        if spread <= 0:
            raise InvalidParameterError("Разброс задержки равен нулю: защитный интервал не масштабируется")

        multipliers = sorted(set(float(m) for m in guard_multipliers))
        semaphore = asyncio.Semaphore(max_concurrency)

        async def run_cell(multiplier: float, seed_index: int) -> Tuple[Tuple[float, int], float]:
            cell_mc = mc.with_bit_period(multiplier * spread)
            cell_wc = self.build_walk_config(
                params,
                cell_mc,
                n_bits,
                seed=(wc.seed + seed_index) % 2 ** 64,
                steps_per_slot=steps_per_slot,
                tail_multiplier=tail_multiplier,
                shards=wc.shards,
                bridge_correction=wc.bridge_correction,
                interpolate_crossing=wc.interpolate_crossing,
                delay_spread=spread,
            )
            async with semaphore:
                report = await asyncio.to_thread(
                    self.run_link, text, params, cell_mc, cell_wc, noiseless, tail_multiplier, spread
                )
            return (multiplier, seed_index), report.ber

        cells = await asyncio.gather(*(
            run_cell(multiplier, seed_index)
            for multiplier in multipliers
            for seed_index in range(n_seeds)
        ))
        results: Dict[Tuple[float, int], float] = dict(cells)

        rows = []
        for multiplier in multipliers:
            bers = np.array([results[(multiplier, i)] for i in range(n_seeds)])
            rows.append(SweepRow(
                guard_multiplier=multiplier,
                bit_period_s=multiplier * spread,
                mean_ber=float(bers.mean()),
                std_ber=float(bers.std()),
                n_seeds=n_seeds,
            ))
            logger.info(f"📊 Множитель {multiplier:g}: средний BER {rows[-1].mean_ber:.4g}")

        return rows

    async def run_multichannel(
        self,
        text: bytes,
        params: ChannelParams,
        mc: ModulationConfig,
        wc: WalkConfig,
        n_types: int,
        noiseless: bool = False,
        tail_multiplier: float = DEFAULT_TAIL_MULTIPLIER,
    ) -> MultiLinkReport:
        """
        Параллельные независимые каналы, по одному на тип молекул

        Байты сообщения раскладываются по типам по кругу; тип j получает сид
        wc.seed + j. Суммарная оценка ёмкости: R = B × C при B = n_types.
        """
        text = self._as_bytes(text)
        if n_types < 1:
            raise InvalidParameterError("Число типов молекул должно быть >= 1")
        if len(text) < n_types:
            raise InvalidParameterError(f"Сообщение из {len(text)} байт нельзя разложить на {n_types} типов")

        steps_per_slot = self._steps_per_slot(mc, wc)
        spread = self.reference_delay_spread(params, dt=wc.dt, horizon=wc.t_max, seed=wc.seed)

        async def run_type(index: int) -> Tuple[LinkReport, Optional[bytes]]:
            chunk = text[index::n_types]
            n_bits = len(mc.preamble) + 8 * len(chunk)
            type_wc = self.build_walk_config(
                params,
                mc,
                n_bits,
                seed=(wc.seed + index) % 2 ** 64,
                steps_per_slot=steps_per_slot,
                tail_multiplier=tail_multiplier,
                shards=wc.shards,
                bridge_correction=wc.bridge_correction,
                interpolate_crossing=wc.interpolate_crossing,
                delay_spread=spread,
            )
            return await asyncio.to_thread(
                self._transmit, chunk, params, mc, type_wc, noiseless, tail_multiplier, spread
            )

        outcomes = await asyncio.gather(*(run_type(j) for j in range(n_types)))
        reports = tuple(report for report, _ in outcomes)
        chunks = [payload for _, payload in outcomes]

        recovered_text = None
        if all(chunk is not None for chunk in chunks):
            merged = bytearray(len(text))
            for j, chunk in enumerate(chunks):
                merged[j::n_types] = chunk
            recovered_text = bytes(merged).decode("utf-8", errors="replace")

        mean_capacity = float(np.mean([r.capacity_estimate_bps for r in reports]))
        return MultiLinkReport(
            per_type=reports,
            aggregate_throughput_bps=float(sum(r.throughput_bps for r in reports)),
            aggregate_capacity_bps=self.data_rate(RateModel(n_types, mean_capacity)),
            recovered_text=recovered_text,
        )

    # ================ ВНУТРЕННЕЕ ================

    @staticmethod
    def _steps_per_slot(mc: ModulationConfig, wc: WalkConfig) -> float:
        return round(mc.bit_period / wc.dt, 9)

    @staticmethod
    def _as_bytes(text: Any) -> bytes:
        return text.encode("utf-8") if isinstance(text, str) else bytes(text)

    def _transmit(
        self,
        text: bytes,
        params: ChannelParams,
        mc: ModulationConfig,
        wc: WalkConfig,
        noiseless: bool,
        tail_multiplier: float,
        delay_spread: Optional[float],
    ) -> Tuple[LinkReport, Optional[bytes]]:
        text = self._as_bytes(text)
        frame = modem_service.encode_text(text, mc.preamble)
        schedule = modem_service.modulate(frame, mc)

        n_bits = len(frame)
        airtime = n_bits * mc.bit_period
        if delay_spread is None:
            delay_spread = self.reference_delay_spread(params, dt=wc.dt, horizon=airtime, seed=wc.seed)
        tail = tail_multiplier * delay_spread

        if wc.t_max < (airtime + tail) * (1 - 1e-9):
            raise InvalidParameterError(
                f"Горизонт t_max={wc.t_max:.4g} с меньше времени кадра с хвостом {airtime + tail:.4g} с"
            )

        n_slots = int(math.ceil(wc.t_max / mc.bit_period - 1e-9))
        if noiseless:
            counts = physics_service.expected_slot_counts(schedule, params, mc.bit_period, n_slots)
        else:
            counts = montecarlo_service.slot_capture_counts(
                schedule, dataclasses.replace(wc, params=params), mc.bit_period
            )

        received = modem_service.demodulate(counts, mc, n_bits, params)
        bit_errors = sum(a != b for a, b in zip(frame.bits, received.bits))
        raw_payload = modem_service.pack_bytes(received.payload_bits)
        char_errors = sum(a != b for a, b in zip(text, raw_payload))

        recovered, sync_error, framing_error = self._decode(received)
        ber = bit_errors / n_bits

        report = LinkReport(
            bits_sent=n_bits,
            bit_errors=bit_errors,
            ber=ber,
            char_errors=char_errors,
            delay_spread_s=delay_spread,
            throughput_bps=8 * len(text) / (airtime + tail),
            capacity_estimate_bps=self.capacity_estimate(ber, mc.bit_period),
            seed=wc.seed,
            config=self._config_echo(params, mc, wc, tail_multiplier),
            recovered_text=recovered.decode("utf-8", errors="replace") if recovered is not None else None,
            sync_error=sync_error,
            framing_error=framing_error,
            noiseless=noiseless,
            slot_counts=tuple(counts),
        )

        logger.info(
            f"✅ Кадр {n_bits} бит: ошибок {bit_errors} (BER {ber:.4g}), "
            f"ошибочных символов {char_errors}, T={mc.bit_period:.4g} с"
        )
        return report, recovered

    @staticmethod
    def _decode(received: BitFrame) -> Tuple[Optional[bytes], bool, bool]:
        try:
            return modem_service.decode_bits(received), False, False
        except SyncError:
            logger.warning("⚠️ Преамбула принятого кадра не совпала")
            return None, True, False
        except FramingError:
            logger.warning("⚠️ Ошибка кадрирования принятого кадра")
            return None, False, True

    @staticmethod
    def _config_echo(
        params: ChannelParams,
        mc: ModulationConfig,
        wc: WalkConfig,
        tail_multiplier: float,
    ) -> Dict[str, Any]:
        """Эхо конфигурации без полей исполнения: отчёт не зависит от числа шардов"""
        return {
            "channel": params.to_dict(),
            "modulation": mc.to_dict(),
            "walk": {
                "dt": wc.dt,
                "t_max": wc.t_max,
                "bridge_correction": wc.bridge_correction,
                "interpolate_crossing": wc.interpolate_crossing,
            },
            "tail_multiplier": tail_multiplier,
        }


# Глобальный экземпляр сервиса
link_service = LinkService()
