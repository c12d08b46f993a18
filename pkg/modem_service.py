"""
Кодек текст↔биты, OOK-модуляция импульсами молекул и пороговое обнаружение
"""
import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from models import (
    BitFrame,
    ChannelParams,
    DEFAULT_PREAMBLE,
    DriftNotSupportedError,
    EmissionSchedule,
    FramingError,
    InvalidParameterError,
    ModulationConfig,
    SyncError,
    ThresholdPolicy,
)
from physics_service import physics_service

logger = logging.getLogger(__name__)


class ModemService:
    """Программный двойник цепочки передатчик → приёмник тестового стенда"""

    def encode_text(self, text: Union[bytes, str], preamble: Sequence[int] = DEFAULT_PREAMBLE) -> BitFrame:
        """
        Преобразование байтов текста в кадр: преамбула, затем байты старшим битом вперёд

        Args:
            text: Байты сообщения или строка UTF-8 (непустые)
            preamble: Преамбула кадра

        Returns:
            Кадр битов
        """
        if isinstance(text, str):
            text = text.encode("utf-8")
        if not text:
            raise InvalidParameterError("Нельзя передать пустой текст")

        payload = np.unpackbits(np.frombuffer(bytes(text), dtype=np.uint8))
        return BitFrame(bits=tuple(preamble) + tuple(int(b) for b in payload), preamble=tuple(preamble))

    def decode_bits(self, frame: BitFrame) -> bytes:
        """
        Снятие преамбулы и упаковка групп по 8 бит в байты

        Raises:
            SyncError: преамбула не совпала
            FramingError: число бит полезной нагрузки не кратно 8
        """
        preamble = frame.preamble
        if len(frame.bits) < len(preamble) or frame.bits[:len(preamble)] != preamble:
            raise SyncError("Преамбула кадра не совпала")

        payload = frame.payload_bits
        if len(payload) % 8:
            raise FramingError(f"Длина полезной нагрузки {len(payload)} бит не кратна 8")

        return self.pack_bytes(payload)

    @staticmethod
    def pack_bytes(bits: Sequence[int]) -> bytes:
        """Упаковка полных байтов старшим битом вперёд; неполный хвост отбрасывается"""
        usable = len(bits) - len(bits) % 8
        return np.packbits(np.asarray(bits[:usable], dtype=np.uint8)).tobytes()

    def modulate(self, frame: BitFrame, mc: ModulationConfig) -> EmissionSchedule:
        """Бит k = 1 даёт выброс molecules_per_pulse молекул в момент k·T, бит 0 означает тишину"""
        events = tuple(
            (k * mc.bit_period, mc.molecules_per_pulse)
            for k, bit in enumerate(frame.bits)
            if bit == 1
        )
        return EmissionSchedule(events=events)

    def detection_threshold(
        self,
        slot_counts: Sequence[float],
        mc: ModulationConfig,
        params: Optional[ChannelParams] = None,
    ) -> float:
        """
        Порог обнаружения единицы в слоте

        Фиксированная политика: α · N · P(T), ожидаемый захват одиночного
        импульса в его собственном слоте. Калиброванная: середина между
        средними отсчётами слотов-единиц и слотов-нулей преамбулы.
        """
        if mc.threshold_policy == ThresholdPolicy.CALIBRATED:
            pilot = np.asarray(slot_counts[:len(mc.preamble)], dtype=np.float64)
            pattern = np.asarray(mc.preamble)
            return float((pilot[pattern == 1].mean() + pilot[pattern == 0].mean()) / 2.0)

        if params is None:
            raise InvalidParameterError("Фиксированный порог требует параметров канала")
        if params.has_drift:
            raise DriftNotSupportedError("Фиксированный порог не определён при дрейфе; используйте калиброванный")

        first_slot = physics_service.capture_probability(params, mc.bit_period)
        return mc.threshold_alpha * mc.molecules_per_pulse * first_slot

    def demodulate(
        self,
        slot_counts: Sequence[float],
        mc: ModulationConfig,
        expected_bits: int,
        params: Optional[ChannelParams] = None,
    ) -> BitFrame:
        """
        Пороговое решение по слотам: бит 1, если отсчёт >= порога (равенство даёт 1)

        Args:
            slot_counts: Отсчёты приёмника по слотам
            mc: Параметры модуляции
            expected_bits: Ожидаемая длина кадра
            params: Параметры канала (нужны фиксированной политике)

        Returns:
            Принятый кадр
        """
        if len(slot_counts) < expected_bits:
            raise FramingError(f"Слотов {len(slot_counts)} меньше ожидаемых бит {expected_bits}")

        threshold = self.detection_threshold(slot_counts, mc, params)
        counts = np.asarray(slot_counts[:expected_bits], dtype=np.float64)
        bits: Tuple[int, ...] = tuple(int(b) for b in counts >= threshold)

        logger.debug(f"Порог обнаружения {threshold:.4g} ({mc.threshold_policy})")
        return BitFrame(bits=bits, preamble=mc.preamble)


# Глобальный экземпляр сервиса
modem_service = ModemService()
