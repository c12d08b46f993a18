"""
Сервис записи отчётов, трасс и таблиц в JSON/CSV
"""
import csv
import io
import json
import logging
import os
from typing import Any, Dict, List, Sequence

import aiofiles

from models import SweepRow

logger = logging.getLogger(__name__)

SLOT_COUNTS_HEADER = ["slot_index", "t_start_s", "count"]
SWEEP_HEADER = ["guard_multiplier", "bit_period_s", "mean_ber", "std_ber", "n_seeds"]


def format_value(value: Any) -> str:
    """Фиксированное представление ячейки: 9 значащих цифр для вещественных"""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".9g")
    if value is None:
        return ""
    return str(value)


class ReportWriter:
    """Запись результатов экспериментов с байт-стабильным форматированием"""

    def render_csv(self, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
        return buffer.getvalue()

    def render_json(self, data: Any) -> str:
        return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    async def _write_text(self, path: str, content: str) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)

        # newline="" сохраняет '\n' на любой платформе
        async with aiofiles.open(path, "w", encoding="utf-8", newline="") as f:
            await f.write(content)

        logger.info(f"✅ Записан файл {path}")
        return path

    async def write_json(self, path: str, data: Any) -> str:
        return await self._write_text(path, self.render_json(data))

    async def write_csv(self, path: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
        return await self._write_text(path, self.render_csv(header, rows))

    async def write_slot_counts(self, path: str, counts: Sequence[float], slot_period: float) -> str:
        """
        Трасса приёмника: номер слота, начало слота и отсчёт

        Args:
            path: Путь к CSV
            counts: Отсчёты по слотам
            slot_period: Длительность слота, с
        """
        rows = [(k, k * slot_period, count) for k, count in enumerate(counts)]
        return await self.write_csv(path, SLOT_COUNTS_HEADER, rows)

    async def write_sweep(self, path: str, rows: Sequence[SweepRow]) -> str:
        data = [
            (row.guard_multiplier, row.bit_period_s, row.mean_ber, row.std_ber, row.n_seeds)
            for row in rows
        ]
        return await self.write_csv(path, SWEEP_HEADER, data)

    async def write_table(self, path_stem: str, rows: List[Dict[str, Any]], output_format: str) -> str:
        """Таблица словарей в CSV (заголовок по ключам первой строки) или JSON"""
        if output_format == "json":
            return await self.write_json(f"{path_stem}.json", rows)

        header = list(rows[0]) if rows else []
        return await self.write_csv(f"{path_stem}.csv", header, [[row.get(k) for k in header] for row in rows])


# Глобальный экземпляр сервиса
report_writer = ReportWriter()
