"""
Тесты записи отчётов
"""
import json

import pytest

from models import SweepRow
from report_writer import SLOT_COUNTS_HEADER, format_value, report_writer


@pytest.mark.parametrize("value, expected", [
    (0.1 + 0.2, "0.3"),
    (1e8, "100000000"),
    (1.0 / 3.0, "0.333333333"),
    (2.5e-12, "2.5e-12"),
    (7, "7"),
    (True, "true"),
    (None, ""),
    ("text", "text"),
])
def test_format_value(value, expected):
    assert format_value(value) == expected


def test_render_csv_uses_unix_newlines():
    content = report_writer.render_csv(["a", "b"], [(1, 0.5), (2, None)])
    assert content == "a,b\n1,0.5\n2,\n"


def test_render_json_is_stable():
    first = report_writer.render_json({"b": 1, "a": [1, 2]})
    second = report_writer.render_json({"a": [1, 2], "b": 1})
    assert first == second
    assert first.endswith("}\n")


@pytest.mark.asyncio
async def test_write_slot_counts(tmp_path):
    path = await report_writer.write_slot_counts(str(tmp_path / "out" / "slot_counts.csv"), [5, 0, 12], 2.0)

    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = f.read().split("\n")
    assert lines[0] == ",".join(SLOT_COUNTS_HEADER)
    assert lines[1:] == ["0,0,5", "1,2,0", "2,4,12", ""]


@pytest.mark.asyncio
async def test_write_sweep(tmp_path):
    rows = [SweepRow(0.5, 15.7, 0.125, 0.05, 20), SweepRow(1.0, 31.4, 0.0, 0.0, 20)]
    path = await report_writer.write_sweep(str(tmp_path / "sweep.csv"), rows)

    with open(path, "r", encoding="utf-8") as f:
        content = f.read()
    assert content.splitlines()[0] == "guard_multiplier,bit_period_s,mean_ber,std_ber,n_seeds"
    assert content.splitlines()[1] == "0.5,15.7,0.125,0.05,20"


@pytest.mark.asyncio
async def test_write_table_json(tmp_path):
    rows = [{"name": "x", "value": 1.5}]
    path = await report_writer.write_table(str(tmp_path / "table"), rows, "json")

    assert path.endswith("table.json")
    with open(path, "r", encoding="utf-8") as f:
        assert json.load(f) == rows
