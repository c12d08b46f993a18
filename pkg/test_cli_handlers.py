"""
Тесты команд CLI
"""
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor

import pytest
from click.testing import CliRunner

from cli_handlers import cli


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(autouse=True)
def restore_logging():
    """Команды перенастраивают корневой логгер на потоки CliRunner"""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def invoke(runner, args, **kwargs):
    return runner.invoke(cli, args, obj={}, catch_exceptions=False, **kwargs)


def read_bytes(path: str) -> bytes:
    with open(path, "rb") as f:
        return f.read()


# ================ SEND ================

def test_send_interorganism(runner):
    with runner.isolated_filesystem():
        result = invoke(runner, ["send", "--text", "HELLO", "--preset", "interorganism",
                                 "--guard-mult", "10", "--seed", "7"])

        assert result.exit_code == 0, result.output
        assert "recovered_text: HELLO" in result.output
        assert "ber: 0" in result.output
        with open(os.path.join("output", "report.json"), encoding="utf-8") as f:
            report = json.load(f)
        assert report["ber"] == 0
        assert report["seed"] == 7
        assert os.path.exists(os.path.join("output", "slot_counts.csv"))


def test_send_requires_text(runner):
    result = invoke(runner, ["send", "--preset", "intracellular"])
    assert result.exit_code == 2


def test_send_rejects_unknown_preset(runner):
    result = invoke(runner, ["send", "--text", "HI", "--preset", "mars"])
    assert result.exit_code == 2
    assert "intracellular" in result.output


def test_send_without_channel_is_usage_error(runner):
    with runner.isolated_filesystem():
        result = invoke(runner, ["send", "--text", "HI"])
    assert result.exit_code == 2


def test_send_with_drift_needs_bit_period(runner):
    with runner.isolated_filesystem():
        result = invoke(runner, ["send", "--text", "HI", "--diffusivity", "0.01", "--distance", "1",
                                 "--drift", "0.5"])
    assert result.exit_code == 2


def test_send_outputs_are_reproducible(runner, mocker):
    pool = mocker.patch("montecarlo_service.ThreadPoolExecutor", wraps=ThreadPoolExecutor)
    args = ["send", "--text", "Hi", "--diffusivity", "1", "--distance", "1",
            "--guard-mult", "0.5", "--molecules", "2000", "--seed", "5"]
    with runner.isolated_filesystem():
        assert invoke(runner, args + ["--output-dir", "a", "--shards", "1"]).exit_code == 0
        assert invoke(runner, args + ["--output-dir", "b", "--shards", "1"]).exit_code == 0
        assert not pool.called
        assert invoke(runner, args + ["--output-dir", "c", "--shards", "4"]).exit_code == 0
        assert pool.called
        assert all(call.kwargs["max_workers"] > 1 for call in pool.call_args_list)

        for name in ("report.json", "slot_counts.csv"):
            first = read_bytes(os.path.join("a", name))
            assert first == read_bytes(os.path.join("b", name))
            assert first == read_bytes(os.path.join("c", name))


def test_send_seed_from_environment(runner):
    args = ["send", "--text", "Hi", "--diffusivity", "1", "--distance", "1", "--noiseless"]
    with runner.isolated_filesystem():
        assert invoke(runner, args, env={"MOLDIFF_SEED": "13"}).exit_code == 0
        with open(os.path.join("output", "report.json"), encoding="utf-8") as f:
            assert json.load(f)["seed"] == 13

        assert invoke(runner, args + ["--seed", "2"], env={"MOLDIFF_SEED": "13"}).exit_code == 0
        with open(os.path.join("output", "report.json"), encoding="utf-8") as f:
            assert json.load(f)["seed"] == 2


def test_send_reads_config_file(runner):
    with runner.isolated_filesystem():
        with open("run.json", "w", encoding="utf-8") as f:
            json.dump({"preset": "intracellular", "seed": 21, "noiseless": True, "output_dir": "from_file"}, f)
        result = invoke(runner, ["--debug", "send", "--text", "OK", "--config", "run.json"])

        assert result.exit_code == 0, result.output
        with open(os.path.join("from_file", "report.json"), encoding="utf-8") as f:
            report = json.load(f)
        assert report["seed"] == 21
        assert report["noiseless"] is True


def test_send_missing_config_file(runner):
    with runner.isolated_filesystem():
        result = invoke(runner, ["send", "--text", "OK", "--config", "absent.json"])
    assert result.exit_code == 2


def test_send_multichannel(runner):
    with runner.isolated_filesystem():
        result = invoke(runner, ["send", "--text", "HELLO", "--preset", "intracellular", "--noiseless",
                                 "--molecule-types", "2"])

        assert result.exit_code == 0, result.output
        assert "recovered_text: HELLO" in result.output
        assert os.path.exists(os.path.join("output", "slot_counts_type0.csv"))
        assert os.path.exists(os.path.join("output", "slot_counts_type1.csv"))
        with open(os.path.join("output", "report.json"), encoding="utf-8") as f:
            assert json.load(f)["n_types"] == 2


# ================ CAPTURE-TIME ================

def test_capture_time_intracellular(runner):
    with runner.isolated_filesystem():
        result = invoke(runner, ["capture-time", "--preset", "intracellular", "--p", "0.9", "--seed", "1"])

        assert result.exit_code == 0, result.output
        assert "kind=channel" in result.output
        assert "within_3sigma=true" in result.output
        assert "kind=regime:intracellular" in result.output
        assert "kind=regime:interorganism" not in result.output
        assert os.path.exists(os.path.join("output", "capture_time.csv"))


def test_capture_time_is_reproducible(runner):
    args = ["capture-time", "--diffusivity", "1", "--distance", "2", "--check-particles", "2000", "--seed", "3"]
    with runner.isolated_filesystem():
        assert invoke(runner, args + ["--output-dir", "a", "--format", "json"]).exit_code == 0
        assert invoke(runner, args + ["--output-dir", "b", "--format", "json", "--shards", "2"]).exit_code == 0
        assert read_bytes(os.path.join("a", "capture_time.json")) == read_bytes(os.path.join("b", "capture_time.json"))


def test_capture_time_zero_distance(runner):
    with runner.isolated_filesystem():
        result = invoke(runner, ["capture-time", "--diffusivity", "1", "--distance", "0"])
    assert result.exit_code == 2


def test_capture_time_bad_target(runner):
    with runner.isolated_filesystem():
        result = invoke(runner, ["capture-time", "--preset", "interorganism", "--p", "1.5"])
    assert result.exit_code == 2


# ================ SWEEP ================

def test_sweep_writes_csv(runner):
    with runner.isolated_filesystem():
        result = invoke(runner, ["sweep", "--text", "Hi", "--diffusivity", "1", "--distance", "1",
                                 "--molecules", "200", "--multipliers", "0.5,2", "--seeds", "2"])

        assert result.exit_code == 0, result.output
        with open(os.path.join("output", "sweep.csv"), encoding="utf-8") as f:
            lines = f.read().splitlines()
        assert lines[0] == "guard_multiplier,bit_period_s,mean_ber,std_ber,n_seeds"
        assert len(lines) == 3
        assert lines[1].startswith("0.5,")
        assert lines[2].startswith("2,")


@pytest.mark.parametrize("multipliers", ["abc", "1,,x", "0,1", "-1", ""])
def test_sweep_rejects_bad_multipliers(runner, multipliers):
    with runner.isolated_filesystem():
        result = invoke(runner, ["sweep", "--text", "Hi", "--preset", "intracellular",
                                 "--multipliers", multipliers])
    assert result.exit_code == 2


# ================ RATE И REFERENCE ================

@pytest.mark.parametrize("bandwidth, capacity, expected", [
    ("20e6", "5", "R = 100000000 bits/s"),
    ("1", "0.3", "R = 0.3 bits/s"),
    ("0", "5", "R = 0 bits/s"),
])
def test_rate(runner, bandwidth, capacity, expected):
    result = invoke(runner, ["rate", bandwidth, capacity])
    assert result.exit_code == 0
    assert result.output.strip() == expected


def test_rate_ignores_quality(runner):
    result = invoke(runner, ["rate", "2", "0.1", "--quality", "1000"])
    assert result.output.strip() == "R = 0.2 bits/s"


def test_rate_rejects_negative(runner):
    result = invoke(runner, ["rate", "--", "-1", "5"])
    assert result.exit_code == 2


def test_rate_rejects_non_number(runner):
    result = invoke(runner, ["rate", "lots", "5"])
    assert result.exit_code == 2


def test_reference(runner):
    with runner.isolated_filesystem():
        result = invoke(runner, ["reference", "--output-dir", "out", "--format", "json"])

        assert result.exit_code == 0
        assert "Kinboshi" in result.output
        assert "capacity_per_type_survey_bps: 0.1" in result.output
        assert "capacity_per_type_testbed_peak_bps: 0.3" in result.output
        assert "em_reference_rate_bps: 100000000" in result.output
        with open(os.path.join("out", "reference.json"), encoding="utf-8") as f:
            assert json.load(f)[0]["chemical"] == "Kinboshi"


def test_sweep_outputs_are_reproducible(runner, mocker):
    pool = mocker.patch("montecarlo_service.ThreadPoolExecutor", wraps=ThreadPoolExecutor)
    args = ["sweep", "--text", "Hi", "--diffusivity", "1", "--distance", "1", "--molecules", "100",
            "--multipliers", "0.5,1", "--seeds", "3", "--seed", "8"]
    with runner.isolated_filesystem():
        assert invoke(runner, args + ["--output-dir", "a", "--shards", "1"]).exit_code == 0
        assert invoke(runner, args + ["--output-dir", "b", "--shards", "1"]).exit_code == 0
        assert not pool.called
        assert invoke(runner, args + ["--output-dir", "c", "--shards", "4"]).exit_code == 0
        assert pool.called
        assert all(call.kwargs["max_workers"] > 1 for call in pool.call_args_list)

        first = read_bytes(os.path.join("a", "sweep.csv"))
        assert first == read_bytes(os.path.join("b", "sweep.csv"))
        assert first == read_bytes(os.path.join("c", "sweep.csv"))
