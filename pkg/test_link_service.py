"""
Тесты сквозного канала: скорость, ёмкость, прогоны, свипы и многоканальный режим
"""
import math
from concurrent.futures import ThreadPoolExecutor

import pytest

from models import (
    EM_REFERENCE_BANDWIDTH_HZ,
    EM_REFERENCE_SNR,
    EM_REFERENCE_SPECTRAL_EFFICIENCY,
    ChannelParams,
    InvalidParameterError,
    ModulationConfig,
    RateModel,
    ThresholdPolicy,
    WalkConfig,
)
from link_service import link_service
from physics_service import physics_service


def link_setup(params: ChannelParams, text: bytes, guard: float = 10.0, molecules: int = 10_000, seed: int = 7,
               shards: int = 1, policy: str = ThresholdPolicy.FIXED, bit_period: float = None):
    mc = ModulationConfig(
        bit_period=bit_period or guard * physics_service.delay_spread(params),
        molecules_per_pulse=molecules,
        threshold_policy=policy,
    )
    n_bits = len(mc.preamble) + 8 * len(text)
    wc = link_service.build_walk_config(params, mc, n_bits, seed=seed, shards=shards)
    return mc, wc


# ================ СКОРОСТЬ R = B × C ================

def test_data_rate_reference_radio():
    rm = RateModel(EM_REFERENCE_BANDWIDTH_HZ, EM_REFERENCE_SPECTRAL_EFFICIENCY, EM_REFERENCE_SNR)
    assert link_service.data_rate(rm) == 1e8


def test_data_rate_single_chemical_type():
    assert link_service.data_rate(RateModel(1, 0.3)) == pytest.approx(0.3)


def test_data_rate_is_bilinear():
    assert link_service.data_rate(RateModel(0, 5.0)) == 0
    assert link_service.data_rate(RateModel(3, 0.0)) == 0
    base = link_service.data_rate(RateModel(4, 0.25))
    assert link_service.data_rate(RateModel(8, 0.25)) == pytest.approx(2 * base)
    assert link_service.data_rate(RateModel(4, 0.75)) == pytest.approx(3 * base)


def test_channel_quality_is_metadata_only():
    assert link_service.data_rate(RateModel(2, 0.1, channel_quality=1000)) == link_service.data_rate(RateModel(2, 0.1))


@pytest.mark.parametrize("bandwidth, capacity", [(-1, 1), (1, -0.1), (math.nan, 1), (1, math.inf)])
def test_rate_model_rejects_bad_values(bandwidth, capacity):
    with pytest.raises(InvalidParameterError):
        RateModel(bandwidth, capacity)


# ================ ОЦЕНКА ЁМКОСТИ ================

def test_capacity_error_free():
    assert link_service.capacity_estimate(0.0, 1.0) == 1.0
    assert link_service.capacity_estimate(0.0, 4.0) == 0.25


def test_capacity_coin_flip():
    assert link_service.capacity_estimate(0.5, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_capacity_known_entropy():
    assert link_service.binary_entropy(0.11) == pytest.approx(0.49992, abs=1e-4)
    assert link_service.capacity_estimate(0.11, 1.0) == pytest.approx(0.5, abs=1e-3)


def test_capacity_folds_inverted_channel():
    assert link_service.capacity_estimate(0.9, 2.0) == pytest.approx(link_service.capacity_estimate(0.1, 2.0))


def test_capacity_monotone_and_bounded():
    values = [link_service.capacity_estimate(b, 3.0) for b in (0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5)]
    assert values == sorted(values, reverse=True)
    assert all(0 <= v <= 1 / 3.0 for v in values)


@pytest.mark.parametrize("ber, period", [(-0.1, 1.0), (1.1, 1.0), (0.1, 0.0), (0.1, math.inf)])
def test_capacity_rejects_bad_input(ber, period):
    with pytest.raises(InvalidParameterError):
        link_service.capacity_estimate(ber, period)


# ================ ПРОГОН КАНАЛА ================

def test_noiseless_presets_are_error_free(preset_channel):
    text = b"HELLO WORLD"
    mc, wc = link_setup(preset_channel, text)
    report = link_service.run_link(text, preset_channel, mc, wc, noiseless=True)

    assert report.ber == 0
    assert report.char_errors == 0
    assert report.recovered_text == "HELLO WORLD"
    assert report.noiseless
    assert report.bits_sent == 8 + 8 * len(text)
    assert report.capacity_estimate_bps == pytest.approx(1 / mc.bit_period)


def test_intracellular_link_without_isi(intracellular):
    text = b"HELLO"
    mc, wc = link_setup(intracellular, text)
    report = link_service.run_link(text, intracellular, mc, wc)

    assert report.ber == 0
    assert report.recovered_text == "HELLO"
    assert not report.sync_error and not report.framing_error
    assert report.delay_spread_s == pytest.approx(physics_service.delay_spread(intracellular))
    assert report.throughput_bps == pytest.approx(8 * len(text) / (report.bits_sent * mc.bit_period
                                                                    + 5 * report.delay_spread_s))


def test_run_link_is_deterministic(short_channel):
    text = b"Hi"
    mc, wc = link_setup(short_channel, text, guard=0.5, molecules=500, seed=3)
    first = link_service.run_link(text, short_channel, mc, wc)
    second = link_service.run_link(text, short_channel, mc, wc)
    assert first == second
    assert first.to_dict() == second.to_dict()


def test_shard_count_does_not_change_report(short_channel, mocker):
    pool = mocker.patch("montecarlo_service.ThreadPoolExecutor", wraps=ThreadPoolExecutor)
    text = b"Hi"
    mc, single = link_setup(short_channel, text, guard=0.5, molecules=500, seed=3, shards=1)
    _, sharded = link_setup(short_channel, text, guard=0.5, molecules=500, seed=3, shards=4)
    assert link_service.run_link(text, short_channel, mc, single) == link_service.run_link(
        text, short_channel, mc, sharded
    )
    assert pool.call_count == 1
    assert pool.call_args.kwargs["max_workers"] == 4


def test_report_accounting(short_channel):
    text = b"Hey"
    mc, wc = link_setup(short_channel, text, guard=0.25, molecules=200, seed=5)
    report = link_service.run_link(text, short_channel, mc, wc)

    assert report.bits_sent == 32
    assert 0 <= report.bit_errors <= report.bits_sent
    assert report.ber == pytest.approx(report.bit_errors / report.bits_sent)
    assert 0 <= report.char_errors <= len(text)
    assert report.seed == 5
    assert len(report.slot_counts) >= report.bits_sent
    assert "slot_counts" not in report.to_dict()
    assert "shards" not in str(report.config)


def test_short_horizon_is_rejected(short_channel):
    text = b"Hi"
    mc, wc = link_setup(short_channel, text)
    too_short = WalkConfig(params=short_channel, n_particles=wc.n_particles, dt=wc.dt, t_max=wc.t_max / 2)
    with pytest.raises(InvalidParameterError):
        link_service.run_link(text, short_channel, mc, too_short)


def test_sync_failure_is_reported(short_channel, mocker):
    text = b"Hi"
    mc, wc = link_setup(short_channel, text)
    mocker.patch(
        "link_service.montecarlo_service.slot_capture_counts",
        side_effect=lambda schedule, cfg, period: [0] * int(math.ceil(cfg.t_max / period - 1e-9)),
    )
    report = link_service.run_link(text, short_channel, mc, wc)

    assert report.sync_error
    assert report.recovered_text is None
    assert report.ber > 0


def test_drift_capacity_order_of_magnitude():
    params = ChannelParams(diffusivity=0.01, distance=1.0, drift_velocity=0.5)
    text = b"Hi"
    mc, wc = link_setup(params, text, molecules=1_000, policy=ThresholdPolicy.CALIBRATED, bit_period=5.0)
    report = link_service.run_link(text, params, mc, wc)

    assert 0.01 <= report.capacity_estimate_bps <= 1.0
    assert report.delay_spread_s > 0


def test_drift_requires_pilot_bounds():
    params = ChannelParams(diffusivity=0.01, distance=1.0, drift_velocity=0.5)
    with pytest.raises(InvalidParameterError):
        link_service.reference_delay_spread(params)


# ================ СВИП ЗАЩИТНОГО ИНТЕРВАЛА ================

@pytest.mark.asyncio
async def test_single_cell_sweep_matches_run_link(short_channel):
    text = b"Hi"
    mc, wc = link_setup(short_channel, text, guard=1.0, molecules=300, seed=4)
    rows = await link_service.ber_sweep(text, short_channel, mc, wc, [1.0], 1)
    report = link_service.run_link(text, short_channel, mc, wc)

    assert len(rows) == 1
    assert rows[0].mean_ber == report.ber
    assert rows[0].std_ber == 0
    assert rows[0].bit_period_s == pytest.approx(mc.bit_period)


@pytest.mark.asyncio
async def test_sweep_rows_are_sorted(short_channel):
    text = b"Hi"
    mc, wc = link_setup(short_channel, text, guard=1.0, molecules=100)
    rows = await link_service.ber_sweep(text, short_channel, mc, wc, [2.0, 0.5, 1.0], 2)

    assert [row.guard_multiplier for row in rows] == [0.5, 1.0, 2.0]
    assert all(row.n_seeds == 2 for row in rows)
    assert all(0 <= row.mean_ber <= 1 for row in rows)


@pytest.mark.asyncio
@pytest.mark.parametrize("multipliers, seeds", [([], 1), ([0.0], 1), ([-1.0], 1), ([1.0], 0)])
async def test_sweep_rejects_bad_grid(short_channel, multipliers, seeds):
    text = b"Hi"
    mc, wc = link_setup(short_channel, text, molecules=100)
    with pytest.raises(InvalidParameterError):
        await link_service.ber_sweep(text, short_channel, mc, wc, multipliers, seeds)


@pytest.mark.asyncio
async def test_wide_guard_is_error_free(short_channel):
    text = b"Hi"
    mc, wc = link_setup(short_channel, text)
    rows = await link_service.ber_sweep(text, short_channel, mc, wc, [10.0], 5)
    assert rows[0].mean_ber == 0


@pytest.mark.slow
@pytest.mark.asyncio
async def test_ber_falls_as_guard_widens(intracellular):
    text = b"HELLO WORLD"
    mc, wc = link_setup(intracellular, text, molecules=10)
    rows = await link_service.ber_sweep(text, intracellular, mc, wc, [0.25, 0.5, 1.0, 2.0, 4.0], 20)

    inversions = [
        (a, b) for a, b in zip(rows, rows[1:])
        if b.mean_ber > a.mean_ber
    ]
    assert len(inversions) <= 1
    assert all(b.mean_ber - a.mean_ber <= max(a.std_ber, b.std_ber) for a, b in inversions)
    assert rows[0].mean_ber > rows[-1].mean_ber


# ================ НЕСКОЛЬКО ТИПОВ МОЛЕКУЛ ================

@pytest.mark.asyncio
async def test_multichannel_noiseless(short_channel):
    text = b"HELLO"
    mc, wc = link_setup(short_channel, text)
    report = await link_service.run_multichannel(text, short_channel, mc, wc, 2, noiseless=True)

    assert report.n_types == 2
    assert report.recovered_text == "HELLO"
    assert report.aggregate_throughput_bps == pytest.approx(sum(r.throughput_bps for r in report.per_type))
    assert report.aggregate_capacity_bps == pytest.approx(2 / mc.bit_period)
    assert [r.seed for r in report.per_type] == [wc.seed, wc.seed + 1]


@pytest.mark.asyncio
async def test_multichannel_single_type_matches_run_link(short_channel):
    text = b"Hi"
    mc, wc = link_setup(short_channel, text, molecules=500)
    multi = await link_service.run_multichannel(text, short_channel, mc, wc, 1)
    assert multi.per_type[0] == link_service.run_link(text, short_channel, mc, wc)


@pytest.mark.asyncio
async def test_multichannel_rejects_too_many_types(short_channel):
    text = b"Hi"
    mc, wc = link_setup(short_channel, text)
    with pytest.raises(InvalidParameterError):
        await link_service.run_multichannel(text, short_channel, mc, wc, 3)
