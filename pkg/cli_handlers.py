"""
Обработчики команд CLI симулятора молекулярного канала
"""
import asyncio
import functools
import logging
import math
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Tuple

import click

from config import (
    DEFAULT_CONFIG_PATH,
    REGIME_RANGES,
    SEED_ENV_VAR,
    Preset,
    RunConfig,
)
from link_service import link_service
from models import (
    CAPACITY_PER_TYPE_SURVEY_BPS,
    CAPACITY_PER_TYPE_TESTBED_PEAK_BPS,
    EM_REFERENCE_BANDWIDTH_HZ,
    EM_REFERENCE_SNR,
    EM_REFERENCE_SPECTRAL_EFFICIENCY,
    REFERENCE_SYSTEMS,
    ChannelParams,
    ModulationConfig,
    RateModel,
    ThresholdPolicy,
    WalkConfig,
)
from montecarlo_service import montecarlo_service
from physics_service import physics_service
from report_writer import format_value, report_writer

logger = logging.getLogger(__name__)

DEFAULT_MULTIPLIERS = "0.25,0.5,1,2,4"
DEFAULT_SWEEP_SEEDS = 20

# Проверка времени захвата: число шагов блуждания ограничено сверху
CHECK_MAX_STEPS = 2_000

CAPTURE_TIME_COLUMNS = [
    "kind", "diffusivity_m2_s", "distance_m", "p_target", "time_s",
    "mc_fraction", "mc_sigma", "within_3sigma", "claim",
]

# Флаг CLI → поле RunConfig
FLAG_FIELDS = {
    "preset": "preset",
    "diffusivity": "diffusivity",
    "diffusivity_unit": "diffusivity_unit",
    "distance": "distance",
    "distance_unit": "distance_unit",
    "drift": "drift_velocity",
    "drift_unit": "drift_unit",
    "guard_mult": "guard_multiplier",
    "bit_period": "bit_period_s",
    "molecules": "molecules_per_pulse",
    "preamble": "preamble",
    "threshold_policy": "threshold_policy",
    "alpha": "threshold_alpha",
    "seed": "seed",
    "shards": "shards",
    "steps_per_slot": "steps_per_slot",
    "tail_mult": "tail_multiplier",
    "bridge": "bridge_correction",
    "interpolate": "interpolate_crossing",
    "check_particles": "check_particles",
    "noiseless": "noiseless",
    "molecule_types": "molecule_types",
    "output_dir": "output_dir",
    "output_format": "output_format",
}


def _apply(options: List[Callable]) -> Callable:
    def decorator(func: Callable) -> Callable:
        for option in reversed(options):
            func = option(func)
        return func
    return decorator


CHANNEL_OPTIONS = [
    click.option("--config", "config_path", default=None, help=f"JSON-файл конфигурации (по умолчанию {DEFAULT_CONFIG_PATH}, если есть)"),
    click.option("--preset", type=click.Choice(Preset.ALL_PRESETS), default=None, help="Пресет канала"),
    click.option("--diffusivity", default=None, help="Коэффициент диффузии, например 100um2/s"),
    click.option("--diffusivity-unit", default=None, help="Единица D для чисел без суффикса"),
    click.option("--distance", default=None, help="Расстояние до приёмника, например 2m"),
    click.option("--distance-unit", default=None, help="Единица x для чисел без суффикса"),
    click.option("--drift", default=None, help="Скорость дрейфа, например 0.5m/s"),
    click.option("--drift-unit", default=None, help="Единица скорости для чисел без суффикса"),
]

MODULATION_OPTIONS = [
    click.option("--guard-mult", type=float, default=None, help="T = множитель × разброс задержки"),
    click.option("--bit-period", type=float, default=None, help="Явная длительность бита T, с"),
    click.option("--molecules", type=int, default=None, help="Молекул на импульс"),
    click.option("--preamble", default=None, help="Преамбула, например 10101010"),
    click.option("--threshold-policy", type=click.Choice(ThresholdPolicy.ALL_POLICIES), default=None),
    click.option("--alpha", type=float, default=None, help="Доля порога для фиксированной политики"),
]

WALK_OPTIONS = [
    click.option("--seed", type=int, default=None, envvar=SEED_ENV_VAR, help=f"Сид (или {SEED_ENV_VAR})"),
    click.option("--shards", type=int, default=None, help="Число параллельных шардов"),
    click.option("--steps-per-slot", type=int, default=None, help="Шагов блуждания на слот"),
    click.option("--tail-mult", type=float, default=None, help="Хвост после кадра в разбросах задержки"),
    click.option("--bridge/--no-bridge", default=None, help="Поправка броуновского моста"),
    click.option("--interpolate/--no-interpolate", default=None, help="Интерполяция момента пересечения"),
    click.option("--noiseless/--no-noiseless", default=None, help="Канал ожидаемых значений вместо Монте-Карло"),
]

OUTPUT_OPTIONS = [
    click.option("--output-dir", default=None, help="Каталог для файлов результата"),
    click.option("--format", "output_format", type=click.Choice(["csv", "json"]), default=None),
]


def _handle_errors(func: Callable) -> Callable:
    """Ошибки конфигурации → код 2, прочие сбои выполнения → код 1"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except click.ClickException:
            raise
        except ValueError as e:
            raise click.UsageError(str(e))
        except Exception as e:
            logger.error(f"❌ Ошибка выполнения: {e}")
            raise click.ClickException(str(e))
    return wrapper


def _configure_logging(debug: bool, log_file: Optional[str]) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))

    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


def _load_run_config(ctx: click.Context, config_path: Optional[str], flags: Dict[str, Any]) -> RunConfig:
    """Файл конфигурации, поверх него флаги; затем валидация"""
    if config_path is not None:
        run_config = RunConfig.load_from_file(config_path)
    else:
        run_config = RunConfig.load_from_file(DEFAULT_CONFIG_PATH, required=False)

    overrides = {FLAG_FIELDS[name]: value for name, value in flags.items() if name in FLAG_FIELDS}
    run_config = run_config.with_overrides(**overrides)
    run_config.validate()

    group_options = ctx.obj or {}
    _configure_logging(
        debug=group_options.get("debug") or run_config.debug,
        log_file=group_options.get("log_file") or run_config.log_file,
    )
    return run_config


def _modulation(run_config: RunConfig, params: ChannelParams) -> Tuple[ModulationConfig, Optional[float]]:
    """Параметры модуляции; T берётся явно или как множитель разброса задержки"""
    spread = None
    if not params.has_drift:
        spread = link_service.reference_delay_spread(params)

    if run_config.bit_period_s is not None:
        bit_period = run_config.bit_period_s
    elif spread is None:
        raise click.UsageError("При дрейфе разброс задержки заранее неизвестен: задайте --bit-period")
    else:
        bit_period = run_config.guard_multiplier * spread

    mc = ModulationConfig(
        bit_period=bit_period,
        molecules_per_pulse=run_config.molecules_per_pulse,
        preamble=run_config.preamble_bits(),
        threshold_policy=run_config.threshold_policy,
        threshold_alpha=run_config.threshold_alpha,
    )
    return mc, spread


def _walk_config(run_config: RunConfig, params: ChannelParams, mc: ModulationConfig,
                 n_bits: int, spread: Optional[float]) -> WalkConfig:
    return link_service.build_walk_config(
        params,
        mc,
        n_bits,
        seed=run_config.seed,
        steps_per_slot=run_config.steps_per_slot,
        tail_multiplier=run_config.tail_multiplier,
        shards=run_config.shards,
        bridge_correction=run_config.bridge_correction,
        interpolate_crossing=run_config.interpolate_crossing,
        delay_spread=spread,
    )


def _parse_multipliers(raw: str) -> List[float]:
    try:
        values = [float(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"'{raw}': ожидается список чисел через запятую", param_hint="--multipliers")
    if not values or any(not math.isfinite(v) or v <= 0 for v in values):
        raise click.BadParameter("множители должны быть положительными", param_hint="--multipliers")
    return values


# ================ КОМАНДЫ ================

@click.group()
@click.option("--debug", is_flag=True, default=False, help="Подробное логирование")
@click.option("--log-file", default=None, help="Дублировать лог в файл")
@click.pass_context
def cli(ctx: click.Context, debug: bool, log_file: Optional[str]):
    """Симулятор макромасштабного канала молекулярной связи."""
    ctx.obj = {"debug": debug, "log_file": log_file}


@cli.command("send")
@click.option("--text", required=True, help="Передаваемый текст")
@click.option("--molecule-types", type=int, default=None, help="Число параллельных типов молекул")
@_apply(CHANNEL_OPTIONS + MODULATION_OPTIONS + WALK_OPTIONS + OUTPUT_OPTIONS)
@click.pass_context
@_handle_errors
def cmd_send(ctx: click.Context, text: str, config_path: Optional[str], **flags):
    """Передать текст через канал и записать отчёт."""
    run_config = _load_run_config(ctx, config_path, flags)
    params = run_config.channel_params()
    mc, spread = _modulation(run_config, params)
    payload = text.encode("utf-8")
    n_bits = len(mc.preamble) + 8 * len(payload)
    wc = _walk_config(run_config, params, mc, n_bits, spread)

    output_dir = run_config.output_dir
    if run_config.molecule_types > 1:
        multi = asyncio.run(link_service.run_multichannel(
            payload, params, mc, wc, run_config.molecule_types,
            noiseless=run_config.noiseless, tail_multiplier=run_config.tail_multiplier,
        ))

        async def write_multi():
            await report_writer.write_json(os.path.join(output_dir, "report.json"), multi.to_dict())
            for j, report in enumerate(multi.per_type):
                await report_writer.write_slot_counts(
                    os.path.join(output_dir, f"slot_counts_type{j}.csv"), report.slot_counts, mc.bit_period
                )

        asyncio.run(write_multi())
        mean_ber = sum(r.ber for r in multi.per_type) / multi.n_types
        click.echo(f"recovered_text: {multi.recovered_text}")
        click.echo(f"ber: {format_value(mean_ber)}")
        click.echo(f"aggregate_throughput_bps: {format_value(multi.aggregate_throughput_bps)}")
        return

    report = link_service.run_link(
        payload, params, mc, wc,
        noiseless=run_config.noiseless,
        tail_multiplier=run_config.tail_multiplier,
        delay_spread=spread,
    )

    async def write_single():
        await report_writer.write_json(os.path.join(output_dir, "report.json"), report.to_dict())
        await report_writer.write_slot_counts(
            os.path.join(output_dir, "slot_counts.csv"), report.slot_counts, mc.bit_period
        )

    asyncio.run(write_single())
    click.echo(f"recovered_text: {report.recovered_text}")
    click.echo(f"ber: {format_value(report.ber)}")
    if report.sync_error or report.framing_error:
        click.echo("⚠️ Кадр не декодирован: " + ("ошибка синхронизации" if report.sync_error else "ошибка кадра"))


@cli.command("capture-time")
@click.option("--p", "p_target", type=float, default=0.9, show_default=True, help="Целевая доля захвата")
@click.option("--check-particles", type=int, default=None, help="Частиц в проверке Монте-Карло")
@_apply(CHANNEL_OPTIONS + WALK_OPTIONS + OUTPUT_OPTIONS)
@click.pass_context
@_handle_errors
def cmd_capture_time(ctx: click.Context, p_target: float, config_path: Optional[str], **flags):
    """Время захвата доли p и его проверка Монте-Карло; значения для диапазонов режимов."""
    run_config = _load_run_config(ctx, config_path, flags)
    params = run_config.channel_params()
    capture_time = physics_service.time_to_capture(params, p_target)

    fine_dt = params.diffusion_time_scale / 100.0
    dt = max(min(fine_dt, capture_time / 10.0), capture_time / CHECK_MAX_STEPS)
    check = WalkConfig(
        params=params,
        n_particles=run_config.check_particles,
        dt=dt,
        t_max=capture_time,
        seed=run_config.seed,
        shards=run_config.shards,
        bridge_correction=run_config.bridge_correction,
        interpolate_crossing=run_config.interpolate_crossing,
    )
    fraction = montecarlo_service.empirical_capture_curve(check, [capture_time])[0]
    sigma = math.sqrt(p_target * (1 - p_target) / run_config.check_particles)

    rows = [{
        "kind": "channel",
        "diffusivity_m2_s": params.diffusivity,
        "distance_m": params.distance,
        "p_target": p_target,
        "time_s": capture_time,
        "mc_fraction": fraction,
        "mc_sigma": sigma,
        "within_3sigma": abs(fraction - p_target) <= 3 * sigma,
        "claim": None,
    }]
    for name in run_config.documented_regimes():
        regime = REGIME_RANGES[name]
        for row in physics_service.capture_time_envelope(regime.diffusivity_range, regime.distance_range, p_target):
            rows.append({
                **{column: None for column in CAPTURE_TIME_COLUMNS},
                **row,
                "kind": f"regime:{name}",
                "claim": regime.claim,
            })

    for row in rows:
        click.echo(", ".join(f"{column}={format_value(row[column])}" for column in CAPTURE_TIME_COLUMNS
                             if row[column] is not None))

    asyncio.run(report_writer.write_table(
        os.path.join(run_config.output_dir, "capture_time"), rows, run_config.output_format
    ))


@cli.command("sweep")
@click.option("--text", required=True, help="Передаваемый текст")
@click.option("--multipliers", default=DEFAULT_MULTIPLIERS, show_default=True, help="Множители защитного интервала")
@click.option("--seeds", "n_seeds", type=click.IntRange(min=1), default=DEFAULT_SWEEP_SEEDS, show_default=True)
@_apply(CHANNEL_OPTIONS + MODULATION_OPTIONS + WALK_OPTIONS + OUTPUT_OPTIONS)
@click.pass_context
@_handle_errors
def cmd_sweep(ctx: click.Context, text: str, multipliers: str, n_seeds: int, config_path: Optional[str], **flags):
    """BER в зависимости от защитного интервала; пишет sweep.csv."""
    guard_multipliers = _parse_multipliers(multipliers)
    run_config = _load_run_config(ctx, config_path, flags)
    params = run_config.channel_params()
    mc, spread = _modulation(run_config, params)
    payload = text.encode("utf-8")
    wc = _walk_config(run_config, params, mc, len(mc.preamble) + 8 * len(payload), spread)

    rows = asyncio.run(link_service.ber_sweep(
        payload, params, mc, wc, guard_multipliers, n_seeds,
        noiseless=run_config.noiseless, tail_multiplier=run_config.tail_multiplier,
    ))

    path = os.path.join(run_config.output_dir, "sweep.csv")
    asyncio.run(report_writer.write_sweep(path, rows))
    click.echo(report_writer.render_csv(
        ["guard_multiplier", "bit_period_s", "mean_ber", "std_ber", "n_seeds"],
        [(r.guard_multiplier, r.bit_period_s, r.mean_ber, r.std_ber, r.n_seeds) for r in rows],
    ), nl=False)


@cli.command("rate")
@click.argument("bandwidth", type=float)
@click.argument("capacity", type=float)
@click.option("--quality", type=float, default=None, help="Качество канала S (только для записи)")
@_handle_errors
def cmd_rate(bandwidth: float, capacity: float, quality: Optional[float]):
    """Скорость R = B × C (ресурс × ёмкость на единицу ресурса)."""
    if bandwidth < 0 or capacity < 0:
        raise click.BadParameter("B и C должны быть неотрицательными")
    rate = link_service.data_rate(RateModel(bandwidth, capacity, quality))
    click.echo(f"R = {format_value(rate)} bits/s")


@cli.command("reference")
@_apply(OUTPUT_OPTIONS)
@_handle_errors
def cmd_reference(output_dir: Optional[str], output_format: Optional[str]):
    """Сравнение радиосвязи и химической связи и опорные значения ёмкости."""
    for row in REFERENCE_SYSTEMS:
        click.echo(f"{row['parameter']}: EM={row['em']}; chemical={row['chemical']}")
    click.echo(f"capacity_per_type_survey_bps: {format_value(CAPACITY_PER_TYPE_SURVEY_BPS)}")
    click.echo(f"capacity_per_type_testbed_peak_bps: {format_value(CAPACITY_PER_TYPE_TESTBED_PEAK_BPS)}")

    em_rate = link_service.data_rate(
        RateModel(EM_REFERENCE_BANDWIDTH_HZ, EM_REFERENCE_SPECTRAL_EFFICIENCY, EM_REFERENCE_SNR)
    )
    click.echo(f"em_reference_rate_bps: {format_value(em_rate)}")

    if output_dir is not None:
        asyncio.run(report_writer.write_table(
            os.path.join(output_dir, "reference"), REFERENCE_SYSTEMS, output_format or "csv"
        ))
