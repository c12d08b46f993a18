#!/usr/bin/env python3
"""
Скрипт приёмочной проверки симулятора канала молекулярной связи
"""
import asyncio
import math
import os
import shutil
import sys
import tempfile
import time

# Добавляем путь к модулям
sys.path.insert(0, '.')

from click.testing import CliRunner
from scipy.integrate import quad

from cli_handlers import cli
from config import PRESETS, Preset, REGIME_RANGES
from link_service import link_service
from models import ChannelParams, ModulationConfig, RateModel, ThresholdPolicy, WalkConfig
from montecarlo_service import montecarlo_service
from physics_service import physics_service


class AcceptanceTester:
    """Класс для приёмочной проверки симулятора"""

    def __init__(self):
        self.test_results = []

    def log_test(self, test_name: str, success: bool, details: str = ""):
        """Логирование результата проверки"""
        status = "✅ PASS" if success else "❌ FAIL"
        print(f"{status} {test_name}")
        if details:
            print(f"   └─ {details}")

        self.test_results.append({
            "name": test_name,
            "success": success,
            "details": details
        })

    def test_oracle_equivalence(self):
        """Монте-Карло против erfc в 9 точках обоих режимов"""
        started = time.monotonic()
        grid = [
            (1e-4, 1e-10, 0.5), (1e-6, 1e-12, 2.0), (2e-4, 300e-12, 0.1),
            (2.0, 0.5e-4, 0.5), (1.0, 0.1e-4, 0.1), (5.0, 1e-4, 2.0),
            (5e-5, 1e-10, 1.0), (3.0, 0.5e-4, 1.0), (1.0, 1e-4, 0.25),
        ]
        try:
            worst = 0.0
            for seed, (distance, diffusivity, reduced_time) in enumerate(grid):
                params = ChannelParams(diffusivity=diffusivity, distance=distance)
                t = reduced_time * params.diffusion_time_scale
                cfg = WalkConfig(
                    params=params,
                    n_particles=100_000,
                    dt=params.diffusion_time_scale / 100,
                    t_max=t,
                    seed=seed,
                    bridge_correction=True,
                )
                expected = physics_service.capture_probability(params, t)
                sigma = math.sqrt(expected * (1 - expected) / cfg.n_particles)
                observed = montecarlo_service.simulate_walk(cfg).absorbed_fraction
                worst = max(worst, abs(observed - expected) / sigma)

            elapsed = time.monotonic() - started
            self.log_test("Сверка Монте-Карло с erfc", worst <= 3.0,
                          f"наихудшее отклонение {worst:.2f}σ, {elapsed:.1f} с")
        except Exception as e:
            self.log_test("Сверка Монте-Карло с erfc", False, str(e))

    def test_normalization(self):
        """Интеграл импульсного отклика равен 1"""
        try:
            worst = 0.0
            for diffusivity in (0.1, 1.0, 10.0):
                for t in (0.5, 1.0, 4.0):
                    for drift in (0.0, 0.7):
                        params = ChannelParams(diffusivity=diffusivity, distance=0.0, drift_velocity=drift)
                        centre, half_width = drift * t, 10 * math.sqrt(2 * diffusivity * t)
                        total, _ = quad(
                            lambda y: physics_service.concentration_pdf(params, t, position=y),
                            centre - half_width, centre + half_width, points=[centre], epsabs=1e-13, limit=200,
                        )
                        worst = max(worst, abs(total - 1.0))
            self.log_test("Нормировка импульсного отклика", worst <= 1e-6, f"максимальная ошибка {worst:.2e}")
        except Exception as e:
            self.log_test("Нормировка импульсного отклика", False, str(e))

    def test_inversion(self):
        """Обращение времени захвата для обоих пресетов"""
        try:
            worst = 0.0
            for params in PRESETS.values():
                for p in (0.01, 0.1, 0.5, 0.9, 0.99):
                    t = physics_service.time_to_capture(params, p)
                    worst = max(worst, abs(physics_service.capture_probability(params, t) - p))
            self.log_test("Обращение времени захвата", worst <= 1e-6, f"максимальная ошибка {worst:.2e}")
        except Exception as e:
            self.log_test("Обращение времени захвата", False, str(e))

    def test_data_rate(self):
        """R = B × C для радио и химического канала"""
        try:
            radio = link_service.data_rate(RateModel(20e6, 5.0))
            chemical = link_service.data_rate(RateModel(1, 0.3))
            success = radio == 1e8 and abs(chemical - 0.3) < 1e-12
            self.log_test("Скорость R = B × C", success, f"радио {radio:.9g} бит/с, химия {chemical:.9g} бит/с")
        except Exception as e:
            self.log_test("Скорость R = B × C", False, str(e))

    def test_noiseless_round_trip(self):
        """HELLO WORLD через канал ожидаемых значений"""
        for name, params in PRESETS.items():
            try:
                started = time.monotonic()
                text = b"HELLO WORLD"
                mc = ModulationConfig(bit_period=10 * physics_service.delay_spread(params), molecules_per_pulse=10_000)
                wc = link_service.build_walk_config(params, mc, len(mc.preamble) + 8 * len(text))
                report = link_service.run_link(text, params, mc, wc, noiseless=True)
                elapsed = time.monotonic() - started

                success = report.ber == 0 and report.recovered_text == "HELLO WORLD" and elapsed < 1.0
                self.log_test(f"Канал без шума ({name})", success, f"BER {report.ber}, {elapsed:.2f} с")
            except Exception as e:
                self.log_test(f"Канал без шума ({name})", False, str(e))

    async def test_isi_monotonicity(self):
        """BER падает с ростом защитного интервала"""
        try:
            started = time.monotonic()
            params = PRESETS[Preset.INTRACELLULAR]
            text = b"HELLO WORLD"
            mc = ModulationConfig(bit_period=physics_service.delay_spread(params), molecules_per_pulse=10)
            wc = link_service.build_walk_config(params, mc, len(mc.preamble) + 8 * len(text), seed=1)
            rows = await link_service.ber_sweep(text, params, mc, wc, [0.25, 0.5, 1.0, 2.0, 4.0], 20)

            inversions = [(a, b) for a, b in zip(rows, rows[1:]) if b.mean_ber > a.mean_ber]
            success = len(inversions) <= 1 and all(
                b.mean_ber - a.mean_ber <= max(a.std_ber, b.std_ber) for a, b in inversions
            )
            curve = ", ".join(f"{r.guard_multiplier:g}→{r.mean_ber:.3f}" for r in rows)
            elapsed = time.monotonic() - started
            self.log_test("Монотонность BER по защитному интервалу", success, f"{curve}; {elapsed:.1f} с")
        except Exception as e:
            self.log_test("Монотонность BER по защитному интервалу", False, str(e))

    def test_capacity_order_of_magnitude(self):
        """Ёмкость метрового канала с дрейфом"""
        try:
            params = ChannelParams(diffusivity=0.01, distance=1.0, drift_velocity=0.5)
            text = b"Hi"
            mc = ModulationConfig(bit_period=5.0, molecules_per_pulse=1_000,
                                  threshold_policy=ThresholdPolicy.CALIBRATED)
            wc = link_service.build_walk_config(params, mc, len(mc.preamble) + 8 * len(text), seed=3)
            report = link_service.run_link(text, params, mc, wc)

            capacity = report.capacity_estimate_bps
            self.log_test("Порядок ёмкости на тип молекул", 0.01 <= capacity <= 1.0,
                          f"{capacity:.3g} бит/с при T = {mc.bit_period:g} с")
        except Exception as e:
            self.log_test("Порядок ёмкости на тип молекул", False, str(e))

    def test_documented_capture_times(self):
        """Фактические времена захвата 90% на границах диапазонов режимов"""
        try:
            for name, regime in REGIME_RANGES.items():
                rows = physics_service.capture_time_envelope(regime.diffusivity_range, regime.distance_range, 0.9)
                times = [row["time_s"] for row in rows]
                self.log_test(f"Времена захвата 90% ({name})", all(t > 0 for t in times),
                              f"от {min(times):.3g} до {max(times):.3g} с; заявлено: {regime.claim}")
        except Exception as e:
            self.log_test("Времена захвата 90%", False, str(e))

    def test_cli_determinism(self):
        """Байт-идентичные результаты send и sweep при повторе и разном числе шардов"""
        runner = CliRunner()
        workdir = tempfile.mkdtemp(prefix="moldiff_")
        channel = ["--diffusivity", "1", "--distance", "1", "--seed", "5"]
        commands = {
            "send": (["send", "--text", "Hi", "--guard-mult", "0.5", "--molecules", "2000"] + channel,
                     ["report.json", "slot_counts.csv"]),
            "sweep": (["sweep", "--text", "Hi", "--molecules", "100", "--multipliers", "0.5,1", "--seeds", "3"]
                      + channel, ["sweep.csv"]),
        }
        try:
            for name, (args, outputs) in commands.items():
                contents = []
                for run, shards in enumerate(("1", "1", "4")):
                    out = os.path.join(workdir, f"{name}_{run}")
                    result = runner.invoke(cli, args + ["--shards", shards, "--output-dir", out], obj={})
                    if result.exit_code != 0:
                        raise RuntimeError(f"{name}: код выхода {result.exit_code}")
                    contents.append([open(os.path.join(out, f), "rb").read() for f in outputs])

                self.log_test(f"Детерминизм {name}", contents[0] == contents[1] == contents[2],
                              "2 повтора и шарды {1, 4}")
        except Exception as e:
            self.log_test("Детерминизм CLI", False, str(e))
        finally:
            shutil.rmtree(workdir, ignore_errors=True)

    def print_summary(self):
        """Вывод итогов проверки"""
        total = len(self.test_results)
        passed = sum(1 for r in self.test_results if r["success"])
        failed = total - passed

        print("\n" + "="*70)
        print("📊 ИТОГИ ПРИЁМОЧНОЙ ПРОВЕРКИ")
        print("="*70)
        print(f"Всего проверок: {total}")
        print(f"✅ Успешно: {passed}")
        print(f"❌ Неудачно: {failed}")
        print(f"📈 Процент успеха: {(passed/total*100):.1f}%")

        if failed > 0:
            print("\n🚨 Неудачные проверки:")
            for result in self.test_results:
                if not result["success"]:
                    print(f"  • {result['name']}: {result['details']}")

        print("="*70)

        return failed == 0


def main():
    """Главная функция проверки"""
    print("🧪 Запуск приёмочной проверки симулятора канала молекулярной связи")
    print("="*70)

    tester = AcceptanceTester()

    tester.test_oracle_equivalence()
    tester.test_normalization()
    tester.test_inversion()
    tester.test_data_rate()
    tester.test_noiseless_round_trip()
    asyncio.run(tester.test_isi_monotonicity())
    tester.test_capacity_order_of_magnitude()
    tester.test_documented_capture_times()
    tester.test_cli_determinism()

    success = tester.print_summary()

    if success:
        print("\n🎉 Все проверки прошли успешно!")
    else:
        print("\n⚠️ Некоторые проверки не прошли.")
    return success


if __name__ == "__main__":
    try:
        success = main()
        sys.exit(0 if success else 1)
    except KeyboardInterrupt:
        print("\n🛑 Проверка прервана пользователем")
        sys.exit(1)
    except Exception as e:
        print(f"\n💥 Фатальная ошибка: {e}")
        sys.exit(1)
