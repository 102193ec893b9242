from __future__ import annotations

import tempfile
from pathlib import Path

from django.test import SimpleTestCase
from pimsim.config_file import SimulationConfig
from pimsim.exceptions import CalibrationError, ConfigError
from pimsim.scheduler import COMPOSITE_CACHE_SIZE, composite_cost
from pimsim.services import (CALIBRATION_TARGET_PCT, PUBLISHED_SPEEDUPS,
                             SPEEDUP_TOLERANCE_PP,
                             AcceptanceCheck, _copy_checks, _fabric_checks,
                             _speedup_and_saving, build_benchmark,
                             calibrate_op_latency, check_size,
                             copy_microbench, repro_suite)


class CopyMicrobenchTests(SimpleTestCase):
    def test_every_mechanism_and_the_unstaged_path(self) -> None:
        results = {item.name: item for item in
                   copy_microbench(SimulationConfig())}
        self.assertEqual(set(results), {'memcpy', 'rc_inter', 'lisa',
                                        'sharedpim', 'sharedpim_unstaged'})
        self.assertAlmostEqual(results['sharedpim_unstaged'].latency_ns,
                               158.25)
        self.assertGreater(results['sharedpim_unstaged'].energy_uj,
                           results['sharedpim'].energy_uj)

    def test_copy_and_fabric_checks_pass(self) -> None:
        config = SimulationConfig()
        for check in _copy_checks(config) + _fabric_checks(config):
            with self.subTest(check=check.name):
                self.assertTrue(check.passed, check)


class BenchmarkTests(SimpleTestCase):
    def test_sizes_are_checked(self) -> None:
        check_size('mm', 1)
        with self.assertRaises(ConfigError):
            check_size('wide_add', 12)
        with self.assertRaises(ConfigError):
            check_size('ntt', 1)
        with self.assertRaises(ConfigError):
            check_size('quicksort', 10)

    def test_copy_microbench_has_no_graph(self) -> None:
        with self.assertRaises(ConfigError):
            build_benchmark('copy_microbench', 0)

    def test_acceptance_tolerance(self) -> None:
        self.assertTrue(AcceptanceCheck('x', 19.0, 18.0, 1.0).passed)
        self.assertFalse(AcceptanceCheck('x', 19.5, 18.0, 1.0).passed)


class CalibrationTests(SimpleTestCase):
    def test_calibrated_latency_hits_the_addition_target(self) -> None:
        config = SimulationConfig()
        op_ns = calibrate_op_latency(config)
        self.assertGreater(op_ns, 0)

        frozen = config.with_compute(plut_op_4bit_ns=op_ns,
                                     full_parallelism=True)
        speedup, _ = _speedup_and_saving('wide_add', 32, frozen)
        self.assertLess(abs(speedup - CALIBRATION_TARGET_PCT),
                        SPEEDUP_TOLERANCE_PP)

    def test_unreachable_target(self) -> None:
        with self.assertRaises(CalibrationError):
            calibrate_op_latency(SimulationConfig(), 150.0, iterations=1)

    def test_calibration_drops_cached_wide_op_costs(self) -> None:
        self.assertEqual(composite_cost.cache_info().maxsize,
                         COMPOSITE_CACHE_SIZE)
        calibrate_op_latency(SimulationConfig())
        self.assertEqual(composite_cost.cache_info().currsize, 0)


class ReproSuiteTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls) -> None:
        super().setUpClass()
        cls.tmp = tempfile.TemporaryDirectory()
        cls.checks = {check.name: check for check in
                      repro_suite(SimulationConfig(), Path(cls.tmp.name))}

    @classmethod
    def tearDownClass(cls) -> None:
        cls.tmp.cleanup()
        super().tearDownClass()

    def test_application_speedups_land_near_published_values(self) -> None:
        for name, size, target in PUBLISHED_SPEEDUPS:
            check = self.checks[f'{name} {size} speedup_pct']
            with self.subTest(benchmark=name, size=size):
                self.assertEqual(check.target, target)
                self.assertTrue(check.passed, check)

    def test_calibrated_addition(self) -> None:
        self.assertTrue(self.checks['wide_add 32 speedup_pct'].passed)

    def test_mean_energy_saving(self) -> None:
        check = self.checks['mean transfer energy saving_pct']
        self.assertEqual(check.target, 18.0)
        self.assertTrue(check.passed, check)

    def test_every_check_passes_and_is_written(self) -> None:
        self.assertEqual([name for name, check in self.checks.items()
                          if not check.passed], [])
        out = Path(self.tmp.name)
        self.assertTrue((out / 'repro.csv').exists())
        self.assertTrue((out / 'summary.json').exists())
