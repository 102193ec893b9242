from __future__ import annotations

from django.test import SimpleTestCase
from pimsim.exceptions import (CapacityError, ConfigError, CrossBankError,
                               IncomparablePlatformsError)
from pimsim.geometry import FabricConfig, TimingGrade
from pimsim.scheduler import (Platform, Tag, compare, composite_cost,
                              metrics, simulate, audit_timeline,
                              percent_saving)
from pimsim.transfers import Mechanism
from pimsim.workloads import (ComputeOp, WorkloadDag, build_mm,
                              build_random, build_wide_add, build_wide_mul)

CHAIN = """
node 0 Lut4Add 0
node 1 Move/1/1 0
node 2 Lut4Add 1
edge 0 1
edge 1 2
"""

PIPELINE = """
node 0 Lut4Mul 0
node 1 Lut4Mul 0
node 2 Lut4Mul 0
node 3 Move/1/1 0
node 4 Move/1/1 0
node 5 Move/1/1 0
node 6 Aggregate 1
node 7 Aggregate 1
edge 0 3
edge 1 4
edge 2 5
edge 3 6
edge 4 6
edge 6 7
edge 5 7
"""

FAN_OUT = """
node 0 Lut4Add 0
node 1 Move/1/2 0
node 2 Lut4Add 1
node 3 Lut4Add 2
edge 0 1
edge 1 2
edge 1 3
"""

CROWDED_SOURCE = """
node 0 Lut4Add 0
node 1 Move/1/4 0
node 2 Move/1/1 0
node 3 Lut4Add 1
node 4 Lut4Add 2
node 5 Lut4Add 3
node 6 Lut4Add 4
node 7 Lut4Add 5
edge 0 1
edge 0 2
edge 1 3
edge 1 4
edge 1 5
edge 1 6
edge 2 7
"""


def run(text: str, mechanism: str, **kwargs):
    platform = Platform.build(mechanism, **kwargs)
    timeline = simulate(WorkloadDag.from_text(text, 'case'), platform)
    return timeline, metrics(timeline, platform)


class PlatformTests(SimpleTestCase):
    def test_default_op_latency_is_two_row_cycles(self) -> None:
        self.assertAlmostEqual(Platform.build('sharedpim').op_ns, 97.5)
        ddr4 = Platform.build(
            'lisa', FabricConfig(timing_grade=TimingGrade.DDR4_2400T_17))
        self.assertAlmostEqual(ddr4.op_ns, 92.34)
        self.assertEqual(Platform.build('lisa', plut_op_4bit_ns=40.0).op_ns,
                         40.0)

    def test_intra_subarray_copy_cannot_schedule_moves(self) -> None:
        with self.assertRaises(ConfigError):
            Platform.build('rc_intra')

    def test_non_positive_op_latency(self) -> None:
        with self.assertRaises(ConfigError):
            Platform.build('lisa', plut_op_4bit_ns=0.0)


class SimulateTests(SimpleTestCase):
    def test_single_compute(self) -> None:
        timeline, result = run('node 0 Lut4Add 0\n', 'sharedpim')
        self.assertEqual(result.makespan_ns, 97.5)
        self.assertEqual(result.transfer_energy_uj, 0.0)
        self.assertEqual(result.subarray_utilization, 1.0)

    def test_empty_workload(self) -> None:
        platform = Platform.build('lisa')
        timeline = simulate(WorkloadDag((), (), 'empty'), platform)
        result = metrics(timeline, platform)
        self.assertEqual(result.makespan_ns, 0.0)
        self.assertEqual(result.subarray_utilization, 0.0)
        self.assertEqual(timeline.intervals, [])

    def test_chain_under_shared_pim(self) -> None:
        timeline, result = run(CHAIN, 'sharedpim')
        self.assertAlmostEqual(result.makespan_ns, 247.75)
        self.assertAlmostEqual(result.transfer_energy_uj, 0.14)
        self.assertEqual(result.stall_ns, 0.0)
        self.assertAlmostEqual(result.nop_ns, 150.25)
        self.assertEqual(timeline.staged_moves, frozenset({1}))
        self.assertAlmostEqual(result.subarray_utilization,
                               195 / (2 * 247.75))

    def test_chain_under_lisa(self) -> None:
        timeline, result = run(CHAIN, 'lisa')
        self.assertAlmostEqual(result.makespan_ns, 455.5)
        self.assertAlmostEqual(result.transfer_energy_uj, 0.17)
        self.assertAlmostEqual(result.stall_ns, 2 * 260.5)
        self.assertEqual(result.nop_ns, 0.0)
        stalls = [item for item in timeline.intervals
                  if item.tag == Tag.STALL]
        self.assertEqual({item.resource for item in stalls},
                         {'b0/sa0', 'b0/sa1'})

    def test_pipeline_overlaps_moves_with_compute(self) -> None:
        _, shared = run(PIPELINE, 'sharedpim')
        self.assertAlmostEqual(shared.makespan_ns, 503.5)
        self.assertEqual(shared.stall_ns, 0.0)
        self.assertAlmostEqual(shared.nop_ns, 2 * 52.75)

        _, lisa = run(PIPELINE, 'lisa')
        self.assertAlmostEqual(lisa.makespan_ns, 1269.0)
        self.assertAlmostEqual(lisa.stall_ns, 3 * 2 * 260.5)

    def test_receive_row_is_held_until_its_reader_finishes(self) -> None:
        timeline, _ = run(PIPELINE, 'sharedpim')
        self.assertGreaterEqual(timeline.node_start[5],
                                timeline.node_end[6] - 1e-9)
        holds = [(grant.start_ns, grant.end_ns)
                 for _, grant in timeline.grants
                 if grant.claim.label.endswith(':hold')]
        self.assertEqual(holds, [(255.75, 353.25), (406.0, 503.5)])
        drained = [grant.claim.label for node_id, grant
                   in timeline.move_grants if node_id == 3]
        self.assertEqual(drained[-1], 'sharedpim:unstage')
        self.assertEqual(audit_timeline(timeline), [])

    def test_deliveries_never_overwrite_an_unread_operand(self) -> None:
        for dag in (build_wide_add(16), build_wide_mul(16), build_mm(3)):
            with self.subTest(dag=dag.label):
                timeline = simulate(dag, Platform.build(
                    'sharedpim', full_parallelism=True))
                self.assertEqual(audit_timeline(timeline), [])
                for src, dst in dag.edges:
                    self.assertGreaterEqual(timeline.node_start[dst],
                                            timeline.node_end[src] - 1e-9)

    def test_moves_carry_every_row(self) -> None:
        text = CHAIN.replace('Move/1/1', 'Move/4/1')
        _, shared = run(text, 'sharedpim')
        self.assertAlmostEqual(shared.makespan_ns, 2 * 97.5 + 4 * 52.75)
        self.assertAlmostEqual(shared.transfer_energy_uj, 4 * 0.14)
        _, lisa = run(text, 'lisa')
        self.assertAlmostEqual(lisa.makespan_ns, 2 * 97.5 + 4 * 260.5)

    def test_fan_out_is_one_broadcast_on_the_bus(self) -> None:
        timeline, result = run(FAN_OUT, 'sharedpim')
        self.assertEqual(len(timeline.move_grants), 1)
        self.assertAlmostEqual(result.makespan_ns, 247.75)

        timeline, result = run(FAN_OUT, 'lisa')
        self.assertEqual(len(timeline.move_grants), 2)
        self.assertAlmostEqual(timeline.node_end[1], 97.5 + 260.5 + 269.5)
        self.assertAlmostEqual(result.makespan_ns, 725.0)

    def test_busy_transmit_row_forces_unstaged_path(self) -> None:
        platform = Platform.build('sharedpim')
        timeline = simulate(WorkloadDag.from_text(CROWDED_SOURCE), platform)
        self.assertEqual(timeline.staged_moves, frozenset({1}))
        self.assertAlmostEqual(timeline.node_start[2], 150.25)
        self.assertAlmostEqual(timeline.node_end[2], 150.25 + 3 * 52.75)
        self.assertEqual(audit_timeline(timeline), [])

        local = platform.power.p_local_copy_w * 52.75 * 1e-3
        self.assertAlmostEqual(metrics(timeline, platform).transfer_energy_uj,
                               5 * 0.14 + 2 * local)

    def test_dependencies_hold_and_bound_is_respected(self) -> None:
        for mechanism in ('lisa', 'sharedpim', 'rc_inter', 'memcpy'):
            with self.subTest(mechanism=mechanism):
                dag = build_random(11, size=30, lanes=6)
                platform = Platform.build(mechanism)
                timeline = simulate(dag, platform)
                for src, dst in dag.edges:
                    self.assertGreaterEqual(timeline.node_start[dst],
                                            timeline.node_end[src] - 1e-9)
                self.assertGreaterEqual(timeline.makespan_ns,
                                        timeline.lower_bound_ns - 1e-9)
                self.assertEqual(audit_timeline(timeline), [])

    def test_group_wider_than_bank(self) -> None:
        with self.assertRaises(CapacityError):
            run('node 0 Lut4Add 20\n', 'lisa')
        _, result = run('node 0 Lut4Add 20\n', 'lisa', full_parallelism=True)
        self.assertEqual(result.makespan_ns, 97.5)

    def test_bank_local_mechanism_cannot_cross_banks(self) -> None:
        text = ('node 0 Lut4Add 0\nnode 1 Move/1/1 0\nnode 2 Lut4Add 0@1\n'
                'edge 0 1\nedge 1 2\n')
        with self.assertRaises(CrossBankError):
            run(text, 'lisa', full_parallelism=True)
        _, result = run(text, 'memcpy', full_parallelism=True)
        self.assertAlmostEqual(result.makespan_ns, 2 * 97.5 + 1366.25)

    def test_metrics_reject_foreign_platform(self) -> None:
        timeline, _ = run(CHAIN, 'lisa')
        with self.assertRaises(ConfigError):
            metrics(timeline, Platform.build('sharedpim'))


class CompositeTests(SimpleTestCase):
    def test_wide_node_costs_its_decomposition(self) -> None:
        platform = Platform.build('sharedpim')
        wide = dict(full_parallelism=True)
        expected = simulate(build_wide_add(16),
                            Platform.build('sharedpim', **wide)).makespan_ns
        latency, _ = composite_cost(ComputeOp.ADD_WIDE, 16, platform)
        self.assertAlmostEqual(latency, expected)

        _, result = run('node 0 AddWide/16 0\n', 'sharedpim')
        self.assertAlmostEqual(result.makespan_ns, expected)
        self.assertGreater(result.transfer_energy_uj, 0)


class CompareTests(SimpleTestCase):
    def test_identical_platforms_save_nothing(self) -> None:
        platform = Platform.build('lisa')
        report = compare(build_wide_add(8), [platform, platform])
        for row in report.rows:
            self.assertEqual(row.speedup_pct, 0.0)
            self.assertEqual(row.energy_saving_pct, 0.0)

    def test_lisa_is_the_baseline_when_present(self) -> None:
        platforms = [Platform.build(name)
                     for name in ('memcpy', 'lisa', 'sharedpim')]
        report = compare(build_wide_add(16), platforms)
        self.assertEqual(report.baseline, Mechanism.LISA_RISC)
        self.assertEqual(report.row(Mechanism.LISA_RISC).speedup_pct, 0.0)
        self.assertGreater(
            report.row(Mechanism.SHARED_PIM_BUS).speedup_pct, 0.0)
        self.assertLess(report.row(Mechanism.MEMCPY_CHANNEL).speedup_pct,
                        0.0)

    def test_platforms_must_differ_only_in_mechanism(self) -> None:
        with self.assertRaises(IncomparablePlatformsError):
            compare(build_wide_add(8), [
                Platform.build('lisa'),
                Platform.build('sharedpim', plut_op_4bit_ns=50.0)])
        with self.assertRaises(IncomparablePlatformsError):
            compare(build_wide_add(8), [Platform.build('lisa')])

    def test_shared_pim_never_slower_on_small_kernels(self) -> None:
        for dag in (build_wide_add(16), build_wide_mul(8), build_mm(2)):
            with self.subTest(dag=dag.label):
                report = compare(dag, [
                    Platform.build('lisa', full_parallelism=True),
                    Platform.build('sharedpim', full_parallelism=True)])
                shared = report.row(Mechanism.SHARED_PIM_BUS).metrics
                lisa = report.row(Mechanism.LISA_RISC).metrics
                self.assertLessEqual(shared.makespan_ns, lisa.makespan_ns)
                self.assertLessEqual(shared.transfer_energy_uj,
                                     lisa.transfer_energy_uj)

    def test_worker_processes_match_a_serial_run(self) -> None:
        platforms = [Platform.build(name)
                     for name in ('memcpy', 'lisa', 'sharedpim')]
        serial = compare(build_mm(2), platforms)
        pooled = compare(build_mm(2), platforms, threads=3)
        self.assertEqual(serial, pooled)

    def test_percent_saving(self) -> None:
        self.assertAlmostEqual(percent_saving(200.0, 150.0), 25.0)
        self.assertEqual(percent_saving(0.0, 10.0), 0.0)
