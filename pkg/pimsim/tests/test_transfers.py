from __future__ import annotations

from itertools import permutations

from django.test import SimpleTestCase
from pimsim.exceptions import (BroadcastLimitError, ConfigError,
                               CrossBankError, OutOfRangeError,
                               UnstagedBroadcastError)
from pimsim.geometry import (FabricConfig, RowKind, TimingGrade,
                             validate_config)
from pimsim.timing import check_sequence_legal, preset
from pimsim.transfers import (CopyRequest, Mechanism, MechanismParams,
                              SlotMode, broadcast_claim, command_sequence,
                              copy_latency, occupancy, occupancy_steps)


class CopyLatencyTests(SimpleTestCase):
    def setUp(self) -> None:
        self.g = validate_config(FabricConfig())
        self.t = preset(TimingGrade.DDR3_1600_11)

    def latency(self, mechanism: Mechanism, src: int = 0, dst: int = 1,
                **kwargs) -> float:
        req = CopyRequest.single(mechanism, self.g.regular_row(0, src),
                                 self.g.regular_row(0, dst), **kwargs)
        return copy_latency(req, self.g, self.t)

    def test_copy_table_latencies(self) -> None:
        self.assertAlmostEqual(self.latency(Mechanism.MEMCPY_CHANNEL),
                               1366.25, delta=1e-6)
        self.assertAlmostEqual(self.latency(Mechanism.ROWCLONE_INTER_SA),
                               1363.75, delta=1e-6)
        self.assertAlmostEqual(self.latency(Mechanism.LISA_RISC),
                               260.5, delta=1e-6)
        self.assertAlmostEqual(self.latency(Mechanism.SHARED_PIM_BUS),
                               52.75, delta=1e-6)

    def test_unstaged_path_is_three_aaps(self) -> None:
        self.assertAlmostEqual(
            self.latency(Mechanism.SHARED_PIM_BUS, staged=False), 158.25)

    def test_lisa_grows_per_hop(self) -> None:
        self.assertAlmostEqual(self.latency(Mechanism.LISA_RISC, 2, 5),
                               260.5 + 2 * 9.0)
        self.assertAlmostEqual(self.latency(Mechanism.LISA_RISC, 4, 4),
                               52.75)

    def test_lisa_hop_cost_override(self) -> None:
        req = CopyRequest.single(Mechanism.LISA_RISC,
                                 self.g.regular_row(0, 0),
                                 self.g.regular_row(0, 3))
        params = MechanismParams(lisa_extra_hop_ns=12.0)
        self.assertAlmostEqual(copy_latency(req, self.g, self.t, params),
                               260.5 + 24.0)

    def test_shared_pim_is_distance_invariant(self) -> None:
        for src, dst in permutations(range(self.g.subarrays_per_bank), 2):
            self.assertAlmostEqual(
                self.latency(Mechanism.SHARED_PIM_BUS, src, dst), 52.75)

    def test_bank_local_mechanisms_stay_in_bank(self) -> None:
        req = CopyRequest.single(Mechanism.LISA_RISC,
                                 self.g.regular_row(0, 0),
                                 self.g.regular_row(1, 0))
        with self.assertRaises(CrossBankError):
            copy_latency(req, self.g, self.t)

    def test_rowclone_intra_needs_one_subarray(self) -> None:
        with self.assertRaises(OutOfRangeError):
            self.latency(Mechanism.ROWCLONE_INTRA_SA, 0, 1)
        self.assertAlmostEqual(
            self.latency(Mechanism.ROWCLONE_INTRA_SA, 3, 3), 52.75)

    def test_mechanism_names(self) -> None:
        self.assertEqual(Mechanism.parse('LISA'), Mechanism.LISA_RISC)
        self.assertEqual(Mechanism.parse('shared-pim'),
                         Mechanism.SHARED_PIM_BUS)
        self.assertEqual(Mechanism.parse('rc_inter'),
                         Mechanism.ROWCLONE_INTER_SA)
        with self.assertRaises(ConfigError):
            Mechanism.parse('teleport')


class BroadcastTests(SimpleTestCase):
    def setUp(self) -> None:
        self.g = validate_config(FabricConfig())
        self.t = preset(TimingGrade.DDR3_1600_11)
        self.src = self.g.shared_row(0, 0, 0, RowKind.SHARED_GLOBAL)
        self.dsts = [self.g.shared_row(0, subarray, 1, RowKind.SHARED_GLOBAL)
                     for subarray in range(1, 6)]

    def test_four_destinations_in_one_transaction(self) -> None:
        duration, claim = broadcast_claim(self.src, self.dsts[:4], self.g,
                                          self.t)
        self.assertAlmostEqual(duration, 52.75)
        self.assertEqual(len(claim.busy_shared_rows), 5)
        self.assertEqual(claim.shared_row_mode, SlotMode.GLOBAL_ACTIVE)

    def test_fifth_destination_rejected(self) -> None:
        with self.assertRaises(BroadcastLimitError):
            broadcast_claim(self.src, self.dsts, self.g, self.t)

    def test_unstaged_broadcast_rejected(self) -> None:
        req = CopyRequest(Mechanism.SHARED_PIM_BUS, self.src,
                          tuple(self.dsts[:2]), staged=False)
        with self.assertRaises(UnstagedBroadcastError):
            copy_latency(req, self.g, self.t)


class OccupancyTests(SimpleTestCase):
    def setUp(self) -> None:
        self.g = validate_config(FabricConfig())
        self.t = preset(TimingGrade.DDR3_1600_11)

    def request(self, mechanism: Mechanism, src: int, dst: int,
                **kwargs) -> CopyRequest:
        return CopyRequest.single(mechanism, self.g.regular_row(0, src),
                                  self.g.regular_row(0, dst), **kwargs)

    def test_lisa_stalls_the_whole_span(self) -> None:
        for src, dst in ((0, 1), (2, 9), (15, 3)):
            claim = occupancy(self.request(Mechanism.LISA_RISC, src, dst),
                              self.g, self.t)
            self.assertEqual(len(claim.stalled_subarrays),
                             abs(src - dst) + 1)
            self.assertTrue(claim.blocks_compute_at_endpoints)

    def test_staged_bus_copy_stalls_nothing(self) -> None:
        claim = occupancy(self.request(Mechanism.SHARED_PIM_BUS, 0, 9),
                          self.g, self.t)
        self.assertEqual(claim.stalled_subarrays, frozenset())
        self.assertEqual(claim.busy_subarrays, frozenset())
        self.assertEqual(claim.busy_bus_segments, self.g.bus_segments)
        self.assertFalse(claim.blocks_compute_at_endpoints)

    def test_unstaged_bus_copy_has_three_steps(self) -> None:
        steps = occupancy_steps(
            self.request(Mechanism.SHARED_PIM_BUS, 0, 9, staged=False),
            self.g, self.t)
        self.assertEqual([step.offset_ns for step in steps],
                         [0.0, 52.75, 105.5])
        self.assertEqual(steps[0].claim.busy_subarrays, frozenset({0}))
        self.assertEqual(steps[2].claim.busy_subarrays, frozenset({9}))
        self.assertEqual(steps[0].claim.shared_row_mode,
                         SlotMode.LOCAL_ACTIVE)

    def test_channel_copies_use_bank_io(self) -> None:
        for mechanism in (Mechanism.MEMCPY_CHANNEL,
                          Mechanism.ROWCLONE_INTER_SA):
            claim = occupancy(self.request(mechanism, 1, 6), self.g, self.t)
            self.assertTrue(claim.uses_bank_io)
            self.assertEqual(claim.stalled_subarrays, frozenset({1, 6}))

    def test_command_sequences_are_legal(self) -> None:
        requests = [
            self.request(Mechanism.MEMCPY_CHANNEL, 0, 1),
            self.request(Mechanism.ROWCLONE_INTER_SA, 2, 7),
            self.request(Mechanism.LISA_RISC, 0, 1),
            self.request(Mechanism.LISA_RISC, 12, 4),
            self.request(Mechanism.SHARED_PIM_BUS, 0, 15),
            self.request(Mechanism.SHARED_PIM_BUS, 3, 3),
            self.request(Mechanism.SHARED_PIM_BUS, 5, 1, staged=False),
            CopyRequest.single(Mechanism.ROWCLONE_INTRA_SA,
                               self.g.regular_row(0, 4, 1),
                               self.g.regular_row(0, 4, 2)),
        ]
        for req in requests:
            with self.subTest(req=req):
                commands = command_sequence(req, self.g, self.t)
                self.assertIsNone(check_sequence_legal(commands, self.t))
                self.assertLessEqual(
                    commands[-1].issue_time_ns,
                    copy_latency(req, self.g, self.t))
