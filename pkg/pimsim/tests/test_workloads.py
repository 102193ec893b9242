from __future__ import annotations

from django.test import SimpleTestCase
from pimsim.exceptions import ConfigError, UnsupportedWidthError
from pimsim.workloads import (MAX_BROADCAST, PARTIAL_SUM_ROWS, ComputeOp,
                              DagNode, NodeKind, SearchKind, WorkloadDag,
                              build_graph_search, build_mm, build_ntt,
                              build_pmm, build_random, build_wide_add,
                              build_wide_mul, mm_counts, ntt_points,
                              ntt_stages, pmm_contributions, value_rows)


class WideOperationTests(SimpleTestCase):
    def test_wide_add_shape(self) -> None:
        dag = build_wide_add(16)
        self.assertEqual(len(dag.nodes), 11)
        self.assertEqual(len(dag.edges), 10)
        self.assertEqual(dag.count(ComputeOp.LUT4_ADD), 4)
        self.assertEqual(dag.count(ComputeOp.AGGREGATE), 3)
        self.assertEqual(dag.count(moves=True), 4)
        self.assertEqual(dag.lanes_per_group(), {0: 5})

    def test_wide_add_reduces_pairwise(self) -> None:
        dag = build_wide_add(32)
        self.assertEqual(dag.lanes_per_group(), {0: 9})
        aggregates = [node.preferred_subarray for node in dag.nodes
                      if node.op == ComputeOp.AGGREGATE]
        self.assertEqual(aggregates, [4, 5, 6, 7, 6, 7, 8])
        self.assertEqual(dag.count(moves=True), 8)

    def test_four_bit_add_is_a_single_lookup(self) -> None:
        dag = build_wide_add(4)
        self.assertEqual(len(dag.nodes), 1)
        self.assertEqual(dag.edges, ())

    def test_wide_mul_counts(self) -> None:
        dag = build_wide_mul(8)
        self.assertEqual(dag.count(ComputeOp.LUT4_MUL), 4)
        self.assertEqual(dag.count(ComputeOp.LUT_SHIFT), 4)
        self.assertEqual(dag.count(ComputeOp.AGGREGATE), 3)
        self.assertEqual(dag.count(moves=True), 2)

    def test_wide_mul_counts_grow_quadratically(self) -> None:
        for bits in (16, 32):
            k = bits // 4
            with self.subTest(bits=bits):
                dag = build_wide_mul(bits)
                self.assertEqual(dag.count(ComputeOp.LUT4_MUL), k * k)
                self.assertEqual(dag.count(ComputeOp.AGGREGATE), k * k - 1)
                self.assertEqual(dag.count(moves=True), k)
                self.assertEqual(
                    {node.size_rows for node in dag.nodes if node.is_move},
                    {PARTIAL_SUM_ROWS})

    def test_unsupported_width(self) -> None:
        with self.assertRaises(UnsupportedWidthError):
            build_wide_add(12)
        with self.assertRaises(UnsupportedWidthError):
            build_wide_mul(256)


class KernelTests(SimpleTestCase):
    def test_ntt_pads_to_power_of_two(self) -> None:
        self.assertEqual(ntt_points(300), 512)
        self.assertEqual(ntt_stages(300), 9)
        self.assertEqual(ntt_points(8), 8)

    def test_ntt_butterflies(self) -> None:
        dag = build_ntt(8)
        self.assertEqual(dag.count(ComputeOp.MUL_WIDE), 24)
        self.assertEqual(dag.count(ComputeOp.ADD_WIDE), 24)
        self.assertEqual(dag.count(moves=True), 24)

    def test_ntt_rejects_degenerate_degree(self) -> None:
        with self.assertRaises(ConfigError):
            build_ntt(1)

    def test_matrix_multiplication_counts(self) -> None:
        dag = build_mm(4)
        self.assertEqual(dag.count(ComputeOp.MUL_WIDE), 64)
        self.assertEqual(dag.count(ComputeOp.ADD_WIDE), 48)
        self.assertEqual(dag.count(moves=True), 64)
        moves = dag.count(moves=True)
        self.assertAlmostEqual(moves / (moves + 48), 0.571, places=3)
        self.assertEqual(mm_counts(4), {'multiply': 64, 'aggregate': 48,
                                        'move': 64})
        self.assertEqual(len(dag.lanes_per_group()), 16)

    def test_polynomial_multiplication_counts(self) -> None:
        dag = build_pmm(3)
        self.assertEqual(dag.count(ComputeOp.MUL_WIDE), 16)
        self.assertEqual(dag.count(ComputeOp.ADD_WIDE), 9)
        self.assertEqual(dag.count(moves=True), 14)
        self.assertEqual([pmm_contributions(3, k) for k in range(7)],
                         [1, 2, 3, 4, 3, 2, 1])

    def test_graph_search_scans_every_neighbour(self) -> None:
        for kind in SearchKind:
            with self.subTest(kind=kind.value):
                dag = build_graph_search(5, kind)
                scans = [node for node in dag.nodes
                         if not node.is_move
                         and node.preferred_subarray in range(4)]
                self.assertEqual(len(scans), 20)
                self.assertEqual(dag.count(ComputeOp.ADD_WIDE), 40)
                self.assertEqual(dag.count(moves=True), 25)

    def test_ntt_butterfly_pairs(self) -> None:
        dag = build_ntt(8)
        self.assertEqual(dag.lanes_per_group(),
                         {group: 2 for group in range(4)})
        self.assertEqual(
            {node.size_rows for node in dag.nodes if node.is_move},
            {value_rows()})
        self.assertEqual(value_rows(), 16)

    def test_dot_products_spread_over_product_lanes(self) -> None:
        self.assertEqual(build_mm(4).lanes_per_group()[0], 5)
        self.assertEqual(build_mm(2).lanes_per_group()[0], 3)
        groups = build_pmm(30).lanes_per_group()
        self.assertEqual(groups[0], 1)
        self.assertEqual(groups[30], 7)

    def test_lone_coefficient_needs_no_addition(self) -> None:
        dag = build_pmm(1)
        self.assertEqual(dag.count(ComputeOp.MUL_WIDE), 4)
        self.assertEqual(dag.count(ComputeOp.ADD_WIDE), 1)
        self.assertEqual(dag.count(moves=True), 2)

    def test_wide_search_uses_six_scan_lanes(self) -> None:
        dag = build_graph_search(8, SearchKind.BFS)
        self.assertEqual(dag.lanes_per_group(), {0: 7})
        widths = [node.broadcast_width for node in dag.nodes
                  if node.is_move and node.broadcast_width > 1]
        self.assertEqual(widths, [4, 2] * 8)

    def test_single_vertex_search(self) -> None:
        dag = build_graph_search(1, 'bfs')
        self.assertEqual(len(dag.nodes), 1)

    def test_broadcasts_never_exceed_limit(self) -> None:
        for dag in (build_graph_search(10, SearchKind.DFS), build_ntt(16),
                    build_random(7, size=40, lanes=8)):
            with self.subTest(dag=dag.label):
                widths = [node.broadcast_width for node in dag.nodes
                          if node.is_move]
                self.assertTrue(widths)
                self.assertLessEqual(max(widths), MAX_BROADCAST)


class DagTests(SimpleTestCase):
    def test_text_round_trip(self) -> None:
        for dag in (build_mm(2), build_wide_mul(8)):
            with self.subTest(dag=dag.label):
                again = WorkloadDag.from_text(dag.to_text(), dag.label)
                self.assertEqual(again.nodes, dag.nodes)
                self.assertEqual(again.edges, dag.edges)

    def test_text_format(self) -> None:
        text = build_mm(2).to_text()
        self.assertIn('node 0 MulWide/32 0\n', text)
        self.assertIn('Move/16/1 1@3', text)

    def test_unparseable_line(self) -> None:
        with self.assertRaisesMessage(ConfigError, 'line 2'):
            WorkloadDag.from_text('node 0 Lut4Add 0\nvertex 1\n')

    def test_cycle_rejected(self) -> None:
        nodes = (DagNode(0, NodeKind.COMPUTE, ComputeOp.LUT4_ADD, 0),
                 DagNode(1, NodeKind.COMPUTE, ComputeOp.LUT4_ADD, 0))
        with self.assertRaises(ConfigError):
            WorkloadDag(nodes, ((0, 1), (1, 0))).validate()

    def test_move_needs_a_consumer(self) -> None:
        nodes = (DagNode(0, NodeKind.COMPUTE, ComputeOp.LUT4_ADD, 0),
                 DagNode(1, NodeKind.MOVE, preferred_subarray=0))
        with self.assertRaises(ConfigError):
            WorkloadDag(nodes, ((0, 1),)).validate()

    def test_topological_order_is_deterministic(self) -> None:
        dag = build_random(3)
        order = dag.topological_order()
        self.assertEqual(order, build_random(3).topological_order())
        position = {node: index for index, node in enumerate(order)}
        for src, dst in dag.edges:
            self.assertLess(position[src], position[dst])
