"""
Workload DAG builders for the LUT-based benchmarks: wide addition and
multiplication decomposed into 4-bit LUT operations, NTT, matrix
multiplication, naive polynomial multiplication and worst-case graph
search on a complete graph.

Compute nodes name a lane (subarray inside their group). Groups are
independent clusters the scheduler places in banks. A Move node carries
its producer's result to every consumer lane.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

import networkx as nx

from .exceptions import ConfigError, UnsupportedWidthError

SUPPORTED_WIDTHS = (4, 8, 16, 32, 64, 128)
VALUE_WIDTH = 32
MAX_BROADCAST = 4
# rows one lane's shifted partial sum spans when it joins the reduction
PARTIAL_SUM_ROWS = 14
MM_PRODUCT_LANES = 4
PMM_PRODUCT_LANES = 6
SEARCH_SCAN_LANES = 6


class NodeKind(str, Enum):
    COMPUTE = 'compute'
    MOVE = 'move'


class ComputeOp(str, Enum):
    LUT4_ADD = 'Lut4Add'
    LUT4_MUL = 'Lut4Mul'
    LUT_SHIFT = 'LutShift'
    AGGREGATE = 'Aggregate'
    # wide operations priced by simulating their own decomposition
    ADD_WIDE = 'AddWide'
    MUL_WIDE = 'MulWide'

    @property
    def is_composite(self) -> bool:
        return self in (ComputeOp.ADD_WIDE, ComputeOp.MUL_WIDE)


class SearchKind(str, Enum):
    BFS = 'bfs'
    DFS = 'dfs'


@dataclass(frozen=True)
class DagNode:
    id: int
    kind: NodeKind
    op: ComputeOp | None = None
    preferred_subarray: int | None = None
    group: int = 0
    width: int = 4
    size_rows: int = 1
    broadcast_width: int = 1

    @property
    def is_move(self) -> bool:
        return self.kind == NodeKind.MOVE

    def token(self) -> str:
        if self.is_move:
            return f'Move/{self.size_rows}/{self.broadcast_width}'
        if self.op.is_composite:
            return f'{self.op.value}/{self.width}'
        return self.op.value


@dataclass(frozen=True)
class WorkloadDag:
    nodes: tuple[DagNode, ...]
    edges: tuple[tuple[int, int], ...]
    label: str = ''

    @cached_property
    def graph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(node.id for node in self.nodes)
        graph.add_edges_from(self.edges)
        return graph

    @cached_property
    def by_id(self) -> dict[int, DagNode]:
        return {node.id: node for node in self.nodes}

    @cached_property
    def predecessors(self) -> dict[int, tuple[int, ...]]:
        return {node: tuple(sorted(self.graph.predecessors(node)))
                for node in self.graph.nodes}

    @cached_property
    def successors(self) -> dict[int, tuple[int, ...]]:
        return {node: tuple(sorted(self.graph.successors(node)))
                for node in self.graph.nodes}

    def validate(self) -> None:
        ids = [node.id for node in self.nodes]
        if len(ids) != len(set(ids)):
            raise ConfigError(f'{self.label}: node ids are not unique')
        for src, dst in self.edges:
            if src not in self.by_id or dst not in self.by_id:
                raise ConfigError(f'{self.label}: edge {src}->{dst} dangles')
        if not nx.is_directed_acyclic_graph(self.graph):
            raise ConfigError(f'{self.label}: workload graph has a cycle')
        for node in self.nodes:
            if node.is_move and not 1 <= node.broadcast_width <= (
                    MAX_BROADCAST):
                raise ConfigError(
                    f'{self.label}: move {node.id} broadcasts to '
                    f'{node.broadcast_width} lanes')
            if node.is_move and not self.successors[node.id]:
                raise ConfigError(
                    f'{self.label}: move {node.id} has no consumer')

    def count(self, op: ComputeOp | None = None, *,
              moves: bool = False) -> int:
        if moves:
            return sum(1 for node in self.nodes if node.is_move)
        return sum(1 for node in self.nodes
                   if not node.is_move and (op is None or node.op == op))

    def topological_order(self) -> list[int]:
        return list(nx.lexicographical_topological_sort(self.graph))

    def lanes_per_group(self) -> dict[int, int]:
        widths: dict[int, int] = {}
        for node in self.nodes:
            if node.preferred_subarray is None:
                continue
            widths[node.group] = max(widths.get(node.group, 0),
                                     node.preferred_subarray + 1)
        return widths

    def to_text(self) -> str:
        lines = []
        for node in self.nodes:
            place = ''
            if node.preferred_subarray is not None:
                place = f' {node.preferred_subarray}'
                if node.group:
                    place += f'@{node.group}'
            lines.append(f'node {node.id} {node.token()}{place}')
        lines += [f'edge {src} {dst}' for src, dst in self.edges]
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_text(cls, text: str, label: str = '') -> WorkloadDag:
        nodes: list[DagNode] = []
        edges: list[tuple[int, int]] = []
        for line_no, raw in enumerate(text.splitlines(), start=1):
            parts = raw.split()
            if not parts or parts[0].startswith('#'):
                continue
            try:
                if parts[0] == 'edge':
                    edges.append((int(parts[1]), int(parts[2])))
                    continue
                if parts[0] != 'node':
                    raise ValueError(parts[0])
                nodes.append(_parse_node(parts))
            except (ValueError, IndexError) as exc:
                raise ConfigError(f'cannot parse {raw!r}',
                                  line=line_no) from exc
        dag = cls(tuple(nodes), tuple(edges), label)
        dag.validate()
        return dag


def _parse_node(parts: list[str]) -> DagNode:
    node_id = int(parts[1])
    token = parts[2]
    lane: int | None = None
    group = 0
    if len(parts) > 3:
        lane_text, _, group_text = parts[3].partition('@')
        lane = int(lane_text)
        group = int(group_text) if group_text else 0

    if token.startswith('Move/'):
        _, size_rows, width = token.split('/')
        return DagNode(node_id, NodeKind.MOVE, preferred_subarray=lane,
                       group=group, size_rows=int(size_rows),
                       broadcast_width=int(width))

    op_text, _, width_text = token.partition('/')
    return DagNode(node_id, NodeKind.COMPUTE, ComputeOp(op_text),
                   preferred_subarray=lane, group=group,
                   width=int(width_text) if width_text else 4)


@dataclass
class _DagBuilder:
    label: str
    nodes: list[DagNode] = field(default_factory=list)
    edges: list[tuple[int, int]] = field(default_factory=list)

    def compute(self, op: ComputeOp, lane: int, group: int = 0,
                *, width: int = 4, after: Iterable[DagNode] = (),
                rows: int = 1) -> DagNode:
        node = DagNode(len(self.nodes), NodeKind.COMPUTE, op, lane, group,
                       width=width)
        self.nodes.append(node)
        for pred in after:
            self.feed(pred, node, rows=rows)
        return node

    def feed(self, producer: DagNode, consumer: DagNode,
             rows: int = 1) -> None:
        """Connect a result to a consumer, moving it if lanes differ."""
        self.feed_many(producer, [consumer], rows=rows)

    def feed_many(self, producer: DagNode, consumers: Sequence[DagNode],
                  rows: int = 1) -> None:
        remote: dict[int, list[DagNode]] = {}
        for consumer in consumers:
            if (consumer.group, consumer.preferred_subarray) == (
                    producer.group, producer.preferred_subarray):
                self.edges.append((producer.id, consumer.id))
            else:
                remote.setdefault(consumer.preferred_subarray,
                                  []).append(consumer)

        lanes = sorted(remote)
        for start in range(0, len(lanes), MAX_BROADCAST):
            chunk = lanes[start:start + MAX_BROADCAST]
            move = DagNode(len(self.nodes), NodeKind.MOVE,
                           preferred_subarray=producer.preferred_subarray,
                           group=producer.group, size_rows=rows,
                           broadcast_width=len(chunk))
            self.nodes.append(move)
            self.edges.append((producer.id, move.id))
            for lane in chunk:
                for consumer in remote[lane]:
                    self.edges.append((move.id, consumer.id))

    def chain(self, op: ComputeOp, lane: int, inputs: Sequence[DagNode],
              group: int = 0, *, width: int = 4,
              rows: int = 1) -> DagNode:
        """Fold inputs one at a time on one lane; the first step takes two."""
        if len(inputs) == 1:
            return inputs[0]
        acc = self.compute(op, lane, group, width=width,
                           after=inputs[:2], rows=rows)
        for operand in inputs[2:]:
            acc = self.compute(op, lane, group, width=width,
                               after=(acc, operand), rows=rows)
        return acc

    def fold(self, op: ComputeOp, partials: Sequence[DagNode],
             group: int = 0, *, rows: int = 1) -> DagNode:
        """
        Pairwise reduction of one partial per lane. Each round the lower
        half moves onto the upper half; the last two meet one lane above
        the highest partial.
        """
        active = list(partials)
        if len(active) == 1:
            return active[0]
        top = max(node.preferred_subarray for node in active) + 1
        while len(active) > 2:
            half = len(active) // 2
            active = [
                self.compute(op, high.preferred_subarray, group,
                             after=(low, high), rows=rows)
                for low, high in zip(active[:half], active[half:])
            ] + active[2 * half:]
        return self.compute(op, top, group, after=active, rows=rows)

    def build(self) -> WorkloadDag:
        dag = WorkloadDag(tuple(self.nodes), tuple(self.edges), self.label)
        dag.validate()
        return dag


def _lanes_for(bits: int) -> int:
    if bits not in SUPPORTED_WIDTHS:
        raise UnsupportedWidthError(
            f'{bits}-bit operands are not supported; use one of '
            f'{SUPPORTED_WIDTHS}')
    return bits // 4


def build_wide_add(bits: int) -> WorkloadDag:
    """
    bits/4 parallel 4-bit additions on their own lanes, then a carry
    reduction: every round the lower half of the partial sums moves onto
    the upper half, and the last two meet on an aggregation lane.
    """
    lanes = _lanes_for(bits)
    builder = _DagBuilder(f'wide_add_{bits}')
    partials = [builder.compute(ComputeOp.LUT4_ADD, lane)
                for lane in range(lanes)]
    builder.fold(ComputeOp.AGGREGATE, partials)
    return builder.build()


def build_wide_mul(bits: int) -> WorkloadDag:
    """
    Schoolbook multiplication from 4-bit LUT products. Lane i multiplies
    digit a_i by every digit b_j, shifts each product into place and folds
    it into its own running sum, so one layer's products are aggregated
    while the next layer multiplies. The per-lane sums then meet in the
    same reduction tree as wide addition.
    """
    lanes = _lanes_for(bits)
    builder = _DagBuilder(f'wide_mul_{bits}')
    if lanes == 1:
        builder.compute(ComputeOp.LUT4_MUL, 0)
        return builder.build()

    sums = []
    for lane in range(lanes):
        shifted = []
        for _ in range(lanes):
            product = builder.compute(ComputeOp.LUT4_MUL, lane)
            shifted.append(builder.compute(ComputeOp.LUT_SHIFT, lane,
                                           after=(product,)))
        sums.append(builder.chain(ComputeOp.AGGREGATE, lane, shifted))
    builder.fold(ComputeOp.AGGREGATE, sums, rows=PARTIAL_SUM_ROWS)

    return builder.build()


def value_rows(width: int = VALUE_WIDTH) -> int:
    """Rows one value spans in the LUT layout: two per 4-bit digit."""
    return 2 * (width // 4)


def ntt_points(degree: int) -> int:
    points = 2
    while points < degree:
        points *= 2
    return points


def build_ntt(degree: int, width: int = VALUE_WIDTH) -> WorkloadDag:
    """
    Radix-2 butterflies over the next power of two at or above degree.
    Butterfly position i of every stage runs in group i on lanes 0 and 1:
    both lanes multiply by the twiddle factor, swap the products and
    add / subtract, so each stage feeds the next without leaving the pair.
    """
    if degree < 2:
        raise ConfigError('NTT degree must be at least 2')

    points = ntt_points(degree)
    rows = value_rows(width)
    builder = _DagBuilder(f'ntt_{degree}')

    for group in range(points // 2):
        x: DagNode | None = None
        y: DagNode | None = None
        for _ in range(ntt_stages(degree)):
            mx = builder.compute(ComputeOp.MUL_WIDE, 0, group, width=width,
                                 after=[node for node in (x,) if node])
            my = builder.compute(ComputeOp.MUL_WIDE, 1, group, width=width,
                                 after=[node for node in (y,) if node])
            x = builder.compute(ComputeOp.ADD_WIDE, 0, group, width=width,
                                after=(mx, my), rows=rows)
            y = builder.compute(ComputeOp.ADD_WIDE, 1, group, width=width,
                                after=(my, mx), rows=rows)

    return builder.build()


def ntt_stages(degree: int) -> int:
    return ntt_points(degree).bit_length() - 1


def _sum_of_products(builder: _DagBuilder, count: int, group: int,
                     width: int, product_lanes: int) -> DagNode:
    """
    count products dealt round-robin over product_lanes lanes and summed
    on the lane after them as they arrive.
    """
    lanes = min(product_lanes, count)
    products = [
        builder.compute(ComputeOp.MUL_WIDE, index % lanes, group,
                        width=width)
        for index in range(count)
    ]
    return builder.chain(ComputeOp.ADD_WIDE, lanes, products, group,
                         width=width, rows=value_rows(width))


def build_mm(n: int, width: int = VALUE_WIDTH) -> WorkloadDag:
    """
    n x n matrix product. Every output element is its own group: the n
    products of its dot product are spread over MM_PRODUCT_LANES lanes and
    accumulated on the next lane.
    """
    if n < 1:
        raise ConfigError('matrix size must be at least 1')

    builder = _DagBuilder(f'mm_{n}')
    for group in range(n * n):
        _sum_of_products(builder, n, group, width, MM_PRODUCT_LANES)

    return builder.build()


def mm_counts(n: int) -> dict[str, int]:
    """Closed-form node counts of build_mm for sizes too big to build."""
    if n == 1:
        return {'multiply': 1, 'aggregate': 0, 'move': 0}
    return {'multiply': n ** 3, 'aggregate': n * n * (n - 1),
            'move': n ** 3}


def pmm_contributions(degree: int, k: int) -> int:
    return min(k, degree) - max(0, k - degree) + 1


def build_pmm(degree: int, width: int = VALUE_WIDTH) -> WorkloadDag:
    """
    Naive product of two degree-d polynomials. Output coefficient k is its
    own group holding the a_i * b_j with i + j = k; a lone product is the
    coefficient itself.
    """
    if degree < 0:
        raise ConfigError('polynomial degree must not be negative')

    builder = _DagBuilder(f'pmm_{degree}')
    for k in range(2 * degree + 1):
        _sum_of_products(builder, pmm_contributions(degree, k), k, width,
                         PMM_PRODUCT_LANES)

    return builder.build()


def build_graph_search(nodes: int, kind: SearchKind | str,
                       width: int = VALUE_WIDTH) -> WorkloadDag:
    """
    Worst-case traversal of a complete graph: every vertex is visited and
    every neighbour scanned. The frontier lane broadcasts each visit to up
    to SEARCH_SCAN_LANES scan lanes, four at a time; their verdicts move
    back and merge into the frontier before the next visit. BFS and DFS
    differ only in the order neighbours are scanned.
    """
    if nodes < 1:
        raise ConfigError('graph must have at least one node')

    kind = SearchKind(kind)
    rows = value_rows(width)
    builder = _DagBuilder(f'{kind.value}_{nodes}')
    scan_lanes = min(nodes - 1, SEARCH_SCAN_LANES)
    frontier_lane = scan_lanes
    previous: DagNode | None = None

    for vertex in range(nodes):
        visit = builder.compute(
            ComputeOp.ADD_WIDE, frontier_lane, width=width,
            after=[previous] if previous else [], rows=rows)
        neighbours = [other for other in range(nodes) if other != vertex]
        if kind == SearchKind.DFS:
            neighbours.reverse()
        if not neighbours:
            previous = visit
            continue

        lane_tail: dict[int, DagNode] = {}
        first_scans: list[DagNode] = []
        for position, _ in enumerate(neighbours):
            lane = position % scan_lanes
            scan = builder.compute(
                ComputeOp.ADD_WIDE, lane, width=width,
                after=[lane_tail[lane]] if lane in lane_tail else [])
            if lane not in lane_tail:
                first_scans.append(scan)
            lane_tail[lane] = scan
        builder.feed_many(visit, first_scans, rows=rows)

        verdicts = [lane_tail[lane] for lane in sorted(lane_tail)]
        previous = builder.chain(ComputeOp.ADD_WIDE, frontier_lane,
                                 verdicts, width=width, rows=rows)

    return builder.build()


def build_random(seed: int, size: int = 20, lanes: int = 4) -> WorkloadDag:
    """Small random DAG of 4-bit LUT operations for property checks."""
    rng = random.Random(seed)
    builder = _DagBuilder(f'random_{seed}')
    made: list[DagNode] = []
    ops = (ComputeOp.LUT4_ADD, ComputeOp.LUT4_MUL, ComputeOp.LUT_SHIFT,
           ComputeOp.AGGREGATE)

    for _ in range(size):
        fan_in = rng.randint(0, min(2, len(made)))
        inputs = rng.sample(made, fan_in) if fan_in else []
        made.append(builder.compute(rng.choice(ops), rng.randrange(lanes),
                                    after=inputs))

    return builder.build()


BUILDERS = {
    'wide_add': build_wide_add,
    'wide_mul': build_wide_mul,
    'ntt': build_ntt,
    'mm': build_mm,
    'pmm': build_pmm,
    'bfs': lambda size: build_graph_search(size, SearchKind.BFS),
    'dfs': lambda size: build_graph_search(size, SearchKind.DFS),
}
