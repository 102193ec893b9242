"""
Deterministic list scheduler. Places a workload DAG on subarrays, asks the
transfer models what each move costs and holds, and books everything
through the per-bank controller. The result is a Timeline of tagged
intervals from which Metrics are derived.
"""
from __future__ import annotations

import dataclasses
import heapq
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Sequence

from .controller import (AuditFinding, BankState, Conflict, Grant,
                         audit_grants, find_slot, release, reserve)
from .energy import PowerModel, copy_energy
from .exceptions import (CapacityError, ConfigError, CrossBankError,
                         DeadlockError, IncomparablePlatformsError,
                         SimulationError)
from .geometry import FabricConfig, Geometry, RowAddress, RowKind, \
    validate_config
from .timing import EPSILON_NS, TimingParams, aap_latency, preset
from .transfers import (BANK_LOCAL, ClaimStep, CopyRequest, Mechanism,
                        MechanismParams, ResourceClaim, SlotMode,
                        copy_latency, occupancy, occupancy_steps,
                        receive_slot, scaled, transmit_slot)
from .workloads import (ComputeOp, DagNode, WorkloadDag, build_wide_add,
                        build_wide_mul)

logger = logging.getLogger(__name__)

# wide-op costs kept per (op, width, platform)
COMPOSITE_CACHE_SIZE = 64

SCHEDULABLE = (
    Mechanism.LISA_RISC,
    Mechanism.SHARED_PIM_BUS,
    Mechanism.ROWCLONE_INTER_SA,
    Mechanism.MEMCPY_CHANNEL,
)


@dataclass(frozen=True)
class Platform:
    """
    Everything a run depends on. plut_op_4bit_ns defaults to two row
    cycles, one LUT query each for selecting and reading the result.
    """

    geometry: Geometry
    timing: TimingParams
    mechanism: Mechanism
    mechanism_params: MechanismParams = field(
        default_factory=MechanismParams)
    power: PowerModel = field(default_factory=PowerModel.calibrated)
    plut_op_4bit_ns: float | None = None
    full_parallelism: bool = False

    @classmethod
    def build(cls, mechanism: Mechanism | str,
              cfg: FabricConfig | None = None, **kwargs) -> Platform:
        cfg = cfg or FabricConfig()
        if isinstance(mechanism, str):
            mechanism = Mechanism.parse(mechanism)
        platform = cls(validate_config(cfg), preset(cfg.timing_grade),
                       mechanism, **kwargs)
        platform.validate()
        return platform

    @property
    def op_ns(self) -> float:
        if self.plut_op_4bit_ns is None:
            return 2 * self.timing.t_rc_ns
        return self.plut_op_4bit_ns

    def with_mechanism(self, mechanism: Mechanism) -> Platform:
        return dataclasses.replace(self, mechanism=mechanism)

    def validate(self) -> None:
        if self.mechanism not in SCHEDULABLE:
            raise ConfigError(
                f'{self.mechanism.value} cannot move data between '
                f'subarrays')
        self.timing.validate()
        self.mechanism_params.validate()
        self.power.validate()
        if self.op_ns <= 0:
            raise ConfigError('plut_op_4bit_ns must be positive')

    def comparable_with(self, other: Platform) -> bool:
        return (self.geometry, self.timing, self.mechanism_params,
                self.power, self.op_ns, self.full_parallelism) == (
            other.geometry, other.timing, other.mechanism_params,
            other.power, other.op_ns, other.full_parallelism)


class Tag(str, Enum):
    BUSY = 'Busy'
    STALL = 'Stall'
    NOP = 'Nop'
    IDLE = 'Idle'


@dataclass(frozen=True)
class Interval:
    resource: str
    start_ns: float
    end_ns: float
    tag: Tag
    node_id: int | None = None

    @property
    def duration_ns(self) -> float:
        return self.end_ns - self.start_ns


@dataclass
class Timeline:
    dag: WorkloadDag
    mechanism: Mechanism
    geometry: Geometry
    intervals: list[Interval]
    node_start: dict[int, float]
    node_end: dict[int, float]
    grants: list[tuple[int, Grant]]
    move_grants: list[tuple[int, Grant]]
    staged_moves: frozenset[int]
    compute_busy_ns: float
    used_subarrays: frozenset[tuple[int, int]]
    lower_bound_ns: float

    @property
    def makespan_ns(self) -> float:
        return max(self.node_end.values(), default=0.0)

    def by_resource(self) -> dict[str, list[Interval]]:
        lanes: dict[str, list[Interval]] = {}
        for interval in self.intervals:
            lanes.setdefault(interval.resource, []).append(interval)
        return lanes


@dataclass(frozen=True)
class Metrics:
    makespan_ns: float
    transfer_energy_uj: float
    stall_ns: float
    nop_ns: float
    subarray_utilization: float
    move_count: int
    compute_count: int
    lower_bound_ns: float = 0.0


def subarray_resource(bank: int, subarray: int) -> str:
    return f'b{bank}/sa{subarray}'


def _assign_lanes(dag: WorkloadDag,
                  default_width: int) -> dict[int, tuple[int, int]]:
    """(group, lane) per node; unplaced computes go to the least-loaded lane."""
    widths = dag.lanes_per_group()
    load: dict[int, list[int]] = {}
    lanes: dict[int, tuple[int, int]] = {}

    for node_id in dag.topological_order():
        node = dag.by_id[node_id]
        lane = node.preferred_subarray
        if lane is None and node.is_move and dag.predecessors[node_id]:
            lane = lanes[dag.predecessors[node_id][0]][1]
        if lane is None:
            counts = load.setdefault(
                node.group, [0] * widths.get(node.group, default_width))
            lane = min(range(len(counts)), key=lambda i: (counts[i], i))
        counts = load.setdefault(
            node.group, [0] * widths.get(node.group, default_width))
        if lane >= len(counts):
            counts.extend([0] * (lane + 1 - len(counts)))
        counts[lane] += 1
        lanes[node_id] = (node.group, lane)

    return lanes


def _pack(widths: dict[int, int], g: Geometry) -> dict[int, tuple[int, int]]:
    """
    First-fit groups into banks in group order. Once every bank is full the
    packing wraps around and later groups share subarrays in time.
    """
    capacity = g.subarrays_per_bank
    origin: dict[int, tuple[int, int]] = {}
    bank = offset = 0
    for group in sorted(widths):
        width = widths[group]
        if width > capacity:
            raise CapacityError(
                f'group {group} needs {width} subarrays but a bank has '
                f'{capacity}; enable full parallelism to widen the bank')
        if offset + width > capacity:
            bank, offset = (bank + 1) % g.total_banks, 0
        origin[group] = (bank, offset)
        offset += width
    return origin


def place(dag: WorkloadDag,
          p: Platform) -> tuple[Geometry, dict[int, tuple[int, int]]]:
    """
    Map every node to (bank, subarray). With full parallelism each group
    gets its own bank, widened to the group's lane count.
    """
    lanes = _assign_lanes(dag, p.geometry.subarrays_per_bank)
    widths: dict[int, int] = {}
    for group, lane in lanes.values():
        widths[group] = max(widths.get(group, 0), lane + 1)

    g = p.geometry
    if p.full_parallelism:
        g = g.widen(subarrays_per_bank=max(widths.values(), default=1),
                    banks=len(widths))
        origin = {group: (index, 0)
                  for index, group in enumerate(sorted(widths))}
    else:
        origin = _pack(widths, g)

    return g, {
        node_id: (origin[group][0], origin[group][1] + lane)
        for node_id, (group, lane) in lanes.items()
    }


def _grant_energy(claim: ResourceClaim, mechanism: Mechanism,
                  pm: PowerModel) -> float:
    if mechanism != Mechanism.SHARED_PIM_BUS:
        return copy_energy(mechanism, claim.duration_ns, pm)
    if claim.busy_bus_segments:
        # every destination row latches the bus; the source row is one of
        # the claimed shared rows
        destinations = max(1, len(claim.busy_shared_rows) - 1)
        return destinations * copy_energy(Mechanism.SHARED_PIM_BUS,
                                          claim.duration_ns, pm)
    # staging and unstaging are local AAPs inside one subarray
    return copy_energy(Mechanism.ROWCLONE_INTRA_SA, claim.duration_ns, pm)


class _Engine:
    def __init__(self, dag: WorkloadDag, p: Platform) -> None:
        self.dag = dag
        self.p = p
        self.geometry, self.placement = place(dag, p)
        self.banks: dict[int, BankState] = {}
        self.active: list[tuple[float, int, int]] = []
        self.grants: list[tuple[int, Grant]] = []
        self.move_grants: list[tuple[int, Grant]] = []
        self.intervals: list[Interval] = []
        self.start: dict[int, float] = {}
        self.end: dict[int, float] = {}
        self.floor: dict[int, float] = {}
        self.slot_free_at: dict[tuple[int, int], float] = {}
        self.staged: set[int] = set()
        self.compute_busy = 0.0
        self.subarray_lanes: set[tuple[int, int]] = set()
        self.compute_at: dict[tuple[str, float], int] = {}
        self.heap: list[tuple[float, int]] = []
        self.pending: dict[tuple[int, int], float] = {}
        self.readers: dict[int, list[tuple[int, int]]] = {}
        self.deferred: dict[tuple[int, int], list[tuple[float, int]]] = {}

    def _bank(self, bank: int) -> BankState:
        if bank not in self.banks:
            self.banks[bank] = BankState(bank, self.geometry)
        return self.banks[bank]

    def _prune(self, now: float) -> None:
        """Grants ending by the current ready time can never block again."""
        while self.active and self.active[0][0] <= now + EPSILON_NS:
            _, bank, grant_id = heapq.heappop(self.active)
            st = self.banks[bank]
            release(st.grants[grant_id], now, st)

    def _grant(self, bank: int, claim: ResourceClaim, at: float) -> Grant:
        st = self._bank(bank)
        outcome = reserve(claim, at, st)
        if isinstance(outcome, Conflict):
            raise SimulationError(
                f'{claim.label} at {at:.2f} ns hit {outcome.kind.value} on '
                f'{outcome.resource} in bank {bank}')
        heapq.heappush(self.active, (outcome.end_ns, bank, outcome.grant_id))
        self.grants.append((bank, outcome))
        return outcome

    def _reserve(self, bank: int, steps: Sequence[ClaimStep],
                 at: float) -> tuple[float, list[Grant]]:
        """Earliest start at or after `at` where every step is granted."""
        start = find_slot(steps, at, self._bank(bank))
        if start > at + EPSILON_NS:
            logger.debug('%s deferred %.2f ns', steps[0].claim.label,
                         start - at)
        return start, [self._grant(bank, step.claim, start + step.offset_ns)
                       for step in steps]

    def _push(self, ready: float, node_id: int) -> None:
        heapq.heappush(self.heap, (ready, node_id))

    def run(self) -> Timeline:
        waiting = {node.id: len(self.dag.predecessors[node.id])
                   for node in self.dag.nodes}
        ready_at = dict.fromkeys(waiting, 0.0)
        self.heap = [(0.0, node_id) for node_id, count in waiting.items()
                     if count == 0]
        heapq.heapify(self.heap)

        while self.heap:
            ready, node_id = heapq.heappop(self.heap)
            self._prune(ready)
            node = self.dag.by_id[node_id]
            if node.is_move:
                if not self._schedule_move(node, ready):
                    continue
            else:
                self._schedule_compute(node, ready)

            for succ in self.dag.successors[node_id]:
                ready_at[succ] = max(ready_at[succ], self.end[node_id])
                waiting[succ] -= 1
                if waiting[succ] == 0:
                    self._push(ready_at[succ], succ)

        if len(self.end) != len(self.dag.nodes):
            raise DeadlockError(
                f'{self.dag.label}: {len(self.dag.nodes) - len(self.end)} '
                f'nodes never became ready')

        return self._timeline()

    def _compute_cost(self, node: DagNode) -> float:
        if node.op.is_composite:
            return composite_cost(node.op, node.width, self.p)[0]
        return self.p.op_ns

    def _schedule_compute(self, node: DagNode, ready: float) -> None:
        bank, subarray = self.placement[node.id]
        duration = self._compute_cost(node)
        claim = ResourceClaim(bank=bank, duration_ns=duration,
                              busy_subarrays=frozenset({subarray}),
                              label=node.token())
        start, (grant,) = self._reserve(bank, [ClaimStep(0.0, claim)], ready)

        self._record(bank, grant, node.id)
        self.compute_at[(subarray_resource(bank, subarray), start)] = node.id
        self.start[node.id] = start
        self.end[node.id] = grant.end_ns
        self.floor[node.id] = duration
        self.compute_busy += duration
        logger.debug('node %s %s on %s/%s at %.2f ns', node.id, node.token(),
                     bank, subarray, start)
        self._hold_operands(node, ready)

    def _hold_operands(self, node: DagNode, ready: float) -> None:
        """
        An operand read straight from a receive row keeps that row until
        the reading compute ends; moves waiting for the row go back on the
        ready heap.
        """
        for key in self.readers.pop(node.id, []):
            delivered_at = self.pending.pop(key)
            bank, subarray = key
            claim = ResourceClaim(
                bank=bank, duration_ns=self.end[node.id] - delivered_at,
                busy_shared_rows=frozenset(
                    {(subarray, receive_slot(self.geometry))}),
                shared_row_mode=SlotMode.LOCAL_ACTIVE,
                label=f'{node.token()}:hold')
            self._record(bank, self._grant(bank, claim, delivered_at),
                         node.id)
            for move_ready, move_id in self.deferred.pop(key, []):
                self._push(max(move_ready, ready), move_id)

    def _targets(self, node: DagNode) -> list[tuple[int, int]]:
        bank, _ = self.placement[node.id]
        targets = sorted({self.placement[succ]
                          for succ in self.dag.successors[node.id]})
        if self.p.mechanism in BANK_LOCAL:
            for dst_bank, _ in targets:
                if dst_bank != bank:
                    raise CrossBankError(
                        f'move {node.id} crosses from bank {bank} to bank '
                        f'{dst_bank} under {self.p.mechanism.value}')
        return targets

    def _schedule_move(self, node: DagNode, ready: float) -> bool:
        """Book a move; False when it has to wait for a receive row."""
        targets = self._targets(node)
        if self.p.mechanism == Mechanism.SHARED_PIM_BUS:
            return self._schedule_bus_move(
                node, [dst for _, dst in targets], ready)
        self._schedule_copies(node, targets, ready)
        return True

    def _schedule_copies(self, node: DagNode,
                         targets: list[tuple[int, int]],
                         ready: float) -> None:
        """One copy per destination, issued back to back from the source."""
        g, mech = self.geometry, self.p.mechanism
        bank, src = self.placement[node.id]
        at = ready
        first: float | None = None
        floor = None

        for dst_bank, dst in targets:
            req = CopyRequest.single(mech, g.regular_row(bank, src),
                                     g.regular_row(dst_bank, dst))
            latency = node.size_rows * copy_latency(
                req, g, self.p.timing, self.p.mechanism_params)
            floor = latency if floor is None else min(floor, latency)
            steps = scaled(occupancy_steps(req, g, self.p.timing,
                                           self.p.mechanism_params),
                           node.size_rows)
            start, grants = self._reserve(bank, steps, at)
            first = start if first is None else first
            for grant in grants:
                self._record(bank, grant, node.id)
                self.move_grants.append((node.id, grant))
            at = max(grant.end_ns for grant in grants)

        self.start[node.id] = ready if first is None else first
        self.end[node.id] = at
        self.floor[node.id] = floor or 0.0

    def _bus_rows(self, bank: int, src: int, dsts: Sequence[int]
                  ) -> tuple[RowAddress, tuple[RowAddress, ...]]:
        g = self.geometry
        src_row = g.shared_row(bank, src, transmit_slot(g),
                               RowKind.SHARED_GLOBAL)
        dst_rows = tuple(g.shared_row(bank, dst, receive_slot(g),
                                      RowKind.SHARED_GLOBAL) for dst in dsts)
        return src_row, dst_rows

    def _unstaged_steps(self, src_row: RowAddress,
                        dst_rows: tuple[RowAddress, ...]) -> list[ClaimStep]:
        """Stage once, cross the bus once, unstage at every destination."""
        g, t, m = self.geometry, self.p.timing, self.p.mechanism_params
        singles = [
            occupancy_steps(CopyRequest.single(
                Mechanism.SHARED_PIM_BUS, src_row, dst, staged=False),
                g, t, m)
            for dst in dst_rows
        ]
        stage, bus, _ = singles[0]
        if len(dst_rows) > 1:
            bus = ClaimStep(bus.offset_ns, occupancy(
                CopyRequest(Mechanism.SHARED_PIM_BUS, src_row, dst_rows),
                g, t, m))
        return [stage, bus, *(steps[2] for steps in singles)]

    def _direct_reader(self, node: DagNode, bank: int,
                       subarray: int) -> int | None:
        """
        The compute that may read the delivered row in place: the only
        consumer on that subarray, with every other operand already booked.
        """
        consumers = [succ for succ in self.dag.successors[node.id]
                     if self.placement[succ] == (bank, subarray)]
        if len(consumers) != 1 or self.dag.by_id[consumers[0]].is_move:
            return None
        reader = consumers[0]
        if all(pred in self.end for pred in self.dag.predecessors[reader]
               if pred != node.id):
            return reader
        return None

    def _drain(self, bank: int, subarray: int) -> ResourceClaim:
        return ResourceClaim(
            bank=bank, duration_ns=aap_latency(self.p.timing),
            busy_subarrays=frozenset({subarray}),
            busy_shared_rows=frozenset(
                {(subarray, receive_slot(self.geometry))}),
            shared_row_mode=SlotMode.LOCAL_ACTIVE,
            label=f'{Mechanism.SHARED_PIM_BUS.value}:unstage')

    def _schedule_bus_move(self, node: DagNode, dsts: list[int],
                           ready: float) -> bool:
        """
        The producer writes straight into its transmit row when that row
        has been emptied by the time the result is ready; otherwise the
        result sits in a regular row and takes the full three-step path.
        A delivered row is either read in place by its one consumer, which
        then holds it until it finishes, or drained into a regular row
        right after the bus transaction. A move never lands in a receive
        row that still holds an unread operand.
        """
        bank, src = self.placement[node.id]
        for subarray in dsts:
            if (bank, subarray) in self.pending:
                self.deferred.setdefault((bank, subarray), []).append(
                    (ready, node.id))
                logger.debug('move %s waits for row %s.%s', node.id,
                             subarray, receive_slot(self.geometry))
                return False

        key = (bank, src)
        free_at = self.slot_free_at.get(key, 0.0)
        staged = free_at <= ready + EPSILON_NS
        src_row, dst_rows = self._bus_rows(bank, src, dsts)
        g, t, m = self.geometry, self.p.timing, self.p.mechanism_params
        st = self._bank(bank)
        floor = max([ready, free_at] + [
            st.busy_until(('row', subarray, receive_slot(g)))
            for subarray in dsts])

        readers: dict[int, int] = {}
        if staged:
            steps = occupancy_steps(
                CopyRequest(Mechanism.SHARED_PIM_BUS, src_row, dst_rows),
                g, t, m)
            for subarray in dsts:
                reader = self._direct_reader(node, bank, subarray)
                if reader is None:
                    steps.append(ClaimStep(aap_latency(t),
                                           self._drain(bank, subarray)))
                else:
                    readers[subarray] = reader
            self.staged.add(node.id)
        else:
            steps = self._unstaged_steps(src_row, dst_rows)

        start, grants = self._reserve(bank, scaled(steps, node.size_rows),
                                      floor)
        for grant in grants:
            self._record(bank, grant, node.id)
            self.move_grants.append((node.id, grant))

        delivered_at = max(grant.end_ns for grant in grants
                           if grant.claim.busy_bus_segments)
        for subarray, reader in readers.items():
            self.pending[(bank, subarray)] = delivered_at
            self.readers.setdefault(reader, []).append((bank, subarray))

        self.slot_free_at[key] = delivered_at
        self.start[node.id] = start
        self.end[node.id] = max(grant.end_ns for grant in grants)
        self.floor[node.id] = node.size_rows * aap_latency(t)
        return True

    def _lower_bound(self) -> float:
        longest: dict[int, float] = {}
        for node_id in self.dag.topological_order():
            longest[node_id] = self.floor[node_id] + max(
                (longest[pred] for pred in self.dag.predecessors[node_id]),
                default=0.0)
        return max(longest.values(), default=0.0)

    def _gap_tag(self, following: Interval) -> Tag:
        """A subarray waiting on data that a move delivers is a NOP."""
        node_id = self.compute_at.get((following.resource,
                                       following.start_ns))
        if node_id is None:
            return Tag.IDLE
        for pred in self.dag.predecessors[node_id]:
            if self.dag.by_id[pred].is_move and abs(
                    self.end[pred] - following.start_ns) <= EPSILON_NS:
                return Tag.NOP
        return Tag.IDLE

    def _fill_gaps(self, makespan: float) -> list[Interval]:
        lanes: dict[str, list[Interval]] = {}
        for interval in self.intervals:
            lanes.setdefault(interval.resource, []).append(interval)

        gaps: list[Interval] = []
        for bank, subarray in sorted(self.subarray_lanes):
            resource = subarray_resource(bank, subarray)
            cursor = 0.0
            for interval in sorted(lanes.get(resource, []),
                                   key=lambda item: item.start_ns):
                if interval.start_ns > cursor + EPSILON_NS:
                    tag = self._gap_tag(interval)
                    gaps.append(Interval(
                        resource, cursor, interval.start_ns, tag,
                        interval.node_id if tag == Tag.NOP else None))
                cursor = max(cursor, interval.end_ns)
            if makespan > cursor + EPSILON_NS:
                gaps.append(Interval(resource, cursor, makespan, Tag.IDLE))
        return gaps

    def _timeline(self) -> Timeline:
        makespan = max(self.end.values(), default=0.0)
        intervals = self.intervals + self._fill_gaps(makespan)
        intervals.sort(key=lambda item: (item.resource, item.start_ns,
                                         item.end_ns, item.tag.value))
        return Timeline(
            dag=self.dag,
            mechanism=self.p.mechanism,
            geometry=self.geometry,
            intervals=intervals,
            node_start=self.start,
            node_end=self.end,
            grants=self.grants,
            move_grants=self.move_grants,
            staged_moves=frozenset(self.staged),
            compute_busy_ns=self.compute_busy,
            used_subarrays=frozenset(self.subarray_lanes),
            lower_bound_ns=self._lower_bound(),
        )


def simulate(dag: WorkloadDag, p: Platform) -> Timeline:
    """
    List-schedule the DAG. Ready nodes are taken in (ready time, node id)
    order and each is booked at the earliest conflict-free instant, so two
    runs on equal inputs give equal timelines.

    Raises:
        CapacityError: if a group is wider than a bank and full parallelism
        is off.
        CrossBankError: if a bank-local mechanism would leave its bank.
    """
    p.validate()
    dag.validate()
    timeline = _Engine(dag, p).run()
    logger.debug('%s under %s: makespan %.2f ns', dag.label,
                 p.mechanism.value, timeline.makespan_ns)
    return timeline


@lru_cache(maxsize=COMPOSITE_CACHE_SIZE)
def composite_cost(op: ComputeOp, width: int,
                   p: Platform) -> tuple[float, float]:
    """Latency and transfer energy of one wide operation on this platform."""
    builder = build_wide_add if op == ComputeOp.ADD_WIDE else build_wide_mul
    sub = dataclasses.replace(p, full_parallelism=True)
    timeline = simulate(builder(width), sub)
    result = metrics(timeline, sub)
    logger.debug('%s/%s under %s costs %.2f ns, %.4f uJ', op.value, width,
                 p.mechanism.value, result.makespan_ns,
                 result.transfer_energy_uj)
    return result.makespan_ns, result.transfer_energy_uj


def metrics(tl: Timeline, p: Platform) -> Metrics:
    if tl.mechanism != p.mechanism:
        raise ConfigError(
            f'timeline was produced under {tl.mechanism.value}, not '
            f'{p.mechanism.value}')

    energy = sum(_grant_energy(grant.claim, p.mechanism, p.power)
                 for _, grant in tl.move_grants)
    energy += sum(composite_cost(node.op, node.width, p)[1]
                  for node in tl.dag.nodes
                  if not node.is_move and node.op.is_composite)

    stall = sum(item.duration_ns for item in tl.intervals
                if item.tag == Tag.STALL)
    nop = sum(item.duration_ns for item in tl.intervals
              if item.tag == Tag.NOP)
    makespan = tl.makespan_ns
    lanes = len(tl.used_subarrays)
    utilization = (tl.compute_busy_ns / (lanes * makespan)
                   if lanes and makespan > 0 else 0.0)

    return Metrics(
        makespan_ns=makespan,
        transfer_energy_uj=energy,
        stall_ns=stall,
        nop_ns=nop,
        subarray_utilization=min(utilization, 1.0),
        move_count=tl.dag.count(moves=True),
        compute_count=tl.dag.count(),
        lower_bound_ns=tl.lower_bound_ns,
    )


def audit_timeline(tl: Timeline) -> list[AuditFinding]:
    return audit_grants(tl.grants)


def percent_saving(base: float, new: float) -> float:
    if base <= 0:
        return 0.0
    return (1 - new / base) * 100


@dataclass(frozen=True)
class ComparisonRow:
    mechanism: Mechanism
    metrics: Metrics
    speedup_pct: float
    energy_saving_pct: float
    timeline: Timeline = field(repr=False, compare=False)


@dataclass(frozen=True)
class ComparisonReport:
    label: str
    baseline: Mechanism
    rows: tuple[ComparisonRow, ...]

    def row(self, mechanism: Mechanism) -> ComparisonRow:
        for row in self.rows:
            if row.mechanism == mechanism:
                return row
        raise KeyError(mechanism)


def run_platform(dag: WorkloadDag,
                 p: Platform) -> tuple[Platform, Timeline, Metrics]:
    timeline = simulate(dag, p)
    return p, timeline, metrics(timeline, p)


def compare(dag: WorkloadDag, platforms: Sequence[Platform],
            threads: int = 1) -> ComparisonReport:
    """
    Run one DAG on several platforms that differ only in mechanism.
    Percentages are relative to LISA when it is among them, otherwise to
    the first platform. With threads > 1 the platforms run in worker
    processes; each run is independent, so the result does not change.
    """
    if len(platforms) < 2:
        raise IncomparablePlatformsError('compare needs two platforms')
    reference = platforms[0]
    for other in platforms[1:]:
        if not reference.comparable_with(other):
            raise IncomparablePlatformsError(
                f'{other.mechanism.value} differs from '
                f'{reference.mechanism.value} in more than the mechanism')

    mechanisms = [p.mechanism for p in platforms]
    baseline = (Mechanism.LISA_RISC
                if Mechanism.LISA_RISC in mechanisms else mechanisms[0])

    if threads > 1:
        with ProcessPoolExecutor(
                max_workers=min(threads, len(platforms))) as pool:
            runs = list(pool.map(run_platform, [dag] * len(platforms),
                                 platforms))
    else:
        runs = [run_platform(dag, p) for p in platforms]
    base = next(result for p, _, result in runs if p.mechanism == baseline)

    return ComparisonReport(dag.label, baseline, tuple(
        ComparisonRow(
            p.mechanism, result,
            percent_saving(base.makespan_ns, result.makespan_ns),
            percent_saving(base.transfer_energy_uj,
                           result.transfer_energy_uj),
            timeline)
        for p, timeline, result in runs))
