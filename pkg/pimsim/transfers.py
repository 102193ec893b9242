"""
Cost and occupancy models for inter-subarray copies: memcpy over the
channel, Rowclone (intra / inter subarray), LISA row-buffer movement and the
Shared-PIM bank bus.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .exceptions import (BroadcastLimitError, ConfigError, CrossBankError,
                         OutOfRangeError, UnstagedBroadcastError)
from .geometry import Geometry, RowAddress, RowKind
from .timing import (Command, CommandKind, RbmTarget, TimingParams,
                     aap_latency)


class Mechanism(str, Enum):
    MEMCPY_CHANNEL = 'memcpy'
    ROWCLONE_INTRA_SA = 'rc_intra'
    ROWCLONE_INTER_SA = 'rc_inter'
    LISA_RISC = 'lisa'
    SHARED_PIM_BUS = 'sharedpim'

    @classmethod
    def parse(cls, raw: str) -> Mechanism:
        key = raw.strip().lower().replace('-', '').replace('_', '')
        for member in cls:
            if key in (member.value.replace('_', ''),
                       member.name.lower().replace('_', '')):
                return member
        raise ConfigError(f'unknown mechanism {raw!r}')


class SlotMode(str, Enum):
    IDLE = 'Idle'
    LOCAL_ACTIVE = 'LocalActive'
    GLOBAL_ACTIVE = 'GlobalActive'


@dataclass(frozen=True)
class MechanismParams:
    """Calibrated copy constants for one 8 KB row."""

    lisa_base_ns: float = 260.5
    lisa_extra_hop_ns: float = 9.0
    memcpy_ns: float = 1366.25
    rc_inter_ns: float = 1363.75
    max_broadcast: int = 4

    def validate(self) -> None:
        for item in dataclasses.fields(self):
            if getattr(self, item.name) < 0:
                raise ConfigError(f'{item.name} must not be negative')
        if self.max_broadcast < 1:
            raise ConfigError('max_broadcast must be at least 1')


@dataclass(frozen=True)
class ResourceClaim:
    """
    Resources a transaction holds for duration_ns. Stalled subarrays cannot
    compute; busy subarrays run the transaction on their own bitlines.
    """

    bank: int
    duration_ns: float
    stalled_subarrays: frozenset[int] = frozenset()
    busy_subarrays: frozenset[int] = frozenset()
    busy_bus_segments: frozenset[int] = frozenset()
    busy_shared_rows: frozenset[tuple[int, int]] = frozenset()
    shared_row_mode: SlotMode = SlotMode.IDLE
    uses_bank_io: bool = False
    blocks_compute_at_endpoints: bool = False
    label: str = ''

    def subarrays(self) -> frozenset[int]:
        return self.stalled_subarrays | self.busy_subarrays


@dataclass(frozen=True)
class CopyRequest:
    mechanism: Mechanism
    src: RowAddress
    dsts: tuple[RowAddress, ...]
    staged: bool = True

    @classmethod
    def single(cls, mechanism: Mechanism, src: RowAddress, dst: RowAddress,
               *, staged: bool = True) -> CopyRequest:
        return cls(mechanism, src, (dst,), staged)


@dataclass(frozen=True)
class ClaimStep:
    offset_ns: float
    claim: ResourceClaim


BANK_LOCAL = (
    Mechanism.LISA_RISC,
    Mechanism.SHARED_PIM_BUS,
    Mechanism.ROWCLONE_INTRA_SA,
)


def _check_request(req: CopyRequest, g: Geometry,
                   m: MechanismParams) -> None:
    if not req.dsts:
        raise ConfigError('a copy needs at least one destination')

    g.validate_address(req.src)
    for dst in req.dsts:
        g.validate_address(dst)

    if req.mechanism == Mechanism.SHARED_PIM_BUS:
        if len(req.dsts) > m.max_broadcast:
            raise BroadcastLimitError(
                f'{len(req.dsts)} destinations exceed the broadcast limit '
                f'of {m.max_broadcast}')
        if len(req.dsts) > 1 and not req.staged:
            raise UnstagedBroadcastError(
                'broadcast needs the source staged in a shared row; '
                'stage it first and unstage each destination separately')
    elif len(req.dsts) != 1:
        raise ConfigError(
            f'{req.mechanism.value} copies exactly one destination')

    if req.mechanism in BANK_LOCAL:
        for dst in req.dsts:
            if dst.bank != req.src.bank:
                raise CrossBankError(
                    f'{req.mechanism.value} cannot copy from bank '
                    f'{req.src.bank} to bank {dst.bank}')

    if req.mechanism == Mechanism.ROWCLONE_INTRA_SA and (
            req.dsts[0].subarray != req.src.subarray):
        raise OutOfRangeError('rc_intra copies within one subarray only')


def lisa_latency(distance: int, t: TimingParams,
                 m: MechanismParams) -> float:
    if distance == 0:
        return aap_latency(t)
    return m.lisa_base_ns + (distance - 1) * m.lisa_extra_hop_ns


def copy_latency(req: CopyRequest, g: Geometry, t: TimingParams,
                 m: MechanismParams | None = None) -> float:
    """
    Latency in ns of a single copy transaction.

    Raises:
        CrossBankError: for bank-local mechanisms asked to leave the bank.
        BroadcastLimitError: for broadcasts beyond the destination limit.
        UnstagedBroadcastError: for broadcasts of unstaged data.
    """
    m = m or MechanismParams()
    _check_request(req, g, m)

    match req.mechanism:
        case Mechanism.MEMCPY_CHANNEL:
            return m.memcpy_ns
        case Mechanism.ROWCLONE_INTER_SA:
            return m.rc_inter_ns
        case Mechanism.ROWCLONE_INTRA_SA:
            return aap_latency(t)
        case Mechanism.LISA_RISC:
            return lisa_latency(
                g.distance(req.src.subarray, req.dsts[0].subarray), t, m)
        case Mechanism.SHARED_PIM_BUS:
            if req.staged:
                return aap_latency(t)
            # stage to the shared row, cross the bus, unstage at the target
            return 3 * aap_latency(t)

    raise ConfigError(f'unhandled mechanism {req.mechanism}')


def _slot(g: Geometry, address: RowAddress, fallback: int) -> int:
    if g.is_shared_row(address.row):
        return g.shared_slot(address.row)
    return fallback


def transmit_slot(g: Geometry) -> int:
    return 0


def receive_slot(g: Geometry) -> int:
    return g.shared_rows - 1


def occupancy_steps(req: CopyRequest, g: Geometry, t: TimingParams,
                    m: MechanismParams | None = None) -> list[ClaimStep]:
    """
    Claims a copy takes, in issue order. Every mechanism is one step except
    the unstaged Shared-PIM path, which stages, crosses the bus and unstages.
    """
    m = m or MechanismParams()
    duration = copy_latency(req, g, t, m)
    bank = req.src.bank
    src = req.src.subarray
    dst_subarrays = [dst.subarray for dst in req.dsts]
    label = req.mechanism.value

    match req.mechanism:
        case Mechanism.LISA_RISC:
            # both half-row RBM passes folded into one claim
            low, high = sorted((src, dst_subarrays[0]))
            return [ClaimStep(0.0, ResourceClaim(
                bank=bank,
                duration_ns=duration,
                stalled_subarrays=frozenset(range(low, high + 1)),
                blocks_compute_at_endpoints=True,
                label=label,
            ))]
        case Mechanism.ROWCLONE_INTRA_SA:
            return [ClaimStep(0.0, ResourceClaim(
                bank=bank, duration_ns=duration,
                stalled_subarrays=frozenset({src}),
                blocks_compute_at_endpoints=True, label=label))]
        case Mechanism.ROWCLONE_INTER_SA | Mechanism.MEMCPY_CHANNEL:
            endpoints = frozenset({src, *dst_subarrays})
            return [ClaimStep(0.0, ResourceClaim(
                bank=bank, duration_ns=duration,
                stalled_subarrays=endpoints,
                uses_bank_io=True,
                blocks_compute_at_endpoints=True, label=label))]

    aap = aap_latency(t)
    src_slot = _slot(g, req.src, transmit_slot(g))
    rows = frozenset({(src, src_slot)} | {
        (dst.subarray, _slot(g, dst, receive_slot(g))) for dst in req.dsts})
    bus_claim = ResourceClaim(
        bank=bank,
        duration_ns=aap,
        busy_bus_segments=g.bus_segments,
        busy_shared_rows=rows,
        shared_row_mode=SlotMode.GLOBAL_ACTIVE,
        label=label,
    )
    if req.staged:
        return [ClaimStep(0.0, bus_claim)]

    dst = req.dsts[0]
    stage = ResourceClaim(
        bank=bank, duration_ns=aap, busy_subarrays=frozenset({src}),
        busy_shared_rows=frozenset({(src, src_slot)}),
        shared_row_mode=SlotMode.LOCAL_ACTIVE, label=f'{label}:stage')
    dst_slot = _slot(g, dst, receive_slot(g))
    unstage = ResourceClaim(
        bank=bank, duration_ns=aap, busy_subarrays=frozenset(
            {dst.subarray}),
        busy_shared_rows=frozenset({(dst.subarray, dst_slot)}),
        shared_row_mode=SlotMode.LOCAL_ACTIVE, label=f'{label}:unstage')

    return [ClaimStep(0.0, stage), ClaimStep(aap, bus_claim),
            ClaimStep(2 * aap, unstage)]


def scaled(steps: Sequence[ClaimStep], rows: int) -> list[ClaimStep]:
    """
    Steps of a move copying several rows back to back: every offset and
    duration grows by the row count.
    """
    if rows == 1:
        return list(steps)
    return [ClaimStep(step.offset_ns * rows, dataclasses.replace(
        step.claim, duration_ns=step.claim.duration_ns * rows))
        for step in steps]


def occupancy(req: CopyRequest, g: Geometry, t: TimingParams,
              m: MechanismParams | None = None) -> ResourceClaim:
    """The folded claim of a copy, spanning its whole duration."""
    steps = occupancy_steps(req, g, t, m)
    if len(steps) == 1:
        return steps[0].claim

    first = steps[0].claim
    duration = max(step.offset_ns + step.claim.duration_ns for step in steps)
    return dataclasses.replace(
        first,
        duration_ns=duration,
        stalled_subarrays=frozenset().union(
            *(step.claim.stalled_subarrays for step in steps)),
        busy_subarrays=frozenset().union(
            *(step.claim.busy_subarrays for step in steps)),
        busy_bus_segments=frozenset().union(
            *(step.claim.busy_bus_segments for step in steps)),
        busy_shared_rows=frozenset().union(
            *(step.claim.busy_shared_rows for step in steps)),
        shared_row_mode=SlotMode.GLOBAL_ACTIVE,
        label=req.mechanism.value,
    )


def broadcast_claim(src: RowAddress, dsts: Sequence[RowAddress],
                    g: Geometry, t: TimingParams,
                    m: MechanismParams | None = None
                    ) -> tuple[float, ResourceClaim]:
    """
    One bus transaction from a staged source to up to max_broadcast shared
    rows; the duration does not depend on the number of destinations.
    """
    m = m or MechanismParams()
    if not dsts:
        raise ConfigError('a broadcast needs at least one destination')
    if len(dsts) > m.max_broadcast:
        raise BroadcastLimitError(
            f'{len(dsts)} destinations exceed the broadcast limit of '
            f'{m.max_broadcast}')
    for row in (src, *dsts):
        if not g.is_shared_row(row.row):
            raise ConfigError(
                f'broadcast endpoint {row} is not a shared row')

    req = CopyRequest(Mechanism.SHARED_PIM_BUS, src, tuple(dsts), True)
    duration = copy_latency(req, g, t, m)
    return duration, occupancy(req, g, t, m)


def command_sequence(req: CopyRequest, g: Geometry, t: TimingParams,
                     m: MechanismParams | None = None) -> list[Command]:
    """Commands a copy issues, relative to its start."""
    m = m or MechanismParams()
    duration = copy_latency(req, g, t, m)
    src = req.src
    aap = aap_latency(t)

    def aap_pair(first: RowAddress, seconds: Sequence[RowAddress],
                 kind: CommandKind, start: float) -> list[Command]:
        cmds = [Command(kind, first, start)]
        cmds += [Command(kind, row, start + t.aap_offset_ns)
                 for row in seconds]
        cmds.append(Command(CommandKind.PRECHARGE, first,
                            start + t.aap_offset_ns + t.t_ras_ns))
        return cmds

    match req.mechanism:
        case Mechanism.ROWCLONE_INTRA_SA:
            return aap_pair(src, req.dsts, CommandKind.ACTIVATE, 0.0)

        case Mechanism.SHARED_PIM_BUS:
            src_shared = src if g.is_shared_row(src.row) else g.shared_row(
                src.bank, src.subarray, transmit_slot(g))
            dst_shared = [
                dst if g.is_shared_row(dst.row) else g.shared_row(
                    dst.bank, dst.subarray, receive_slot(g))
                for dst in req.dsts]
            bus = aap_pair(src_shared.as_global(),
                           [dst.as_global() for dst in dst_shared],
                           CommandKind.GWL_ACTIVATE, 0.0)
            if req.staged:
                return bus
            stage = aap_pair(src, [src_shared.as_local()],
                             CommandKind.ACTIVATE, 0.0)
            unstage = aap_pair(dst_shared[0].as_local(), req.dsts,
                               CommandKind.ACTIVATE, 2 * aap)
            bus = aap_pair(src_shared.as_global(),
                           [dst.as_global() for dst in dst_shared],
                           CommandKind.GWL_ACTIVATE, aap)
            return stage + bus + unstage

        case Mechanism.LISA_RISC:
            dst = req.dsts[0]
            if dst.subarray == src.subarray:
                return aap_pair(src, [dst], CommandKind.ACTIVATE, 0.0)
            hops = g.distance(src.subarray, dst.subarray)
            close = duration - t.t_rp_ns
            cmds = [Command(CommandKind.ACTIVATE, src, 0.0),
                    Command(CommandKind.ACTIVATE, dst, t.t_rcd_ns)]
            # two half-row passes, each one RBM per hop
            rbm_count = 2 * hops
            window = close - t.t_rcd_ns
            step = window / (rbm_count + 1)
            direction = 1 if dst.subarray > src.subarray else -1
            for i in range(rbm_count):
                hop = i % hops
                cmds.append(Command(CommandKind.RBM, RbmTarget(
                    src.bank,
                    src.subarray + direction * hop,
                    src.subarray + direction * (hop + 1),
                ), t.t_rcd_ns + step * (i + 1)))
            cmds += [Command(CommandKind.PRECHARGE, src, close),
                     Command(CommandKind.PRECHARGE, dst, close)]
            return sorted(cmds, key=lambda cmd: cmd.issue_time_ns)

    # row copy through a column interface: open both rows, stream the
    # bursts, close both rows
    dst = req.dsts[0]
    close = duration - t.t_rp_ns
    cmds = [Command(CommandKind.ACTIVATE, src, 0.0),
            Command(CommandKind.ACTIVATE, dst, 0.0)]
    bursts = 8
    step = (close - t.t_rcd_ns) / (bursts + 1)
    for i in range(bursts):
        when = t.t_rcd_ns + step * i
        cmds.append(Command(CommandKind.READ, src, when))
        cmds.append(Command(CommandKind.WRITE, dst, when))
    cmds += [Command(CommandKind.PRECHARGE, src, close),
             Command(CommandKind.PRECHARGE, dst, close)]
    return sorted(cmds, key=lambda cmd: cmd.issue_time_ns)
