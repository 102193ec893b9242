"""
MASA-style arbiter for one bank: grants or refuses resource claims, keeps
the two addresses of a shared row mutually exclusive and reports the
controller's tracking storage.
"""
from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .exceptions import DoubleReleaseError
from .geometry import Geometry
from .timing import EPSILON_NS
from .transfers import ClaimStep, ResourceClaim, SlotMode

logger = logging.getLogger(__name__)

TRACKING_BITS_PER_SUBARRAY = 11


class ConflictKind(str, Enum):
    SHARED_ROW_DUAL_ACCESS = 'SharedRowDualAccess'
    SHARED_ROW_BUSY = 'SharedRowBusy'
    BUS_BUSY = 'BusBusy'
    BANK_IO_BUSY = 'BankIoBusy'
    SUBARRAY_STALLED = 'SubarrayStalled'
    SUBARRAY_BUSY = 'SubarrayBusy'


class Use(str, Enum):
    STALL = 'stall'
    BUSY = 'busy'
    LOCAL = SlotMode.LOCAL_ACTIVE.value
    GLOBAL = SlotMode.GLOBAL_ACTIVE.value
    EXCLUSIVE = 'exclusive'


@dataclass(frozen=True)
class Grant:
    grant_id: int
    claim: ResourceClaim
    start_ns: float

    @property
    def end_ns(self) -> float:
        return self.start_ns + self.claim.duration_ns


@dataclass(frozen=True)
class Conflict:
    kind: ConflictKind
    retry_at_ns: float
    resource: tuple


@dataclass
class SubarrayState:
    active: bool = False
    raised_wordline: int | None = None
    column_command_owner: bool = False
    shared_slot_state: list[SlotMode] = field(default_factory=list)


@dataclass(frozen=True)
class Booking:
    grant: Grant
    use: Use

    @property
    def start_ns(self) -> float:
        return self.grant.start_ns

    @property
    def end_ns(self) -> float:
        return self.grant.end_ns


def _start_key(booking: Booking) -> float:
    return booking.start_ns


def _end_key(booking: Booking) -> float:
    return booking.end_ns


@dataclass
class BankState:
    """
    Reservations held in one bank. Each resource keeps a calendar of
    bookings sorted by start time; bookings on one resource never overlap,
    so the calendar is sorted by end time as well. A resource is a
    subarray ('sa', i), a bus segment ('seg', s), a shared row
    ('row', i, slot) or the bank's column data path ('io',).
    """

    bank: int
    geometry: Geometry
    calendars: dict[tuple, list[Booking]] = field(default_factory=dict)
    grants: dict[int, Grant] = field(default_factory=dict)
    next_grant_id: int = field(default=0, compare=False)

    def snapshot(self, at: float) -> list[SubarrayState]:
        """Per-subarray view at one instant."""
        states = [
            SubarrayState(shared_slot_state=[SlotMode.IDLE] *
                          self.geometry.shared_rows)
            for _ in range(self.geometry.subarrays_per_bank)
        ]
        for resource, calendar in self.calendars.items():
            booking = self.booking_at(resource, at)
            if booking is None:
                continue
            if resource[0] == 'sa':
                states[resource[1]].active = True
                states[resource[1]].column_command_owner = (
                    booking.grant.claim.uses_bank_io)
            elif resource[0] == 'row':
                state = states[resource[1]]
                state.active = True
                state.shared_slot_state[resource[2]] = SlotMode(
                    booking.use.value)
                state.raised_wordline = (
                    self.geometry.first_shared_row() + resource[2])
        return states

    def booking_at(self, resource: tuple, at: float) -> Booking | None:
        calendar = self.calendars.get(resource, [])
        index = bisect.bisect_right(calendar, at + EPSILON_NS, key=_end_key)
        if index < len(calendar) and (
                calendar[index].start_ns - EPSILON_NS <= at):
            return calendar[index]
        return None

    def busy_until(self, resource: tuple) -> float:
        """End of the last booking on a resource."""
        calendar = self.calendars.get(resource)
        return calendar[-1].end_ns if calendar else 0.0

    def first_overlap(self, resource: tuple, start: float,
                      end: float) -> Booking | None:
        """Earliest-ending booking that overlaps [start, end)."""
        calendar = self.calendars.get(resource, [])
        index = bisect.bisect_right(calendar, start + EPSILON_NS,
                                    key=_end_key)
        if index < len(calendar) and (
                calendar[index].start_ns < end - EPSILON_NS):
            return calendar[index]
        return None

    def next_fit(self, resource: tuple, at: float, duration: float) -> float:
        """Earliest start >= at where the resource is idle for duration."""
        calendar = self.calendars.get(resource, [])
        start = at
        index = bisect.bisect_right(calendar, start + EPSILON_NS,
                                    key=_end_key)
        for booking in calendar[index:]:
            if booking.start_ns >= start + duration - EPSILON_NS:
                break
            start = max(start, booking.end_ns)
        return start

    def book(self, grant: Grant, resource: tuple, use: Use) -> None:
        bisect.insort(self.calendars.setdefault(resource, []),
                      Booking(grant, use), key=_start_key)

    def unbook(self, grant: Grant, resource: tuple) -> None:
        calendar = self.calendars.get(resource)
        if not calendar:
            return
        index = bisect.bisect_left(calendar, grant.start_ns - EPSILON_NS,
                                   key=_start_key)
        while index < len(calendar):
            if calendar[index].grant.grant_id == grant.grant_id:
                del calendar[index]
                break
            index += 1
        if not calendar:
            del self.calendars[resource]


def claim_resources(claim: ResourceClaim) -> list[tuple[tuple, Use]]:
    """Resources a claim touches, shared rows first."""
    mode = (Use.GLOBAL if claim.shared_row_mode == SlotMode.GLOBAL_ACTIVE
            else Use.LOCAL)
    resources: list[tuple[tuple, Use]] = [
        (('row', subarray, slot), mode)
        for subarray, slot in sorted(claim.busy_shared_rows)
    ]
    resources += [(('sa', subarray), Use.STALL)
                  for subarray in sorted(claim.stalled_subarrays)]
    resources += [(('sa', subarray), Use.BUSY)
                  for subarray in sorted(claim.busy_subarrays
                                         - claim.stalled_subarrays)]
    resources += [(('seg', segment), Use.EXCLUSIVE)
                  for segment in sorted(claim.busy_bus_segments)]
    if claim.uses_bank_io:
        resources.append((('io',), Use.EXCLUSIVE))
    return resources


def _conflict_kind(resource: tuple, held: Use, wanted: Use) -> ConflictKind:
    match resource[0]:
        case 'row':
            if held != wanted:
                return ConflictKind.SHARED_ROW_DUAL_ACCESS
            return ConflictKind.SHARED_ROW_BUSY
        case 'sa':
            if Use.STALL in (held, wanted):
                return ConflictKind.SUBARRAY_STALLED
            return ConflictKind.SUBARRAY_BUSY
        case 'seg':
            return ConflictKind.BUS_BUSY
    return ConflictKind.BANK_IO_BUSY


def reserve(claim: ResourceClaim, at: float,
            st: BankState) -> Grant | Conflict:
    """
    Grant the claim over [at, at + duration) or report the first blocking
    resource together with the earliest time worth retrying.
    """
    end = at + claim.duration_ns
    resources = claim_resources(claim)

    for resource, use in resources:
        booking = st.first_overlap(resource, at, end)
        if booking is not None:
            return Conflict(_conflict_kind(resource, booking.use, use),
                            booking.end_ns, resource)

    grant = Grant(st.next_grant_id, claim, at)
    st.next_grant_id += 1
    st.grants[grant.grant_id] = grant
    for resource, use in resources:
        st.book(grant, resource, use)

    return grant


def find_slot(steps: Sequence[ClaimStep], at: float, st: BankState) -> float:
    """
    Earliest start >= at at which every step's claim fits its calendars.
    Each pass moves the start past the blocker of the first step that does
    not fit; the start only grows, so the search ends.
    """
    start = at
    while True:
        moved = False
        for step in steps:
            wanted = start + step.offset_ns
            for resource, _ in claim_resources(step.claim):
                fit = st.next_fit(resource, wanted, step.claim.duration_ns)
                if fit > wanted + EPSILON_NS:
                    start = fit - step.offset_ns
                    wanted = fit
                    moved = True
        if not moved:
            return start


def release(grant: Grant, at: float, st: BankState) -> None:
    """Return a granted claim's resources to idle."""
    if st.grants.pop(grant.grant_id, None) is None:
        raise DoubleReleaseError(
            f'grant {grant.grant_id} is not held in bank {st.bank}')

    for resource, _ in claim_resources(grant.claim):
        st.unbook(grant, resource)

    if at + EPSILON_NS < grant.end_ns:
        logger.debug('grant %s released %.3f ns early', grant.grant_id,
                     grant.end_ns - at)


def tracking_storage(g: Geometry) -> tuple[int, int]:
    bits = g.total_subarrays * TRACKING_BITS_PER_SUBARRAY
    return bits, math.ceil(bits / 8)


@dataclass(frozen=True)
class AuditFinding:
    bank: int
    resource: tuple
    first: Grant
    second: Grant
    kind: ConflictKind


def audit_grants(grants: Iterable[tuple[int, Grant]]) -> list[AuditFinding]:
    """
    Interval sweep over every grant a run made: no two grants may overlap on
    a shared resource.
    """
    by_resource: dict[tuple, list[tuple[Grant, Use]]] = {}
    for bank, grant in grants:
        for resource, use in claim_resources(grant.claim):
            by_resource.setdefault((bank, resource), []).append(
                (grant, use))

    findings: list[AuditFinding] = []
    for (bank, resource), uses in by_resource.items():
        uses.sort(key=lambda item: (item[0].start_ns, item[0].grant_id))
        latest: tuple[Grant, Use] | None = None
        for grant, use in uses:
            if latest and grant.start_ns < latest[0].end_ns - EPSILON_NS:
                findings.append(AuditFinding(
                    bank, resource, latest[0], grant,
                    _conflict_kind(resource, latest[1], use)))
            if latest is None or grant.end_ns > latest[0].end_ns:
                latest = (grant, use)

    return findings
