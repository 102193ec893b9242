"""
Command timing: JEDEC-derived presets, the overlapped ACTIVATE-ACTIVATE-
PRECHARGE primitive and a legality checker for command sequences.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .exceptions import ConfigError, TimingViolation
from .geometry import RowAddress, RowKind, TimingGrade

EPSILON_NS = 1e-9
MAX_GLOBAL_ROWS_OPEN = 5


@dataclass(frozen=True)
class TimingParams:
    t_ck_ns: float
    t_rcd_ns: float
    t_rp_ns: float
    t_ras_ns: float
    aap_offset_ns: float = 4.0

    @property
    def t_rc_ns(self) -> float:
        return self.t_ras_ns + self.t_rp_ns

    def with_overrides(self, **overrides: float) -> TimingParams:
        params = dataclasses.replace(self, **overrides)
        params.validate()
        return params

    def validate(self) -> None:
        for field in dataclasses.fields(self):
            if getattr(self, field.name) < 0:
                raise ConfigError(f'{field.name} must not be negative')
        if self.t_ck_ns <= 0:
            raise ConfigError('t_ck_ns must be positive')


TIMING_PRESETS: dict[TimingGrade, TimingParams] = {
    # 11-11-11 at a 1.25 ns clock
    TimingGrade.DDR3_1600_11: TimingParams(
        t_ck_ns=1.25, t_rcd_ns=13.75, t_rp_ns=13.75, t_ras_ns=35.0,
        aap_offset_ns=4.0),
    # 17-17-17 at a 0.833 ns clock
    TimingGrade.DDR4_2400T_17: TimingParams(
        t_ck_ns=0.833, t_rcd_ns=14.17, t_rp_ns=14.17, t_ras_ns=32.0,
        aap_offset_ns=4.0),
}


def preset(grade: TimingGrade | str) -> TimingParams:
    return TIMING_PRESETS[TimingGrade(grade)]


class CommandKind(str, Enum):
    ACTIVATE = 'ACT'
    PRECHARGE = 'PRE'
    GWL_ACTIVATE = 'GWL_ACT'
    RBM = 'RBM'
    READ = 'RD'
    WRITE = 'WR'


@dataclass(frozen=True)
class RbmTarget:
    bank: int
    src_subarray: int
    dst_subarray: int


@dataclass(frozen=True)
class Command:
    kind: CommandKind
    target: RowAddress | RbmTarget
    issue_time_ns: float

    def domain(self) -> tuple:
        """
        The set of bitlines a command acts on: a subarray's local bitlines,
        or the bank bus for anything addressed through a global wordline.
        """
        if isinstance(self.target, RbmTarget):
            return ('local', self.target.bank, self.target.src_subarray)
        if (self.kind == CommandKind.GWL_ACTIVATE
                or self.target.kind == RowKind.SHARED_GLOBAL):
            return ('bus', self.target.bank)
        return ('local', self.target.bank, self.target.subarray)


@dataclass(frozen=True)
class Violation:
    index: int
    rule: str
    detail: str = ''


def aap_latency(t: TimingParams) -> float:
    """
    Latency of an overlapped copy: the second ACTIVATE follows the first
    after aap_offset, then the pair is held for t_ras and precharged.
    """
    return t.aap_offset_ns + t.t_ras_ns + t.t_rp_ns


@dataclass
class _DomainState:
    first_act: float | None = None
    last_act: float | None = None
    open_rows: set = dataclasses.field(default_factory=set)
    last_pre: float | None = None
    last_cycle_start: float | None = None
    # a row buffer handed over by an RBM from the neighbouring subarray
    latched: bool = False


def _target_mismatch(cmd: Command) -> str:
    if cmd.kind == CommandKind.RBM:
        if not isinstance(cmd.target, RbmTarget):
            return 'RBM needs a subarray pair'
        if abs(cmd.target.dst_subarray - cmd.target.src_subarray) != 1:
            return (f'subarrays {cmd.target.src_subarray} and '
                    f'{cmd.target.dst_subarray} are not neighbours')
        return ''
    if isinstance(cmd.target, RbmTarget):
        return f'{cmd.kind.value} cannot address a subarray pair'
    if (cmd.kind == CommandKind.GWL_ACTIVATE
            and cmd.target.kind != RowKind.SHARED_GLOBAL):
        return f'GWL_ACTIVATE on a {cmd.target.kind.value} row'
    return ''


def check_sequence_legal(
    cmds: Sequence[Command], t: TimingParams
) -> Violation | None:
    """
    Return the first rule broken by an ordered command list, or None.

    Rules: 'open-row' (activating a row already open, or a third local row
    on open bitlines), 't_ras' (precharge too early), 't_rc' / 't_rp'
    (re-activation too early), 'aap_offset' (overlapped activations too
    close), 't_rcd' (column or RBM command before sensing), 'target' (a
    GWL_ACTIVATE off a SharedGlobal address, or an RBM between subarrays
    that are not neighbours) and 'order' (issue times not sorted or
    negative).
    """
    domains: dict[tuple, _DomainState] = {}
    previous = 0.0

    for index, cmd in enumerate(cmds):
        when = cmd.issue_time_ns
        if when < -EPSILON_NS or when + EPSILON_NS < previous:
            return Violation(index, 'order', f'issue time {when}')
        previous = when
        mismatch = _target_mismatch(cmd)
        if mismatch:
            return Violation(index, 'target', mismatch)

        state = domains.setdefault(cmd.domain(), _DomainState())
        is_bus = cmd.domain()[0] == 'bus'

        if cmd.kind in (CommandKind.ACTIVATE, CommandKind.GWL_ACTIVATE):
            row = cmd.target.storage_key()
            if state.open_rows:
                if row in state.open_rows:
                    return Violation(index, 'open-row', f'row {row} open')
                limit = MAX_GLOBAL_ROWS_OPEN if is_bus else 2
                if len(state.open_rows) >= limit:
                    return Violation(index, 'open-row',
                                     'no free slot in overlapped activation')
                if when - state.first_act + EPSILON_NS < t.aap_offset_ns:
                    return Violation(index, 'aap_offset',
                                     f'{when - state.first_act} ns apart')
                state.open_rows.add(row)
                state.last_act = when
                continue

            if state.last_cycle_start is not None and (
                    when - state.last_cycle_start + EPSILON_NS < t.t_rc_ns):
                return Violation(index, 't_rc',
                                 f'{when - state.last_cycle_start} ns cycle')
            if state.last_pre is not None and (
                    when - state.last_pre + EPSILON_NS < t.t_rp_ns):
                return Violation(index, 't_rp',
                                 f'{when - state.last_pre} ns after PRE')
            state.open_rows = {row}
            state.first_act = when
            state.last_act = when
            state.last_cycle_start = when

        elif cmd.kind == CommandKind.PRECHARGE:
            if not state.open_rows:
                continue
            if when - state.last_act + EPSILON_NS < t.t_ras_ns:
                return Violation(index, 't_ras',
                                 f'{when - state.last_act} ns after ACT')
            state.open_rows = set()
            state.last_pre = when

        elif cmd.kind == CommandKind.RBM:
            if not state.open_rows and not state.latched:
                return Violation(index, 'open-row', 'no row buffer to move')
            if state.open_rows and (
                    when - state.first_act + EPSILON_NS < t.t_rcd_ns):
                return Violation(index, 't_rcd',
                                 f'{when - state.first_act} ns after ACT')
            domains.setdefault(
                ('local', cmd.target.bank, cmd.target.dst_subarray),
                _DomainState()).latched = True

        else:
            if not state.open_rows:
                return Violation(index, 'open-row', 'no open row')
            if when - state.first_act + EPSILON_NS < t.t_rcd_ns:
                return Violation(index, 't_rcd',
                                 f'{when - state.first_act} ns after ACT')

    return None


def require_legal(cmds: Sequence[Command], t: TimingParams) -> None:
    """Strict form of check_sequence_legal."""
    violation = check_sequence_legal(cmds, t)
    if violation is not None:
        raise TimingViolation(violation.index, violation.rule,
                              f'command {violation.index} breaks '
                              f'{violation.rule}: {violation.detail}')
