"""
DRAM organization, row addressing and the shared-row / bank-bus extensions.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

from .exceptions import ConfigError, OutOfRangeError


class TimingGrade(str, Enum):
    DDR3_1600_11 = 'DDR3_1600_11'
    DDR4_2400T_17 = 'DDR4_2400T_17'


class RowKind(str, Enum):
    REGULAR = 'Regular'
    SHARED_LOCAL = 'SharedLocal'
    SHARED_GLOBAL = 'SharedGlobal'


@dataclass(frozen=True)
class FabricConfig:
    """
    DRAM organization. The defaults reproduce the evaluated DDR3-1600
    configuration: 1 channel, 1 rank, 4 chips, 4 banks per chip,
    16 subarrays per bank, 512 rows of 8 KB, 2 shared rows per subarray
    and a bank bus split in 4 segments.
    """

    channels: int = 1
    ranks: int = 1
    chips_per_rank: int = 4
    banks_per_chip: int = 4
    subarrays_per_bank: int = 16
    rows_per_subarray: int = 512
    row_size_bytes: int = 8 * 1024
    shared_rows_per_subarray: int = 2
    bus_segments_per_bank: int = 4
    timing_grade: TimingGrade = TimingGrade.DDR3_1600_11

    COUNT_FIELDS = (
        'channels',
        'ranks',
        'chips_per_rank',
        'banks_per_chip',
        'subarrays_per_bank',
        'rows_per_subarray',
        'row_size_bytes',
    )


@dataclass(frozen=True)
class RowAddress:
    bank: int
    subarray: int
    row: int
    kind: RowKind = RowKind.REGULAR

    def storage_key(self) -> tuple[int, int, int]:
        """Both addresses of a shared row resolve to the same storage."""
        return (self.bank, self.subarray, self.row)

    def as_global(self) -> RowAddress:
        return dataclasses.replace(self, kind=RowKind.SHARED_GLOBAL)

    def as_local(self) -> RowAddress:
        kind = (RowKind.SHARED_LOCAL if self.kind != RowKind.REGULAR
                else RowKind.REGULAR)
        return dataclasses.replace(self, kind=kind)


@dataclass(frozen=True)
class Geometry:
    config: FabricConfig

    @cached_property
    def total_banks(self) -> int:
        cfg = self.config
        return (cfg.channels * cfg.ranks * cfg.chips_per_rank
                * cfg.banks_per_chip)

    @property
    def subarrays_per_bank(self) -> int:
        return self.config.subarrays_per_bank

    @property
    def rows_per_subarray(self) -> int:
        return self.config.rows_per_subarray

    @property
    def shared_rows(self) -> int:
        return self.config.shared_rows_per_subarray

    @cached_property
    def total_subarrays(self) -> int:
        return self.total_banks * self.config.subarrays_per_bank

    @cached_property
    def total_rows(self) -> int:
        return self.total_subarrays * self.config.rows_per_subarray

    @cached_property
    def segment_map(self) -> tuple[int, ...]:
        """
        Subarray index -> bus segment index. Each segment covers a
        contiguous run of subarrays; the remainder lands in the last one.
        """
        segments = self.config.bus_segments_per_bank
        per_segment = max(self.subarrays_per_bank // segments, 1)

        return tuple(
            min(subarray // per_segment, segments - 1)
            for subarray in range(self.subarrays_per_bank)
        )

    @cached_property
    def bus_segments(self) -> frozenset[int]:
        return frozenset(range(self.config.bus_segments_per_bank))

    def segment_of(self, subarray: int) -> int:
        self._check_subarray(subarray)
        return self.segment_map[subarray]

    def distance(self, a: int, b: int) -> int:
        """Hop count between two subarrays of the same bank."""
        self._check_subarray(a)
        self._check_subarray(b)
        return abs(a - b)

    def first_shared_row(self) -> int:
        return self.rows_per_subarray - self.shared_rows

    def is_shared_row(self, row: int) -> bool:
        return self.first_shared_row() <= row < self.rows_per_subarray

    def shared_slot(self, row: int) -> int:
        if not self.is_shared_row(row):
            raise OutOfRangeError(f'row {row} is not a shared row')
        return row - self.first_shared_row()

    def shared_row(self, bank: int, subarray: int, slot: int,
                   kind: RowKind = RowKind.SHARED_LOCAL) -> RowAddress:
        if not 0 <= slot < self.shared_rows:
            raise OutOfRangeError(f'shared slot {slot} does not exist')
        address = RowAddress(bank, subarray, self.first_shared_row() + slot,
                             kind)
        self.validate_address(address)
        return address

    def regular_row(self, bank: int, subarray: int, row: int = 0
                    ) -> RowAddress:
        address = RowAddress(bank, subarray, row)
        self.validate_address(address)
        return address

    def validate_address(self, address: RowAddress) -> None:
        if not 0 <= address.bank < self.total_banks:
            raise OutOfRangeError(f'bank {address.bank} out of range')
        self._check_subarray(address.subarray)
        if not 0 <= address.row < self.rows_per_subarray:
            raise OutOfRangeError(f'row {address.row} out of range')
        if (address.kind != RowKind.REGULAR
                and not self.is_shared_row(address.row)):
            raise OutOfRangeError(
                f'row {address.row} is not a shared row but is addressed '
                f'as {address.kind.value}')

    def widen(self, *, subarrays_per_bank: int | None = None,
              banks: int | None = None) -> Geometry:
        """
        Return a geometry with at least the requested bank width and bank
        count. Used to give a workload an ideal number of arrays.
        """
        cfg = self.config
        new_width = max(cfg.subarrays_per_bank, subarrays_per_bank or 0)
        banks_per_chip = cfg.banks_per_chip
        if banks and banks > self.total_banks:
            others = cfg.channels * cfg.ranks * cfg.chips_per_rank
            banks_per_chip = -(-banks // others)

        if (new_width, banks_per_chip) == (cfg.subarrays_per_bank,
                                           cfg.banks_per_chip):
            return self

        return Geometry(dataclasses.replace(
            cfg, subarrays_per_bank=new_width,
            banks_per_chip=banks_per_chip))

    def _check_subarray(self, subarray: int) -> None:
        if not 0 <= subarray < self.subarrays_per_bank:
            raise OutOfRangeError(f'subarray {subarray} out of range')


def validate_config(cfg: FabricConfig) -> Geometry:
    """
    Check a fabric configuration and derive its geometry.

    Raises:
        ConfigError: if any count is below one, if the configuration has no
        shared rows or bus segments, or if shared rows would fill the whole
        subarray.
    """
    for name in FabricConfig.COUNT_FIELDS:
        value = getattr(cfg, name)
        if value < 1:
            raise ConfigError(f'{name} must be at least 1, got {value}')

    if cfg.shared_rows_per_subarray < 1:
        raise ConfigError(
            'shared_rows_per_subarray must be at least 1; the bank bus '
            'needs a shared row in every subarray')

    if cfg.bus_segments_per_bank < 1:
        raise ConfigError('bus_segments_per_bank must be at least 1')

    if cfg.rows_per_subarray <= cfg.shared_rows_per_subarray:
        raise ConfigError(
            'rows_per_subarray must exceed shared_rows_per_subarray')

    return Geometry(cfg)


def decode_address(g: Geometry, flat: int) -> RowAddress:
    """
    Map a flat row index to its (bank, subarray, row) address. Banks are
    flattened row-major over channel, rank, chip and bank. Shared rows
    decode to their local address.
    """
    if not 0 <= flat < g.total_rows:
        raise OutOfRangeError(f'flat row {flat} outside [0, {g.total_rows})')

    subarray_index, row = divmod(flat, g.rows_per_subarray)
    bank, subarray = divmod(subarray_index, g.subarrays_per_bank)
    kind = RowKind.SHARED_LOCAL if g.is_shared_row(row) else RowKind.REGULAR

    return RowAddress(bank, subarray, row, kind)


def encode_address(g: Geometry, address: RowAddress) -> int:
    g.validate_address(address)

    return ((address.bank * g.subarrays_per_bank + address.subarray)
            * g.rows_per_subarray + address.row)
