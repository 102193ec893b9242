"""
Copy energy as average power times duration, power calibration against
the published copy table, and the chip-area overhead model.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, TypedDict

from .exceptions import CalibrationError, ConfigError, MissingComponentError
from .transfers import Mechanism

logger = logging.getLogger(__name__)

AREA_TABLE_PATH = Path(__file__).resolve().parent / 'data' / 'area_table.csv'
TOTAL_ROW = 'Total'
AREA_TOLERANCE_MM2 = 0.015


@dataclass(frozen=True)
class CopyTarget:
    latency_ns: float
    energy_uj: float


# one 8 KB row copied between two subarrays of a bank
COPY_TARGETS: dict[Mechanism, CopyTarget] = {
    Mechanism.MEMCPY_CHANNEL: CopyTarget(1366.25, 6.2),
    Mechanism.ROWCLONE_INTER_SA: CopyTarget(1363.75, 4.33),
    Mechanism.LISA_RISC: CopyTarget(260.5, 0.17),
    Mechanism.SHARED_PIM_BUS: CopyTarget(52.75, 0.14),
}


@dataclass(frozen=True)
class PowerModel:
    """
    Average power in watts while a copy is in flight. A bus copy fires
    sa_rows_active_bus rows of bank sense amplifiers, so p_bus_copy_w sits
    near that multiple of the single-row local power.
    """

    p_local_copy_w: float
    p_bus_copy_w: float
    p_memcpy_w: float
    p_rc_inter_w: float
    sa_rows_active_bus: int = 4

    @classmethod
    def calibrated(cls) -> PowerModel:
        return calibrate_power(COPY_TARGETS)

    @property
    def bus_to_local_ratio(self) -> float:
        return self.p_bus_copy_w / self.p_local_copy_w

    @property
    def per_sa_row_bus_w(self) -> float:
        return self.p_bus_copy_w / self.sa_rows_active_bus

    def power_for(self, mech: Mechanism) -> float:
        match mech:
            case Mechanism.SHARED_PIM_BUS:
                return self.p_bus_copy_w
            case Mechanism.MEMCPY_CHANNEL:
                return self.p_memcpy_w
            case Mechanism.ROWCLONE_INTER_SA:
                return self.p_rc_inter_w
        return self.p_local_copy_w

    def validate(self) -> None:
        for name in ('p_local_copy_w', 'p_bus_copy_w', 'p_memcpy_w',
                     'p_rc_inter_w'):
            if getattr(self, name) <= 0:
                raise ConfigError(f'{name} must be positive')
        if self.sa_rows_active_bus < 1:
            raise ConfigError('sa_rows_active_bus must be at least 1')


def copy_energy(mech: Mechanism, duration_ns: float,
                pm: PowerModel) -> float:
    """Energy in microjoules: watts times nanoseconds is nanojoules."""
    return pm.power_for(mech) * duration_ns * 1e-3


def calibrate_power(targets: Mapping[Mechanism, CopyTarget],
                    sa_rows_active_bus: int = 4) -> PowerModel:
    """
    Derive each mechanism's average power from a published latency and
    energy pair.

    Raises:
        CalibrationError: if a target is missing or has zero latency.
    """
    powers: dict[Mechanism, float] = {}
    for mech in COPY_TARGETS:
        target = targets.get(mech)
        if target is None:
            raise CalibrationError(f'no calibration target for {mech.value}')
        if target.latency_ns <= 0:
            raise CalibrationError(
                f'{mech.value} target latency must be positive')
        powers[mech] = target.energy_uj * 1e3 / target.latency_ns

    model = PowerModel(
        p_local_copy_w=powers[Mechanism.LISA_RISC],
        p_bus_copy_w=powers[Mechanism.SHARED_PIM_BUS],
        p_memcpy_w=powers[Mechanism.MEMCPY_CHANNEL],
        p_rc_inter_w=powers[Mechanism.ROWCLONE_INTER_SA],
        sa_rows_active_bus=sa_rows_active_bus,
    )
    logger.debug('calibrated power model %s (bus/local ratio %.3f)', model,
                 model.bus_to_local_ratio)
    return model


class AreaVariant(str, Enum):
    BASE_DRAM = 'BaseDram'
    PLUTO_BSA = 'PlutoBsa'
    PLUTO_SHARED_PIM = 'PlutoSharedPim'


@dataclass(frozen=True)
class AreaTable:
    components: dict[str, dict[AreaVariant, float]]
    published_totals: dict[AreaVariant, float]

    @classmethod
    def from_csv(cls, path: Path | str = AREA_TABLE_PATH) -> AreaTable:
        components: dict[str, dict[AreaVariant, float]] = {}
        totals: dict[AreaVariant, float] = {}

        with open(path, newline='', encoding='utf-8') as handle:
            for line, row in enumerate(csv.DictReader(handle), start=2):
                try:
                    variant = AreaVariant(row['variant'].strip())
                    area = float(row['mm2'])
                except (KeyError, ValueError, AttributeError) as exc:
                    raise ConfigError(f'bad area row: {row}',
                                      line=line) from exc
                name = row['component'].strip()
                if name == TOTAL_ROW:
                    totals[variant] = area
                else:
                    components.setdefault(name, {})[variant] = area

        return cls(components, totals)


class AreaReport(TypedDict):
    totals_mm2: dict[str, float]
    component_sums_mm2: dict[str, float]
    overhead_percent: float
    added_mm2: float


def area_report(tbl: AreaTable,
                variant: AreaVariant = AreaVariant.PLUTO_SHARED_PIM,
                baseline: AreaVariant = AreaVariant.PLUTO_BSA) -> AreaReport:
    """
    Totals per variant and the overhead of variant over baseline.
    Published totals win over component sums when present; the two must
    agree within rounding.
    """
    sums: dict[AreaVariant, float] = {}
    for name, areas in tbl.components.items():
        for wanted in AreaVariant:
            if wanted not in areas:
                raise MissingComponentError(
                    f'{name} has no area for {wanted.value}')
            sums[wanted] = sums.get(wanted, 0.0) + areas[wanted]

    if not sums:
        raise MissingComponentError('area table is empty')

    totals: dict[AreaVariant, float] = {}
    for wanted in AreaVariant:
        published = tbl.published_totals.get(wanted)
        if published is not None and (
                abs(published - sums[wanted]) > AREA_TOLERANCE_MM2):
            raise ConfigError(
                f'{wanted.value} total {published} disagrees with its '
                f'components ({sums[wanted]:.2f})')
        totals[wanted] = published if published is not None else sums[wanted]

    added = sum(
        max(areas[variant] - areas[baseline], 0.0)
        for areas in tbl.components.values())

    return AreaReport(
        totals_mm2={key.value: round(value, 2)
                    for key, value in totals.items()},
        component_sums_mm2={key.value: round(value, 2)
                            for key, value in sums.items()},
        overhead_percent=(totals[variant] / totals[baseline] - 1) * 100,
        added_mm2=round(added, 2),
    )
