"""
Parser for the line-oriented `key = value` simulation config. Omitted keys
keep the default fabric, the selected timing preset and the calibrated
copy constants.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .energy import PowerModel
from .exceptions import ConfigError, ParseError, UnknownKeyError
from .geometry import FabricConfig, TimingGrade, validate_config
from .scheduler import Platform
from .timing import TimingParams, preset
from .transfers import Mechanism, MechanismParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ComputeParams:
    plut_op_4bit_ns: float | None = None
    full_parallelism: bool = False


@dataclass(frozen=True)
class SimulationConfig:
    fabric: FabricConfig = field(default_factory=FabricConfig)
    timing: TimingParams = field(
        default_factory=lambda: preset(TimingGrade.DDR3_1600_11))
    mechanism_params: MechanismParams = field(
        default_factory=MechanismParams)
    power: PowerModel = field(default_factory=PowerModel.calibrated)
    compute: ComputeParams = field(default_factory=ComputeParams)

    def platform(self, mechanism: Mechanism) -> Platform:
        platform = Platform(
            geometry=validate_config(self.fabric),
            timing=self.timing,
            mechanism=mechanism,
            mechanism_params=self.mechanism_params,
            power=self.power,
            plut_op_4bit_ns=self.compute.plut_op_4bit_ns,
            full_parallelism=self.compute.full_parallelism,
        )
        platform.validate()
        return platform

    def with_compute(self, **changes: Any) -> SimulationConfig:
        return dataclasses.replace(
            self, compute=dataclasses.replace(self.compute, **changes))


def _parse_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f'not a boolean: {raw!r}')


def _field_types(cls: type) -> dict[str, Callable[[str], Any]]:
    casts: dict[str, Callable[[str], Any]] = {}
    for item in dataclasses.fields(cls):
        kind = str(item.type)
        if 'bool' in kind:
            casts[item.name] = _parse_bool
        elif kind.startswith('int'):
            casts[item.name] = int
        elif 'float' in kind:
            casts[item.name] = float
    return casts


SECTIONS: dict[str, dict[str, Callable[[str], Any]]] = {
    'fabric': {**_field_types(FabricConfig), 'timing_grade': TimingGrade},
    'timing': _field_types(TimingParams),
    'mechanism_params': _field_types(MechanismParams),
    'power': _field_types(PowerModel),
    'compute': _field_types(ComputeParams),
}
KEY_SECTION = {key: section for section, keys in SECTIONS.items()
               for key in keys}


def parse_config_text(text: str) -> SimulationConfig:
    """
    Raises:
        ParseError: for a line without `=` or a value of the wrong type.
        UnknownKeyError: for a key no section recognises.
        ConfigError: for values the fabric or models reject; the line
        number points at the offending key when it can be told.
    """
    values: dict[str, dict[str, Any]] = {name: {} for name in SECTIONS}
    lines: dict[str, int] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition('='))
        if not sep or not key or not value:
            raise ParseError(f'expected `key = value`, got {raw!r}',
                             line=line_no)
        section = KEY_SECTION.get(key)
        if section is None:
            raise UnknownKeyError(f'unknown key {key!r}', line=line_no)
        try:
            values[section][key] = SECTIONS[section][key](value)
        except ValueError as exc:
            raise ParseError(f'bad value for {key}: {value!r}',
                             line=line_no) from exc
        lines[key] = line_no

    def located(build: Callable[[], Any], section: str) -> Any:
        try:
            return build()
        except ConfigError as exc:
            if exc.line is not None:
                raise
            line = next((lines[key] for key in values[section]
                         if key in str(exc)), None)
            raise ConfigError(str(exc), line=line) from exc

    fabric = FabricConfig(**values['fabric'])
    located(lambda: validate_config(fabric), 'fabric')

    timing = preset(fabric.timing_grade)
    if values['timing']:
        timing = located(lambda: timing.with_overrides(**values['timing']),
                         'timing')

    mechanism_params = MechanismParams(**values['mechanism_params'])
    located(mechanism_params.validate, 'mechanism_params')

    power = PowerModel.calibrated()
    if values['power']:
        power = dataclasses.replace(power, **values['power'])
        located(power.validate, 'power')

    config = SimulationConfig(fabric, timing, mechanism_params, power,
                              ComputeParams(**values['compute']))
    op = config.compute.plut_op_4bit_ns
    if op is not None and op <= 0:
        raise ConfigError('plut_op_4bit_ns must be positive',
                          line=lines.get('plut_op_4bit_ns'))

    return config


def parse_config(path: Path | str) -> SimulationConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f'config file {path} does not exist')
    config = parse_config_text(path.read_text(encoding='utf-8'))
    logger.info('loaded simulation config from %s', path)
    return config
