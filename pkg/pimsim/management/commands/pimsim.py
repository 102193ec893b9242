from __future__ import annotations

import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError, \
    CommandParser

from pimsim.config_file import SimulationConfig, parse_config
from pimsim.exceptions import SimulationError
from pimsim.serializers import RunSpecSerializer
from pimsim.services import (BENCHMARKS, HEADLINE_MECHANISMS, RunSpec,
                             default_threads, repro_suite, run)

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = ('Simulate a benchmark under several inter-subarray transfer '
            'mechanisms and write summary.json, timeline.csv, '
            'comparison.csv and plot data.')

    def add_arguments(self, parser: CommandParser) -> None:
        parser.add_argument('--benchmark', choices=sorted(BENCHMARKS),
                            default='copy_microbench')
        parser.add_argument('--size', type=int,
                            help='problem size; defaults per benchmark')
        parser.add_argument('--bits', type=int,
                            help='operand width for wide_add / wide_mul')
        parser.add_argument(
            '--mechanisms',
            default=','.join(m.value for m in HEADLINE_MECHANISMS),
            help='comma separated, e.g. lisa,sharedpim')
        parser.add_argument('--config', type=Path,
                            help='key = value simulation config file')
        parser.add_argument('--out', type=Path,
                            default=Path(settings.PIMSIM_OUTPUT_DIR))
        parser.add_argument('--repro-paper', '--repro', action='store_true',
                            dest='repro_paper',
                            help='run the full reproduction suite')
        parser.add_argument('--full-parallelism', action='store_true',
                            help='give every lane group its own bank')
        parser.add_argument('--record', action='store_true',
                            help='archive the results in the database')

    def handle(self, *args, **options) -> None:
        try:
            config = (parse_config(options['config']) if options['config']
                      else SimulationConfig())
            if options['full_parallelism']:
                config = config.with_compute(full_parallelism=True)

            if options['repro_paper']:
                self._repro(config, options['out'])
                return

            self._single(config, options)

        except SimulationError as exc:
            logger.error('simulation failed: %s', exc)
            raise CommandError(str(exc)) from exc

    def _single(self, config: SimulationConfig, options: dict) -> None:
        benchmark = options['benchmark']
        size = options['bits'] or options['size']
        if size is None:
            size = BENCHMARKS[benchmark].default_size

        serializer = RunSpecSerializer(data={
            'benchmark': benchmark,
            'size': size,
            'mechanisms': options['mechanisms'].split(','),
        })
        if not serializer.is_valid():
            raise CommandError(str(serializer.errors))

        spec = RunSpec(
            benchmark=benchmark,
            size=size,
            mechanisms=tuple(serializer.validated_data['mechanisms']),
            config=config,
            out_dir=options['out'],
            threads=default_threads(),
            record=options['record'],
        )
        report = run(spec)

        if report is None:
            self.stdout.write(
                (spec.out_dir / 'comparison.csv').read_text())
            return

        for row in report.rows:
            self.stdout.write(
                f'{row.mechanism.value:>10}  '
                f'{row.metrics.makespan_ns:14.2f} ns  '
                f'{row.metrics.transfer_energy_uj:10.4f} uJ  '
                f'speedup {row.speedup_pct:6.2f}%  '
                f'energy saving {row.energy_saving_pct:6.2f}%')
        self.stdout.write(self.style.SUCCESS(
            f'outputs written to {spec.out_dir}'))

    def _repro(self, config: SimulationConfig, out_dir: Path) -> None:
        checks = repro_suite(config, out_dir, default_threads())
        for check in checks:
            verdict = (self.style.SUCCESS('pass') if check.passed
                       else self.style.ERROR('FAIL'))
            self.stdout.write(
                f'{check.name:<36} {check.measured:14.4f} '
                f'{check.target:12.4f} +-{check.tolerance:<8g} {verdict}')

        failed = sum(not check.passed for check in checks)
        self.stdout.write(f'{len(checks) - failed}/{len(checks)} checks '
                          f'passed; outputs in {out_dir}')
