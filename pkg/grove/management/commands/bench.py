"""
Django management command: runtime scaling and peak-memory benchmark
Usage: python manage.py bench --axis num_trees --grid 250 500 1000 --repeats 5
"""

import logging

from django.conf import settings
from django.core.management.base import CommandError

from grove.engine.benchmark import AXES, BenchBase, run_scaling_benchmark
from grove.engine.data_model import MemoryMode
from grove.engine.dataset_io import write_table
from grove.engine.exceptions import GroveError
from grove.engine.tree import TreeType
from grove.management.base import GroveCommand


class Command(GroveCommand):
    help = 'Time forest growth on simulated SNP data while one parameter varies'

    def add_arguments(self, parser):
        parser.add_argument('--axis', choices=AXES, default='num_trees', help='Parameter to vary')
        parser.add_argument('--grid', type=float, nargs='+', required=True, help='Values of the varied parameter')
        parser.add_argument('--ntree', type=int, default=500, help='Fixed number of trees (default: 500)')
        parser.add_argument('--samples', type=int, default=1000, help='Fixed sample size (default: 1000)')
        parser.add_argument('--features', type=int, default=1000, help='Fixed number of SNPs (default: 1000)')
        parser.add_argument('--mtrypercent', type=float, help='Fixed mtry as percent of p (default: sqrt(p))')
        parser.add_argument('--treetype', type=int, choices=[1, 3], default=1,
                            help='1 = classification grown to purity, 3 = regression stopped at node size 25')
        parser.add_argument('--memorymode', type=int, choices=[0, 1, 2], default=0, help='Memory mode (default: 0)')
        parser.add_argument('--repeats', type=int, default=1, help='Runs per grid point (default: 1)')
        parser.add_argument('--memory', action='store_true', help='Also measure peak memory per grid point')
        parser.add_argument('--seed', type=int, default=0, help='Master seed (default: 0)')
        parser.add_argument('--nthreads', type=int, help='Number of worker processes')
        parser.add_argument('--output', type=str, default='bench.tsv', help='Report file (default: bench.tsv)')
        parser.add_argument('--plotdata', type=str, help='Optional long-format per-repeat timings file')
        parser.add_argument('--verbose', action='store_true', help='Log progress to the console')

    def handle(self, *args, **options):
        if options['verbose']:
            logging.getLogger('grove').setLevel(logging.INFO)
        axis = options['axis']
        base = BenchBase(
            num_trees=options['ntree'],
            n=options['samples'],
            p=options['features'],
            mtry_percent=options['mtrypercent'],
            tree_type=TreeType(options['treetype']),
            memory_mode=MemoryMode(options['memorymode']),
            worker_count=options['nthreads'] or settings.GROVE['NUM_THREADS'],
            seed=options['seed'],
        )
        grid = [value if axis == 'mtry_percent' else int(value) for value in options['grid']]

        self.stdout.write(self.style.SUCCESS(f'Benchmarking {axis} over {grid} ({options["repeats"]} repeats)'))
        try:
            report = run_scaling_benchmark(
                axis, grid, base=base, repeats=options['repeats'], measure_memory=options['memory'],
            )
        except GroveError as e:
            raise CommandError(str(e), returncode=e.exit_code) from e

        for point in report.points:
            if point.error:
                self.stdout.write(self.style.ERROR(f'{axis}={point.value}: {point.error}'))
            else:
                peak = '' if point.peak_bytes is None else f', peak {point.peak_bytes / 2 ** 20:.1f} MiB'
                self.stdout.write(f'{axis}={point.value}: {point.seconds:.3f} s{peak}')

        write_table(options['output'], report.to_frame())
        self.stdout.write(f'Saved report to file {options["output"]}.')
        if options['plotdata']:
            write_table(options['plotdata'], report.plot_frame())
            self.stdout.write(f'Saved plot data to file {options["plotdata"]}.')
