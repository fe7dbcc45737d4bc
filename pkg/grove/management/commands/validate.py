"""
Django management command: agreement and importance-validity studies
Usage:
    python manage.py validate --datasets 20 --samples 500 --features 50
    python manage.py validate --importance --repetitions 50
"""

import logging

from django.conf import settings
from django.core.management.base import CommandError

from grove.engine.benchmark import REFERENCES, run_importance_study, run_validation_protocol
from grove.engine.dataset_io import write_table
from grove.engine.exceptions import GroveError
from grove.engine.forest import GrowConfig
from grove.engine.simulation import Endpoint, SimSpec
from grove.management.base import GroveCommand


class Command(GroveCommand):
    help = 'Compare OOB errors with a reference forest, or check importance validity, on simulated SNP data'

    def add_arguments(self, parser):
        parser.add_argument('--datasets', type=int, default=20, help='Simulated datasets (default: 20)')
        parser.add_argument('--samples', type=int, default=500, help='Samples per dataset (default: 500)')
        parser.add_argument('--features', type=int, default=50, help='SNPs per dataset (default: 50)')
        parser.add_argument('--effects', type=int, default=5, help='Effect SNPs (default: 5)')
        parser.add_argument('--effectsize', type=float, help='Per-SNP effect (default: GROVE EFFECT_SIZE)')
        parser.add_argument('--endpoint', choices=[e.value for e in Endpoint], default=Endpoint.DICHOTOMOUS.value)
        parser.add_argument('--ntree', type=int, default=500, help='Trees per forest (default: 500)')
        parser.add_argument('--reference', choices=REFERENCES, default='naive',
                            help='naive = independent reference forest, self = engine with another seed')
        parser.add_argument('--importance', action='store_true', help='Run the importance-validity study instead')
        parser.add_argument('--repetitions', type=int, default=50, help='Importance study repetitions (default: 50)')
        parser.add_argument('--seed', type=int, default=0, help='Master seed (default: 0)')
        parser.add_argument('--nthreads', type=int, help='Number of worker processes')
        parser.add_argument('--output', type=str, default='validate.tsv', help='Report file (default: validate.tsv)')
        parser.add_argument('--verbose', action='store_true', help='Log progress to the console')

    def handle(self, *args, **options):
        if options['verbose']:
            logging.getLogger('grove').setLevel(logging.INFO)
        defaults = settings.GROVE
        spec = SimSpec(
            n=options['samples'],
            p=options['features'],
            n_effect=options['effects'],
            effect_size=defaults['EFFECT_SIZE'] if options['effectsize'] is None else options['effectsize'],
            maf_range=tuple(defaults['MAF_RANGE']),
            endpoint=Endpoint(options['endpoint']),
            seed=options['seed'],
        )
        config = GrowConfig(
            num_trees=options['ntree'],
            seed=options['seed'],
            worker_count=options['nthreads'] or defaults['NUM_THREADS'],
            split_cutoff=defaults['SPLIT_CUTOFF'],
        )

        try:
            spec.validate()
            if options['importance']:
                self.importance_study(spec, config, options)
            else:
                self.agreement(spec, config, options)
        except GroveError as e:
            raise CommandError(str(e), returncode=e.exit_code) from e

    def agreement(self, spec, config, options):
        self.stdout.write(self.style.SUCCESS(
            f'Validating against the {options["reference"]} reference on {options["datasets"]} datasets'
        ))
        report = run_validation_protocol(options['datasets'], spec, config, reference=options['reference'])
        summary = report.summary()
        self.stdout.write(f'Datasets:                          {summary["datasets"]}')
        self.stdout.write(f'Mean difference:                   {summary["mean_difference"]:.6f}')
        self.stdout.write(
            f'Limits of agreement:               [{summary["lower_limit"]:.6f}, {summary["upper_limit"]:.6f}]'
        )
        write_table(options['output'], report.frame)
        self.stdout.write(f'Saved report to file {options["output"]}.')

    def importance_study(self, spec, config, options):
        self.stdout.write(self.style.SUCCESS(f'Importance study over {options["repetitions"]} repetitions'))
        study = run_importance_study(options['repetitions'], spec, config)
        medians = study.medians()
        if study.effect_features_dominate():
            self.stdout.write(self.style.SUCCESS('Effect SNPs rank above every noise SNP (median)'))
        else:
            self.stdout.write(self.style.WARNING('Some noise SNP matches or beats an effect SNP (median)'))
        frame = medians.reset_index().rename(columns={'index': 'feature'})
        write_table(options['output'], frame)
        self.stdout.write(f'Saved report to file {options["output"]}.')
