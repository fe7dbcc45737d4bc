"""
Django management command: grow a random forest or predict with a stored one
Usage:
    python manage.py ranger --file data.csv --depvarname Species --treetype 1 --write
    python manage.py ranger --file test.csv --predict ranger_out.forest
"""

import logging

import numpy as np
from django.conf import settings
from django.core.management.base import CommandError

from grove.engine.data_model import MemoryMode, ResponseKind, ResponseSpec
from grove.engine.dataset_io import (
    load_prediction_dataset,
    load_training_dataset,
    write_confusion,
    write_importance,
    write_predictions,
)
from grove.engine.evaluation import confusion_matrix, forest_importance, oob_error
from grove.engine.exceptions import ConfigError, GroveError
from grove.engine.forest import GrowConfig, ImportanceMode, grow_forest, predict_forest
from grove.engine.serialization import read_forest, write_forest
from grove.engine.tree import TreeType
from grove.management.base import GroveCommand

logger = logging.getLogger(__name__)

RESPONSE_KINDS = {
    TreeType.CLASSIFICATION: ResponseKind.CLASSIFICATION,
    TreeType.PROBABILITY: ResponseKind.CLASSIFICATION,
    TreeType.REGRESSION: ResponseKind.REGRESSION,
    TreeType.SURVIVAL: ResponseKind.SURVIVAL,
}

MEMORY_MODE_LABELS = {
    MemoryMode.RUNTIME: 'runtime',
    MemoryMode.MEMORY_EFFICIENT: 'memory efficient',
    MemoryMode.GWAS: 'gwas',
}


def format_oob_error(tree_type, error):
    if tree_type is TreeType.CLASSIFICATION:
        return f'{error * 100:.2f} %'
    return f'{error:.6f}'


class Command(GroveCommand):
    """
    Train or predict with the flag set of the ranger command line tool
    """

    help = (
        'Grow a random forest from an ASCII dataset, or predict with a stored forest. '
        'Tree types: 1 = classification, 3 = regression, 5 = survival, 9 = probability. '
        'Importance: 0 = none, 1 = impurity, 2 = permutation, 3 = scaled permutation. '
        'Memory modes: 0 = runtime, 1 = memory efficient, 2 = gwas (packed genotypes).'
    )

    def add_arguments(self, parser):
        parser.add_argument('--file', type=str, help='Dataset file (header line, then one sample per line)')
        parser.add_argument('--depvarname', type=str, help='Dependent variable (survival time for --treetype 5)')
        parser.add_argument('--statusvarname', type=str, help='Survival status variable, 1 = event, 0 = censored')
        parser.add_argument('--treetype', type=int, choices=[1, 3, 5, 9], default=1, help='Tree type code (default: 1)')
        parser.add_argument('--ntree', type=int, help='Number of trees (default: GROVE NUM_TREES)')
        parser.add_argument('--mtry', type=int, help='Candidate features per node (default: floor(sqrt(p)))')
        parser.add_argument('--targetpartitionsize', type=int, help='Minimal node size (default depends on tree type)')
        parser.add_argument('--impmeasure', type=int, choices=[0, 1, 2, 3], default=0, help='Importance mode (default: 0)')
        parser.add_argument('--memorymode', type=int, choices=[0, 1, 2], default=0, help='Memory mode (default: 0)')
        parser.add_argument('--seed', type=int, help='Master random seed')
        parser.add_argument('--nthreads', type=int, help='Number of worker processes')
        parser.add_argument('--write', action='store_true', help='Save the grown forest to <outprefix>.forest')
        parser.add_argument('--predict', type=str, help='Stored forest file to predict with')
        parser.add_argument('--outprefix', type=str, help='Prefix of output files (default: ranger_out)')
        parser.add_argument('--verbose', action='store_true', help='Log progress to the console')
        parser.add_argument('--dryrun', action='store_true', help='Print the resolved settings and exit')

    def handle(self, *args, **options):
        """Main command handler"""
        if options['verbose']:
            logging.getLogger('grove').setLevel(logging.DEBUG)
        defaults = settings.GROVE
        self.outprefix = options['outprefix'] or defaults['OUTPREFIX']
        self.nthreads = options['nthreads'] or defaults['NUM_THREADS']

        try:
            if not options['file']:
                raise ConfigError('--file is required')
            if options['predict']:
                self.run_predict(options)
            else:
                self.run_train(options, defaults)
        except GroveError as e:
            raise CommandError(str(e), returncode=e.exit_code) from e

    def build_config(self, options, defaults):
        seed = options['seed']
        if seed is None and defaults['SEED']:
            seed = defaults['SEED']
        return GrowConfig(
            tree_type=TreeType(options['treetype']),
            num_trees=options['ntree'] or defaults['NUM_TREES'],
            mtry=options['mtry'],
            min_node_size=options['targetpartitionsize'],
            memory_mode=MemoryMode(options['memorymode']),
            importance_mode=options['impmeasure'],
            seed=seed,
            worker_count=self.nthreads,
            split_cutoff=defaults['SPLIT_CUTOFF'],
        )

    def run_train(self, options, defaults):
        tree_type = TreeType(options['treetype'])
        if not options['depvarname']:
            raise ConfigError('--depvarname is required for training')
        if tree_type is TreeType.SURVIVAL and not options['statusvarname']:
            raise ConfigError('--treetype 5 needs --statusvarname')

        response_spec = ResponseSpec(
            kind=RESPONSE_KINDS[tree_type],
            name=options['depvarname'],
            status_name=options['statusvarname'] if tree_type is TreeType.SURVIVAL else None,
        )
        dataset = load_training_dataset(options['file'], response_spec, options['memorymode'])
        config = self.build_config(options, defaults)

        if options['dryrun']:
            self.print_settings(dataset, config.resolve(dataset.n_features))
            return

        forest = grow_forest(dataset, config)
        oob = oob_error(forest, dataset)
        importance = forest_importance(forest, dataset, worker_count=self.nthreads)
        self.print_summary(forest, dataset, oob)

        if tree_type is TreeType.CLASSIFICATION:
            used = oob.has_oob
            classes = np.asarray(forest.classes)
            matrix = confusion_matrix(
                classes[dataset.response.labels[used]], classes[oob.predictions[used]], forest.classes,
            )
            self.write_output('confusion', write_confusion, matrix, forest.classes)
        if importance is not None:
            self.write_output('importance', write_importance, importance)
        if options['write']:
            self.write_output('forest', write_forest, forest)

    def run_predict(self, options):
        forest = read_forest(options['predict'])
        depvarname = options['depvarname'] or (forest.response_names[0] if forest.response_names else None)
        classification = forest.tree_type is TreeType.CLASSIFICATION
        dataset = load_prediction_dataset(
            options['file'],
            forest.feature_names,
            memory_mode=options['memorymode'],
            classes=forest.classes if classification else (),
            depvarname=depvarname,
        )
        if options['dryrun']:
            self.print_settings(dataset, forest.config)
            return

        predictions = predict_forest(forest, dataset, worker_count=self.nthreads)
        self.write_output('prediction', write_predictions, forest, predictions)
        if classification and dataset.response is not None:
            classes = np.asarray(forest.classes)
            matrix = confusion_matrix(
                classes[dataset.response.labels], classes[predictions], forest.classes,
            )
            self.write_output('confusion', write_confusion, matrix, forest.classes)

    def write_output(self, suffix, writer, *args):
        path = f'{self.outprefix}.{suffix}'
        writer(path, *args)
        logger.info('Wrote %s', path)
        self.stdout.write(f'Saved {suffix} to file {path}.')

    def print_settings(self, dataset, config):
        """Resolved settings block for --dryrun"""
        self.stdout.write(self.style.WARNING('Dry run: nothing is grown or written.'))
        lines = [
            ('Type:', config.tree_type.label),
            ('Number of trees:', config.num_trees),
            ('Sample size:', dataset.n_samples),
            ('Number of independent variables:', dataset.n_features),
            ('Mtry:', config.mtry),
            ('Target node size:', config.min_node_size),
            ('Variable importance mode:', ImportanceMode.LABELS[config.importance_mode]),
            ('Memory mode:', MEMORY_MODE_LABELS[MemoryMode(config.memory_mode)]),
            ('Seed:', config.seed),
            ('Threads:', self.nthreads),
        ]
        for label, value in lines:
            self.stdout.write(f'{label:<34}{value}')

    def print_summary(self, forest, dataset, oob):
        """Result block in the layout of the ranger command line tool"""
        config = forest.config
        self.stdout.write('Ranger result\n')
        lines = [
            ('Type:', config.tree_type.label),
            ('Number of trees:', forest.num_trees),
            ('Sample size:', dataset.n_samples),
            ('Number of independent variables:', dataset.n_features),
            ('Mtry:', config.mtry),
            ('Target node size:', config.min_node_size),
            ('Variable importance mode:', ImportanceMode.LABELS[config.importance_mode]),
            ('Seed:', config.seed),
            ('OOB prediction error:', format_oob_error(config.tree_type, oob.error)),
        ]
        for label, value in lines:
            self.stdout.write(f'{label:<34}{value}')
