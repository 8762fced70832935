from walkapp.management.base import ExperimentCommand


class Command(ExperimentCommand):
    experiment = 'bands'

    def add_experiment_arguments(self, parser):
        parser.add_argument('--delta')
        parser.add_argument('--grid', type=int, help='Samples per axis of the Brillouin-zone grid.')
