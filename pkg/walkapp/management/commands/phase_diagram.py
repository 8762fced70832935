from walkapp.management.base import ExperimentCommand


class Command(ExperimentCommand):
    experiment = 'phase_diagram'

    def add_experiment_arguments(self, parser):
        parser.add_argument('--from', dest='start', help='First delta of the sweep.')
        parser.add_argument('--to', dest='stop', help='Last delta of the sweep.')
        parser.add_argument('--count', type=int)
        parser.add_argument('--grid', type=int)
        parser.add_argument('--gap-grid', dest='gap_grid', type=int)
