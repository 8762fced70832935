from walkapp.management.base import ExperimentCommand


class Command(ExperimentCommand):
    experiment = 'chern'

    def add_experiment_arguments(self, parser):
        parser.add_argument('--delta')
        parser.add_argument('--band')
        parser.add_argument('--grid', type=int)
        parser.add_argument('--method', help='plaquette (default) or integral, which adds the curvature quadrature.')
