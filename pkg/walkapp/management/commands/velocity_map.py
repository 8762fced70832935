from walkapp.management.base import ExperimentCommand


class Command(ExperimentCommand):
    experiment = 'velocity_map'

    def add_experiment_arguments(self, parser):
        parser.add_argument('--delta')
        parser.add_argument('--band')
        parser.add_argument('--grid', type=int)
        parser.add_argument('--steps', type=int)
        parser.add_argument('--sigma-G', dest='sigma_G', type=float)
