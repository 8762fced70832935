from walkapp.management.base import ExperimentCommand


class Command(ExperimentCommand):
    experiment = 'edge'

    def add_experiment_arguments(self, parser):
        parser.add_argument('--delta')
        parser.add_argument('--width', type=int, help='Strip half-width N; the strip has 2N+1 sites.')
        parser.add_argument('--q-y-count', dest='q_y_count', type=int)
        parser.add_argument('--boundary', help='reflecting (default) or truncated.')
        parser.add_argument('--grid', type=int, help='Grid of the bulk Chern number.')
        parser.add_argument('--no-check', dest='check', action='store_false', default=None,
                            help='Only export the spectrum.')
