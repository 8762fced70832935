from walkapp.management.base import ExperimentCommand


class Command(ExperimentCommand):
    experiment = 'transport'

    def add_experiment_arguments(self, parser):
        parser.add_argument('--delta')
        parser.add_argument('--band')
        parser.add_argument('--force', help='F_x, e.g. pi/20.')
        parser.add_argument('--grid', type=int)
        parser.add_argument('--steps', type=int)
        parser.add_argument('--direct-only', dest='combine_inverse', action='store_false', default=None,
                            help='Do not combine with the inverse protocol.')
        parser.add_argument('--total-intensity', dest='band_resolved', action='store_false', default=None,
                            help='Take the center of mass of the whole packet instead of its prepared band.')
        parser.add_argument('--sigma-G', dest='sigma_G', type=float)
