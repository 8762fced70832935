from walkapp.management.base import ExperimentCommand


class Command(ExperimentCommand):
    experiment = 'monte_carlo'

    def add_experiment_arguments(self, parser):
        parser.add_argument('--delta')
        parser.add_argument('--steps', type=int)
        parser.add_argument('--sigma-shift', dest='sigma_shift', type=float,
                            help='Standard deviation of the grating shifts, in units of Lambda.')
        parser.add_argument('--samples', dest='n_samples', type=int)
        parser.add_argument('--seed', type=int)
        parser.add_argument('--force')
        parser.add_argument('--source', help='wavepacket (default) or localized.')
        parser.add_argument('--q0', nargs=2, metavar=('Q_X', 'Q_Y'))
        parser.add_argument('--band')
        parser.add_argument('--sigma-G', dest='sigma_G', type=float)
        parser.add_argument('--input')
