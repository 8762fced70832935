from walkapp.management.base import ExperimentCommand


class Command(ExperimentCommand):
    experiment = 'evolve'

    def add_experiment_arguments(self, parser):
        parser.add_argument('--delta', help='Retardation of the g-plates, e.g. 1.5708 or pi/2.')
        parser.add_argument('--steps', type=int)
        parser.add_argument('--input', help='Initial polarization: H, V, D, A, L or R.')
        parser.add_argument('--position', type=int, nargs=2, metavar=('M_X', 'M_Y'))
        parser.add_argument('--protocol', help='U, U_inverse, calibration_x, calibration_y or walk_1d.')
        parser.add_argument('--force', help='Force F_x in radians of q_x per step.')
        parser.add_argument('--analyzer', help='Project on this polarization before recording.')
        parser.add_argument('--q0', nargs=2, metavar=('Q_X', 'Q_Y'), help='Start from a wavepacket centred at q0.')
        parser.add_argument('--band', help='Band of the wavepacket, - or +.')
        parser.add_argument('--sigma-G', dest='sigma_G', type=float)
        parser.add_argument('--render', action='store_true', default=None, help='Also write a camera frame per step.')
