from walkapp.management.base import ExperimentCommand


class Command(ExperimentCommand):
    experiment = 'optics'

    def add_experiment_arguments(self, parser):
        parser.add_argument('action', nargs='?', help='constants (default), render, calibrate or extract.')
        parser.add_argument('--from', dest='source', help='Distribution CSV written by evolve.')
        parser.add_argument('--tilt', help='Rotation of the grating axes.')
        parser.add_argument('--max-order', dest='max_order', type=int)
        parser.add_argument('--raster-size', dest='raster_size', type=int)
        parser.add_argument('--pixel-pitch', dest='pixel_pitch', type=float)
        parser.add_argument('--beam-radius', dest='beam_radius', type=float)
        parser.add_argument('--png', action='store_true', default=None)
