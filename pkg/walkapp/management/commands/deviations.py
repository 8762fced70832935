from walkapp.management.base import ExperimentCommand


class Command(ExperimentCommand):
    experiment = 'deviations'

    def add_experiment_arguments(self, parser):
        parser.add_argument('--delta')
        parser.add_argument('--steps', type=int)
        parser.add_argument('--coin')
        parser.add_argument('--plate-distance', dest='plate_distance', type=float,
                            help='Distance between consecutive steps in metres.')

    def load_config(self, options):
        config = super().load_config(options)
        if options.get('plate_distance') is not None:
            config.setdefault('optics', {})['plate_distance'] = options['plate_distance']
        return config
