import json
import os

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from walkapp.exceptions import InvalidArgumentError, NumericalError
from walkapp.experiments import EXPERIMENTS, run_experiment
from walkapp.parallel import default_threads
from walkapp.serializers import config_schema, validate_config

CONFIG_ERROR = 2
NUMERICAL_ERROR = 3
IO_ERROR = 1


class ExperimentCommand(BaseCommand):
    """
    Base for the walkapp commands.

    A run is described by a JSON config (``--config``); the flags a subclass
    declares in ``add_experiment_arguments`` override values of that file when
    given. The flag destinations must be the config keys.
    """
    experiment = None

    @property
    def help(self):
        return EXPERIMENTS[self.experiment].help

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON file with the run configuration.')
        parser.add_argument('--output', help='Directory for result files (default: WALKAPP OUTPUT_DIR/<command>).')
        parser.add_argument('--threads', type=int, help='Worker cap; results do not depend on it.')
        parser.add_argument('--dry-run', action='store_true', help='Validate the configuration and print it.')
        parser.add_argument('--schema', action='store_true', help='Print the JSON schema of the configuration.')
        self.add_experiment_arguments(parser)

    def add_experiment_arguments(self, parser):
        pass

    def override_keys(self):
        return [name for name in EXPERIMENTS[self.experiment].serializer_class().fields]

    def load_config(self, options):
        config = {}
        if options.get('config'):
            path = options['config']
            try:
                with open(path) as f:
                    config = json.load(f)
            except OSError as e:
                raise CommandError(f'{path}: {e.strerror}', returncode=IO_ERROR)
            except ValueError as e:
                raise CommandError(f'{path}: not valid JSON ({e})', returncode=CONFIG_ERROR)
            if not isinstance(config, dict):
                raise CommandError(f'{path}: the configuration must be a JSON object', returncode=CONFIG_ERROR)
        for key in self.override_keys():
            if options.get(key) is not None:
                config[key] = options[key]
        return config

    def handle(self, *args, **options):
        if options['schema']:
            schema = config_schema(EXPERIMENTS[self.experiment].serializer_class)
            self.stdout.write(json.dumps(schema, indent=2, sort_keys=True))
            return
        config = self.load_config(options)
        if options['dry_run']:
            try:
                validated = validate_config(self.experiment, config)
            except serializers.ValidationError as e:
                raise CommandError(json.dumps(e.detail, sort_keys=True), returncode=CONFIG_ERROR)
            self.stdout.write(json.dumps(validated, indent=2, sort_keys=True))
            return

        threads = options.get('threads') or default_threads()
        output = options.get('output') or os.path.join(settings.WALKAPP['OUTPUT_DIR'], self.experiment)
        try:
            result = run_experiment(self.experiment, config, output, threads)
        except serializers.ValidationError as e:
            raise CommandError(json.dumps(e.detail, sort_keys=True), returncode=CONFIG_ERROR)
        except InvalidArgumentError as e:
            raise CommandError(str(e), returncode=CONFIG_ERROR)
        except NumericalError as e:
            raise CommandError(f'{type(e).__name__}: {e}', returncode=NUMERICAL_ERROR)
        except OSError as e:
            raise CommandError(f'{e.filename}: {e.strerror}', returncode=IO_ERROR)

        for warning in result.summary.get('warnings') or []:
            self.stderr.write(warning)
        self.stdout.write(json.dumps(result.summary, indent=2, sort_keys=True))
