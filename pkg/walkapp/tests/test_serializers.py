import math

from django.test import SimpleTestCase
from rest_framework.serializers import ValidationError

from walkapp.serializers import (
    CONFIG_SERIALIZERS, ChernConfigSerializer, config_hash, config_schema, parse_angle, validate_config,
)


class AngleTest(SimpleTestCase):
    def test_fractions_of_pi(self):
        self.assertEqual(parse_angle('pi/2'), math.pi / 2)
        self.assertEqual(parse_angle('7pi/8'), 7 * math.pi / 8)
        self.assertEqual(parse_angle('3*pi/4'), 3 * math.pi / 4)
        self.assertEqual(parse_angle('-pi'), -math.pi)
        self.assertEqual(parse_angle(' PI '), math.pi)

    def test_plain_numbers(self):
        self.assertEqual(parse_angle('0.25'), 0.25)

    def test_garbage(self):
        with self.assertRaises(ValueError):
            parse_angle('half a turn')

    def test_field(self):
        self.assertEqual(validate_config('chern', {'delta': 'pi/2'})['delta'], math.pi / 2)
        self.assertEqual(validate_config('chern', {'delta': 1.5})['delta'], 1.5)
        for bad in ('pi/0', 'two', True, None, [1]):
            with self.assertRaises(ValidationError):
                validate_config('chern', {'delta': bad})


class ConfigTest(SimpleTestCase):
    def test_defaults(self):
        config = validate_config('transport', {})
        self.assertEqual(config['grid'], 11)
        self.assertEqual(config['steps'], 5)
        self.assertEqual(config['force'], math.pi / 20)
        self.assertTrue(config['combine_inverse'])
        self.assertTrue(config['band_resolved'])

    def test_fits_need_two_steps(self):
        for command in ('transport', 'velocity_map'):
            with self.assertRaises(ValidationError):
                validate_config(command, {'steps': 1})
            self.assertEqual(validate_config(command, {'steps': 2})['steps'], 2)

    def test_unknown_key(self):
        with self.assertRaises(ValidationError) as raised:
            validate_config('chern', {'detla': 1.0})
        self.assertIn('detla', raised.exception.detail)

    def test_unknown_nested_key(self):
        with self.assertRaises(ValidationError):
            validate_config('deviations', {'optics': {'distance': 0.02}})

    def test_schema_version(self):
        self.assertEqual(validate_config('bands', {'schema_version': 1})['schema_version'], 1)
        with self.assertRaises(ValidationError):
            validate_config('bands', {'schema_version': 2})

    def test_sweep_order(self):
        with self.assertRaises(ValidationError):
            validate_config('phase_diagram', {'start': 'pi/2', 'stop': 'pi/4'})

    def test_required_shift(self):
        with self.assertRaises(ValidationError):
            validate_config('monte_carlo', {})
        self.assertEqual(validate_config('monte_carlo', {'sigma_shift': 0.05})['n_samples'], 20)

    def test_path_sum_limit(self):
        with self.assertRaises(ValidationError):
            validate_config('deviations', {'steps': 15})

    def test_optics_must_be_positive(self):
        with self.assertRaises(ValidationError):
            validate_config('optics', {'optics': {'waist': -1e-3}})

    def test_render_needs_source(self):
        with self.assertRaises(ValidationError):
            validate_config('optics', {'action': 'render'})

    def test_wavepacket_protocol(self):
        with self.assertRaises(ValidationError):
            validate_config('evolve', {'q0': [0, 0], 'protocol': 'walk_1d'})

    def test_hash_ignores_key_order(self):
        a = config_hash('chern', {'delta': 1.0, 'grid': 24})
        b = config_hash('chern', {'grid': 24, 'delta': 1.0})
        self.assertEqual(a, b)
        self.assertNotEqual(a, config_hash('bands', {'delta': 1.0, 'grid': 24}))


class SchemaTest(SimpleTestCase):
    def test_chern_schema(self):
        schema = config_schema(ChernConfigSerializer)
        self.assertFalse(schema['additionalProperties'])
        self.assertEqual(schema['properties']['grid'], {'type': 'integer', 'minimum': 3, 'maximum': 401, 'default': 24})
        self.assertEqual(schema['properties']['band']['enum'], ['-', '+'])
        self.assertEqual(schema['required'], [])

    def test_nested_and_required(self):
        schema = config_schema(CONFIG_SERIALIZERS['monte_carlo'])
        self.assertEqual(schema['required'], ['sigma_shift'])
        self.assertEqual(config_schema(CONFIG_SERIALIZERS['deviations'])['properties']['optics']['type'], 'object')

    def test_every_command_has_a_schema(self):
        for command, serializer_class in CONFIG_SERIALIZERS.items():
            self.assertIn('schema_version', config_schema(serializer_class)['properties'], command)
