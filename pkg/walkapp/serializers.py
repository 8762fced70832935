import hashlib
import json
import math
import re
from fractions import Fraction

from django.conf import settings
from rest_framework import serializers

from walkapp.coin_ops import NAMED_COINS
from walkapp.edge import BOUNDARIES, MIN_WIDTH
from walkapp.models import Run
from walkapp.optics import MAX_PATH_STEPS
from walkapp.transport import MIN_SIGMA

ANGLE_PATTERN = re.compile(
    r'^(?P<sign>[-+]?)\s*(?P<numerator>\d+(?:\.\d*)?)?\s*\*?\s*pi\s*(?:/\s*(?P<denominator>\d+(?:\.\d*)?))?$')
BANDS = (('-', 'lower band'), ('+', 'upper band'))
COINS = tuple(sorted(NAMED_COINS))


def parse_angle(text):
    """
    Radians from a number or an exact fraction of pi.

    "pi/2", "7pi/8", "3*pi/4" and "-pi" are reduced as fractions first and
    multiplied by pi once, so "pi/2" is exactly ``math.pi / 2``.
    """
    text = text.strip().lower()
    try:
        return float(text)
    except ValueError:
        pass
    match = ANGLE_PATTERN.match(text)
    if match is None:
        raise ValueError(text)
    fraction = Fraction(match['numerator'] or 1) / Fraction(match['denominator'] or 1)
    if match['sign'] == '-':
        fraction = -fraction
    return float(fraction) * math.pi


class AngleField(serializers.Field):
    default_error_messages = {
        'invalid': 'Not a valid angle: "{value}". Use radians or a fraction of pi such as "pi/2".',
    }

    def to_internal_value(self, data):
        if isinstance(data, bool):
            self.fail('invalid', value=data)
        if isinstance(data, (int, float)):
            value = float(data)
        elif isinstance(data, str):
            try:
                value = parse_angle(data)
            except (ValueError, ZeroDivisionError):
                self.fail('invalid', value=data)
        else:
            self.fail('invalid', value=data)
        if not math.isfinite(value):
            self.fail('invalid', value=data)
        return value

    def to_representation(self, value):
        return value


class StrictSerializer(serializers.Serializer):
    """Rejects keys it does not declare and checks the schema version."""
    schema_version = serializers.IntegerField(required=False)

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['Unknown field.'] for key in unknown})
        return super().to_internal_value(data)

    def validate_schema_version(self, version):
        expected = settings.WALKAPP['SCHEMA_VERSION']
        if version != expected:
            raise serializers.ValidationError(f'Unsupported schema version {version}; expected {expected}.')
        return version


class OpticalConfigSerializer(StrictSerializer):
    """Lengths in metres; missing values come from the WALKAPP['OPTICS'] setting."""
    wavelength = serializers.FloatField(required=False)
    waist = serializers.FloatField(required=False)
    grating_period = serializers.FloatField(required=False)
    focal_length = serializers.FloatField(required=False)
    plate_distance = serializers.FloatField(required=False)
    setup_length = serializers.FloatField(required=False)

    def validate(self, data):
        errors = {key: ['Must be positive.'] for key, value in data.items()
                  if key != 'schema_version' and not (math.isfinite(value) and value > 0)}
        if errors:
            raise serializers.ValidationError(errors)
        return data


class EvolveConfigSerializer(StrictSerializer):
    PROTOCOLS = ('U', 'U_inverse', 'calibration_x', 'calibration_y', 'walk_1d')

    delta = AngleField(default=math.pi / 2)
    steps = serializers.IntegerField(min_value=0, max_value=500, default=5)
    input = serializers.ChoiceField(choices=COINS, default='H')
    position = serializers.ListField(child=serializers.IntegerField(), min_length=2, max_length=2, default=[0, 0])
    protocol = serializers.ChoiceField(choices=PROTOCOLS, default='U')
    force = AngleField(default=0.0)
    analyzer = serializers.ChoiceField(choices=COINS, required=False, allow_null=True)
    q0 = serializers.ListField(child=AngleField(), min_length=2, max_length=2, required=False, allow_null=True)
    band = serializers.ChoiceField(choices=BANDS, default='-')
    sigma_G = serializers.FloatField(min_value=MIN_SIGMA, default=10.0)
    render = serializers.BooleanField(default=False)
    optics = OpticalConfigSerializer(required=False)

    def validate(self, data):
        if data.get('q0') is not None and data['protocol'] not in ('U', 'U_inverse'):
            raise serializers.ValidationError(dict(q0='Wavepackets are prepared for the U and U_inverse protocols only.'))
        return data


class BandsConfigSerializer(StrictSerializer):
    delta = AngleField(default=math.pi / 2)
    grid = serializers.IntegerField(min_value=3, max_value=1001, default=101)


class ChernConfigSerializer(StrictSerializer):
    delta = AngleField(default=math.pi / 2)
    band = serializers.ChoiceField(choices=BANDS, default='-')
    grid = serializers.IntegerField(min_value=3, max_value=401, default=24)
    method = serializers.ChoiceField(choices=('plaquette', 'integral'), default='plaquette')


class PhaseDiagramConfigSerializer(StrictSerializer):
    start = AngleField(default=0.05)
    stop = AngleField(default=3.1)
    count = serializers.IntegerField(min_value=2, max_value=2000, default=62)
    grid = serializers.IntegerField(min_value=3, max_value=401, default=24)
    gap_grid = serializers.IntegerField(min_value=5, max_value=1001, default=101)

    def validate(self, data):
        if data['start'] >= data['stop']:
            raise serializers.ValidationError(dict(stop='The sweep must end above its start.'))
        return data


class TransportConfigSerializer(StrictSerializer):
    delta = AngleField(default=math.pi / 2)
    band = serializers.ChoiceField(choices=BANDS, default='-')
    force = AngleField(default=math.pi / 20)
    grid = serializers.IntegerField(min_value=1, max_value=64, default=11)
    steps = serializers.IntegerField(min_value=2, max_value=50, default=5)
    combine_inverse = serializers.BooleanField(default=True)
    band_resolved = serializers.BooleanField(default=True)
    sigma_G = serializers.FloatField(min_value=MIN_SIGMA, default=10.0)


class VelocityMapConfigSerializer(StrictSerializer):
    delta = AngleField(default=math.pi / 2)
    band = serializers.ChoiceField(choices=BANDS, default='+')
    grid = serializers.IntegerField(min_value=1, max_value=64, default=11)
    steps = serializers.IntegerField(min_value=2, max_value=50, default=5)
    sigma_G = serializers.FloatField(min_value=MIN_SIGMA, default=10.0)


class EdgeConfigSerializer(StrictSerializer):
    delta = AngleField(default=7 * math.pi / 8)
    width = serializers.IntegerField(min_value=MIN_WIDTH, max_value=400, default=30)
    q_y_count = serializers.IntegerField(min_value=4, max_value=5001, default=201)
    boundary = serializers.ChoiceField(choices=BOUNDARIES, default='reflecting')
    grid = serializers.IntegerField(min_value=3, max_value=401, default=24)
    check = serializers.BooleanField(default=True)


class OpticsConfigSerializer(StrictSerializer):
    ACTIONS = ('constants', 'render', 'calibrate', 'extract')

    action = serializers.ChoiceField(choices=ACTIONS, default='constants')
    source = serializers.CharField(required=False, allow_null=True)
    tilt = AngleField(default=0.0)
    max_order = serializers.IntegerField(min_value=1, max_value=30, default=5)
    raster_size = serializers.IntegerField(min_value=16, max_value=8192, default=1024)
    pixel_pitch = serializers.FloatField(default=5e-6)
    beam_radius = serializers.FloatField(default=0.62e-3)
    png = serializers.BooleanField(default=False)
    optics = OpticalConfigSerializer(required=False)

    def validate_pixel_pitch(self, value):
        if not value > 0:
            raise serializers.ValidationError('Must be positive.')
        return value

    def validate_beam_radius(self, value):
        if not value > 0:
            raise serializers.ValidationError('Must be positive.')
        return value

    def validate(self, data):
        if data['action'] in ('render', 'extract') and not data.get('source'):
            raise serializers.ValidationError(dict(source=f'A distribution CSV is needed to {data["action"]}.'))
        return data


class DeviationsConfigSerializer(StrictSerializer):
    delta = AngleField(default=math.pi / 2)
    steps = serializers.IntegerField(min_value=0, default=10)
    coin = serializers.ChoiceField(choices=COINS, default='R')
    optics = OpticalConfigSerializer(required=False)

    def validate_steps(self, steps):
        if steps > MAX_PATH_STEPS:
            raise serializers.ValidationError(f'The path sum is limited to {MAX_PATH_STEPS} steps.')
        return steps


class MonteCarloConfigSerializer(StrictSerializer):
    delta = AngleField(default=math.pi / 2)
    steps = serializers.IntegerField(min_value=1, max_value=50, default=5)
    sigma_shift = serializers.FloatField(min_value=0.0)
    n_samples = serializers.IntegerField(min_value=2, max_value=10000, default=20)
    seed = serializers.IntegerField(min_value=0, default=0)
    force = AngleField(default=0.0)
    source = serializers.ChoiceField(choices=('wavepacket', 'localized'), default='wavepacket')
    q0 = serializers.ListField(child=AngleField(), min_length=2, max_length=2, default=[math.pi / 2, math.pi])
    band = serializers.ChoiceField(choices=BANDS, default='+')
    sigma_G = serializers.FloatField(min_value=MIN_SIGMA, default=5.0)
    input = serializers.ChoiceField(choices=COINS, default='H')


CONFIG_SERIALIZERS = {
    'evolve': EvolveConfigSerializer,
    'bands': BandsConfigSerializer,
    'chern': ChernConfigSerializer,
    'phase_diagram': PhaseDiagramConfigSerializer,
    'transport': TransportConfigSerializer,
    'velocity_map': VelocityMapConfigSerializer,
    'edge': EdgeConfigSerializer,
    'optics': OpticsConfigSerializer,
    'deviations': DeviationsConfigSerializer,
    'monte_carlo': MonteCarloConfigSerializer,
}


def validate_config(command, data):
    """Validated config with defaults filled in; raises serializers.ValidationError."""
    serializer = CONFIG_SERIALIZERS[command](data=data)
    serializer.is_valid(raise_exception=True)
    return json.loads(json.dumps(serializer.validated_data))


def config_hash(command, config):
    text = json.dumps({'command': command, 'config': config}, sort_keys=True)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _field_schema(field):
    if isinstance(field, serializers.Serializer):
        return config_schema(type(field))
    if isinstance(field, AngleField):
        schema = {'type': ['number', 'string'], 'description': 'radians, or a fraction of pi such as "pi/2"'}
    elif isinstance(field, serializers.BooleanField):
        schema = {'type': 'boolean'}
    elif isinstance(field, serializers.IntegerField):
        schema = {'type': 'integer'}
    elif isinstance(field, serializers.FloatField):
        schema = {'type': 'number'}
    elif isinstance(field, serializers.ChoiceField):
        schema = {'enum': list(field.choices)}
    elif isinstance(field, serializers.ListField):
        schema = {'type': 'array', 'items': _field_schema(field.child)}
        if field.min_length is not None:
            schema['minItems'] = field.min_length
        if field.max_length is not None:
            schema['maxItems'] = field.max_length
    else:
        schema = {'type': 'string'}
    for attribute, key in (('min_value', 'minimum'), ('max_value', 'maximum')):
        if getattr(field, attribute, None) is not None:
            schema[key] = getattr(field, attribute)
    if getattr(field, 'allow_null', False):
        schema['nullable'] = True
    if field.default is not serializers.empty and not callable(field.default):
        schema['default'] = field.default
    return schema


def config_schema(serializer_class):
    """JSON schema of a config serializer."""
    fields = serializer_class().fields
    return {
        'type': 'object',
        'additionalProperties': False,
        'properties': {name: _field_schema(field) for name, field in fields.items()},
        'required': [name for name, field in fields.items() if field.required],
    }


class RunSerializer(serializers.ModelSerializer):
    command = serializers.ChoiceField(choices=tuple(CONFIG_SERIALIZERS))

    class Meta:
        model = Run
        exclude = ('owner',)
        read_only_fields = ('config_hash', 'status', 'summary', 'error', 'created')

    def validate(self, data):
        try:
            data['config'] = validate_config(data['command'], data.get('config') or {})
        except serializers.ValidationError as e:
            raise serializers.ValidationError(dict(config=e.detail))
        data['config_hash'] = config_hash(data['command'], data['config'])
        return data
