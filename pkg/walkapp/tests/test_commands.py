import io
import json
import tempfile
from pathlib import Path

from django.core.management import CommandError, call_command, load_command_class
from django.test import SimpleTestCase


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.output = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def call(self, name, *args, **options):
        stdout, stderr = io.StringIO(), io.StringIO()
        options.setdefault('output', str(self.output / name))
        call_command(name, *args, stdout=stdout, stderr=stderr, threads=1, **options)
        return stdout.getvalue(), stderr.getvalue()

    def write_config(self, payload):
        path = self.output / 'config.json'
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
        return str(path)


class ChernCommandTest(CommandTestCase):
    def test_summary(self):
        stdout, _ = self.call('chern', delta='pi/2')
        summary = json.loads(stdout)
        self.assertEqual(summary['chern_minus'], 1)
        written = json.loads((self.output / 'chern' / 'summary.json').read_text())
        self.assertEqual(written['summary'], summary)
        self.assertEqual(written['metadata']['command'], 'chern')
        self.assertIn('finished', json.loads((self.output / 'chern' / 'run.json').read_text()))

    def test_config_file_with_override(self):
        config = self.write_config({'delta': 'pi/8', 'grid': 16})
        stdout, _ = self.call('chern', config=config, delta='pi/2')
        summary = json.loads(stdout)
        self.assertEqual(summary['grid'], 16)
        self.assertEqual(summary['chern_minus'], 1)

    def test_critical_delta(self):
        with self.assertRaises(CommandError) as raised:
            self.call('chern', delta='pi/4')
        self.assertEqual(raised.exception.returncode, 3)

    def test_invalid_config(self):
        with self.assertRaises(CommandError) as raised:
            self.call('chern', grid=1)
        self.assertEqual(raised.exception.returncode, 2)

    def test_unknown_key_in_file(self):
        with self.assertRaises(CommandError) as raised:
            self.call('chern', config=self.write_config({'detla': 1.0}))
        self.assertEqual(raised.exception.returncode, 2)

    def test_malformed_file(self):
        with self.assertRaises(CommandError) as raised:
            self.call('chern', config=self.write_config('{"delta": '))
        self.assertEqual(raised.exception.returncode, 2)

    def test_missing_file(self):
        with self.assertRaises(CommandError) as raised:
            self.call('chern', config=str(self.output / 'missing.json'))
        self.assertEqual(raised.exception.returncode, 1)

    def test_dry_run_writes_nothing(self):
        stdout, _ = self.call('chern', delta='pi/2', dry_run=True)
        self.assertEqual(json.loads(stdout)['grid'], 24)
        self.assertFalse((self.output / 'chern').exists())

    def test_schema(self):
        stdout, _ = self.call('chern', schema=True)
        self.assertIn('method', json.loads(stdout)['properties'])


class EvolveCommandTest(CommandTestCase):
    def test_writes_every_step(self):
        self.call('evolve', steps=5)
        names = {path.name for path in (self.output / 'evolve').iterdir()}
        for t in range(6):
            self.assertIn(f't{t}.csv', names)
            self.assertIn(f't{t}.json', names)
        text = (self.output / 'evolve' / 't5.csv').read_text()
        self.assertTrue(text.startswith('# schema_version: 1\n# command: evolve\n# config_hash: '))

    def test_reproducible(self):
        self.call('evolve', steps=4, delta='pi/2', output=str(self.output / 'first'))
        self.call('evolve', steps=4, delta='pi/2', output=str(self.output / 'second'))
        for name in ('t4.csv', 't4.json', 'summary.json'):
            self.assertEqual((self.output / 'first' / name).read_bytes(), (self.output / 'second' / name).read_bytes())

    def test_render(self):
        self.call('evolve', steps=1, render=True)
        self.assertTrue((self.output / 'evolve' / 't1.pgm').read_bytes().startswith(b'P5\n'))


class OtherCommandsTest(CommandTestCase):
    def test_optics_constants(self):
        stdout, _ = self.call('optics')
        summary = json.loads(stdout)
        self.assertAlmostEqual(summary['site_pitch'], 63.28e-6, delta=1e-8)
        self.assertEqual(summary['crosstalk']['adopted'], 'amplitude')

    def test_optics_extract(self):
        self.call('evolve', steps=3)
        stdout, _ = self.call('optics', 'extract', source=str(self.output / 'evolve' / 't3.csv'), max_order=3)
        self.assertGreaterEqual(json.loads(stdout)['similarity'], 0.99)
        self.assertTrue((self.output / 'optics' / 'extracted.csv').exists())

    def test_deviations_plate_distance(self):
        stdout, _ = self.call('deviations', steps=4, plate_distance=1e-12)
        summary = json.loads(stdout)
        self.assertEqual(summary['plate_distance'], 1e-12)
        self.assertAlmostEqual(summary['similarity'], 1.0, delta=1e-9)

    def test_monte_carlo(self):
        stdout, _ = self.call('monte_carlo', sigma_shift=0.05, n_samples=4, steps=2, sigma_G=2.0)
        self.assertEqual(json.loads(stdout)['n_samples'], 4)
        header = (self.output / 'monte_carlo' / 'monte_carlo.csv').read_text().splitlines()[3]
        self.assertEqual(header, 't,mean_x,mean_y,std_x,std_y')

    def test_bands(self):
        stdout, _ = self.call('bands', grid=5)
        self.assertGreater(json.loads(stdout)['gap0'], 0.1)
        self.assertTrue((self.output / 'bands' / 'bands.csv').exists())

    def test_help_names_the_verb(self):
        for name in ('phase_diagram', 'velocity_map', 'monte_carlo'):
            self.assertTrue(load_command_class('walkapp', name).help.startswith(name.replace('_', '-') + ':'))
