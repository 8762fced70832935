"""
Runners behind the management commands and the run registry.

Each runner takes a validated config and a ResultWriter, writes its data
files through the writer and returns a JSON-serializable summary. Data files
carry a ``# key: value`` header (schema version, command, config hash) and
nothing time-dependent; the wall-clock time of a run goes to ``run.json``.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np
from django.conf import settings
from django.utils import timezone

from walkapp.bloch import band_gaps, bz_grid, chern_number, integrate_curvature, phase_diagram
from walkapp.coin_ops import calibration_protocol, protocol_U, protocol_U_inverse, walk_1d_protocol
from walkapp.edge import bulk_edge_check, strip_spectrum
from walkapp.lattice_walk import Distribution, center_of_mass, distribution, iterate, localized_state, similarity
from walkapp.optics import (
    OpticalConfig, RasterSpec, adjacent_mode_overlap, beam_diameter, calibrate_sites, extract_distribution,
    render_focal_plane, simulate_nonidealities_1d, spot_radius, wavepacket_sigma,
)
from walkapp.serializers import CONFIG_SERIALIZERS, config_hash, validate_config
from walkapp.transport import (
    WavepacketSpec, band_averaged_displacement, make_wavepacket, misalignment_monte_carlo, velocity_map,
)

logger = logging.getLogger(__name__)


@dataclass
class ResultWriter:
    """Writes result files into ``output_dir``; a writer without a directory writes nothing."""
    command: str
    config: dict
    output_dir: Optional[Path] = None
    files: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.output_dir is not None:
            self.output_dir = Path(self.output_dir)
            self.output_dir.mkdir(parents=True, exist_ok=True)

    @property
    def metadata(self):
        return {
            'schema_version': settings.WALKAPP['SCHEMA_VERSION'],
            'command': self.command,
            'config_hash': config_hash(self.command, self.config),
        }

    def save(self, name, export, metadata=True):
        """Call ``export(path, metadata)`` (or ``export(path)``) for the file ``name``."""
        if self.output_dir is None:
            return None
        target = self.output_dir / name
        if metadata:
            export(target, self.metadata)
        else:
            export(target)
        self.files.append(name)
        return target

    def finish(self, summary):
        if self.output_dir is None:
            return
        payload = {'metadata': self.metadata, 'config': self.config, 'summary': summary}
        (self.output_dir / 'summary.json').write_text(json.dumps(payload, indent=2, sort_keys=True))
        sidecar = {'finished': timezone.now().isoformat(), 'files': self.files + ['summary.json'], **self.metadata}
        (self.output_dir / 'run.json').write_text(json.dumps(sidecar, indent=2, sort_keys=True))


@dataclass
class Experiment:
    serializer_class: type
    runner: Callable
    help: str


@dataclass
class ExperimentResult:
    command: str
    config: dict
    config_hash: str
    summary: dict
    files: List[str]


def _optics(config):
    return OpticalConfig.from_settings(**(config.get('optics') or {}))


def _protocol(name, delta):
    if name == 'U':
        return protocol_U(delta)
    if name == 'U_inverse':
        return protocol_U_inverse(delta)
    if name == 'walk_1d':
        return walk_1d_protocol(delta)
    return calibration_protocol(name.rsplit('_', 1)[1])


def run_evolve(config, writer, threads=None):
    if config.get('q0') is not None:
        spec = WavepacketSpec(tuple(config['q0']), config['band'], config['sigma_G'], config['delta'],
                              inverse=config['protocol'] == 'U_inverse')
        state, protocol = make_wavepacket(spec), spec.protocol
    else:
        state = localized_state(config['position'], config['input'])
        protocol = _protocol(config['protocol'], config['delta'])
    optics = _optics(config) if config['render'] else None
    analyzer = config.get('analyzer')
    trajectory = []
    for t, current in enumerate(iterate(state, protocol, config['steps'], config['force'])):
        dist = distribution(current, analyzer)
        writer.save(f't{t}.csv', dist.to_csv)
        writer.save(f't{t}.json', dist.to_json)
        if optics is not None:
            image = render_focal_plane(current if analyzer is None else dist, optics)
            writer.save(f't{t}.pgm', image.to_pgm)
        trajectory.append(list(center_of_mass(dist)) if dist.total > 0 else None)
    return {
        'steps': config['steps'],
        'protocol': protocol.label,
        'norm': current.norm(),
        'support_radius': distribution(current).support_radius(),
        'center_of_mass': trajectory,
    }


def run_bands(config, writer, threads=None):
    grid = bz_grid(config['delta'], config['grid'])
    writer.save('bands.csv', grid.to_csv)
    gaps = band_gaps(config['delta'])
    return {
        'delta': config['delta'],
        'grid': config['grid'],
        'gap0': gaps.gap_at_0,
        'gappi': gaps.gap_at_pi,
        'epsilon_min': float(np.min(grid.epsilon)),
        'epsilon_max': float(np.max(grid.epsilon)),
    }


def run_chern(config, writer, threads=None):
    result = chern_number(config['delta'], config['band'], config['grid'])
    key = 'chern_minus' if config['band'] == '-' else 'chern_plus'
    summary = {'delta': config['delta'], 'grid': config['grid'], key: result.nu, 'flux': result.flux}
    if config['method'] == 'integral':
        summary['integral'] = integrate_curvature(config['delta'], config['band'], max(config['grid'], 64))
    return summary


def run_phase_diagram(config, writer, threads=None):
    deltas = np.linspace(config['start'], config['stop'], config['count'])
    diagram = phase_diagram(deltas, config['grid'], config['gap_grid'], threads)
    writer.save('phase_diagram.csv', diagram.to_csv)
    near_critical = [row.delta for row in diagram.rows if row.near_critical]
    return {
        'rows': len(diagram.rows),
        'near_critical': near_critical,
        'transitions': [{'delta': t.delta, 'gap': t.gap, 'residual_gap': t.residual_gap, 'bracket': list(t.bracket)}
                        for t in diagram.transitions],
        'warnings': [f'delta={d:.6g} near-critical' for d in near_critical],
    }


def run_transport(config, writer, threads=None):
    result = band_averaged_displacement(config['delta'], config['band'], config['force'], config['grid'],
                                        config['steps'], config['combine_inverse'], config['sigma_G'], threads,
                                        config['band_resolved'])
    writer.save('transport.csv', result.to_csv)
    writer.save('transport.json', result.to_json)
    return {**result.summary(), 'warnings': list(result.warnings)}


def run_velocity_map(config, writer, threads=None):
    result = velocity_map(config['delta'], config['band'], config['grid'], config['steps'], config['sigma_G'], threads)
    writer.save('velocity_map.csv', result.to_csv)
    return {'delta': config['delta'], 'band': config['band'], 'grid': config['grid'], 'max_error': result.max_error}


def run_edge(config, writer, threads=None):
    spectrum = strip_spectrum(config['delta'], config['width'], config['q_y_count'],
                              boundary=config['boundary'], threads=threads)
    writer.save('strip_spectrum.csv', spectrum.to_csv)
    summary = {'delta': config['delta'], 'N': config['width'], 'boundary': config['boundary'],
               'symmetry_defect': spectrum.symmetry_defect()}
    if config['check']:
        report = bulk_edge_check(config['delta'], grid_n=config['grid'], spectrum=spectrum)
        summary.update(report.summary())
    return summary


def _raster(config):
    size = config['raster_size']
    return RasterSpec((size, size), config['pixel_pitch'])


def run_optics(config, writer, threads=None):
    optics = _optics(config)
    action = config['action']
    if action == 'constants':
        crosstalk = adjacent_mode_overlap(optics)
        sigma = wavepacket_sigma(config['beam_radius'], optics)
        packet = make_wavepacket(WavepacketSpec((0.0, 0.0), sigma_G=sigma))
        return {
            'site_pitch': optics.site_pitch,
            'spot_radius': spot_radius(optics),
            'input_spot_radius': spot_radius(optics, config['beam_radius']),
            'rayleigh_range': optics.rayleigh_range,
            'paraxial': optics.paraxial,
            'wavepacket_sigma': sigma,
            'wavepacket_diameter': beam_diameter(distribution(packet), optics),
            'crosstalk': {'amplitude': crosstalk.amplitude, 'power': crosstalk.power,
                          'box_leakage': crosstalk.box_leakage, 'adopted': crosstalk.matches},
        }
    if action == 'calibrate':
        grid = calibrate_sites(optics, config['max_order'], _raster(config), config['tilt'])
        writer.save('sites.json', grid.to_json)
        return {'origin': grid.origin.tolist(), 'lattice_vectors': grid.lattice.T.tolist(),
                'half_width': grid.half_width}

    source = Distribution.from_csv(config['source'])
    image = render_focal_plane(source, optics, _raster(config), config['tilt'])
    summary = {'total_power': image.total_power, 'clipped_fraction': image.clipped_fraction,
               'site_pitch': optics.site_pitch}
    if action == 'render':
        writer.save('frame.pgm', image.to_pgm)
        if config['png']:
            writer.save('frame.png', image.to_png, metadata=False)
        return summary
    grid = calibrate_sites(optics, max(config['max_order'], *source.support_radius()), _raster(config), config['tilt'])
    extracted = extract_distribution(image, grid)
    writer.save('extracted.csv', extracted.to_csv)
    return {**summary, 'similarity': similarity(extracted, source)}


def run_deviations(config, writer, threads=None):
    result = simulate_nonidealities_1d(config['delta'], config['steps'], _optics(config), config['coin'])
    writer.save('deviations.csv', result.distribution.to_csv)
    writer.save('ideal.csv', result.ideal.to_csv)
    return result.summary()


def run_monte_carlo(config, writer, threads=None):
    if config['source'] == 'wavepacket':
        source = WavepacketSpec(tuple(config['q0']), config['band'], config['sigma_G'], config['delta'])
    else:
        source = localized_state((0, 0), config['input'])
    result = misalignment_monte_carlo(config['delta'], source, config['steps'], config['sigma_shift'],
                                      config['n_samples'], config['seed'], config['force'], threads)
    writer.save('monte_carlo.csv', result.to_csv)
    return result.summary()


EXPERIMENTS = {
    'evolve': Experiment(CONFIG_SERIALIZERS['evolve'], run_evolve,
                         'Evolve a walker and write the distribution after every step.'),
    'bands': Experiment(CONFIG_SERIALIZERS['bands'], run_bands,
                        'Export quasi-energies, n-vector and Berry curvature over the Brillouin zone.'),
    'chern': Experiment(CONFIG_SERIALIZERS['chern'], run_chern, 'Chern number of one band.'),
    'phase_diagram': Experiment(CONFIG_SERIALIZERS['phase_diagram'], run_phase_diagram,
                                'phase-diagram: Chern number and gaps over a sweep of delta, with located transitions.'),
    'transport': Experiment(CONFIG_SERIALIZERS['transport'], run_transport,
                            'Band-averaged anomalous displacement under a force and the fitted Chern number.'),
    'velocity_map': Experiment(CONFIG_SERIALIZERS['velocity_map'], run_velocity_map,
                               'velocity-map: measured against analytic group velocity over the zone.'),
    'edge': Experiment(CONFIG_SERIALIZERS['edge'], run_edge,
                       'Strip spectrum and the bulk-edge check.'),
    'optics': Experiment(CONFIG_SERIALIZERS['optics'], run_optics,
                         'Optical constants, camera rendering, site calibration and read-out.'),
    'deviations': Experiment(CONFIG_SERIALIZERS['deviations'], run_deviations,
                             '1D walk with propagation effects against the ideal walk.'),
    'monte_carlo': Experiment(CONFIG_SERIALIZERS['monte_carlo'], run_monte_carlo,
                              'monte-carlo: center-of-mass spread under random grating misalignment.'),
}


def _json_safe(value):
    """Undefined fit results (NaN) become null so summaries stay valid JSON."""
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def run_experiment(command, data, output_dir=None, threads=None):
    """
    Validate ``data`` for ``command``, run it and write its files.

    Raises rest_framework ValidationError for a bad config, InvalidArgumentError
    or NumericalError from the simulation, and OSError for unwritable output.
    """
    config = validate_config(command, data)
    writer = ResultWriter(command, config, output_dir)
    logger.info('running %s (config %s)', command, writer.metadata['config_hash'][:12])
    summary = _json_safe(EXPERIMENTS[command].runner(config, writer, threads))
    writer.finish(summary)
    return ExperimentResult(command, config, writer.metadata['config_hash'], summary, list(writer.files))
