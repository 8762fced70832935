"""
Photonic encoding and read-out of the walker.

Lattice site m is a Gaussian beam with transverse wavevector ``m 2pi/Lambda``.
A lens of focal length f maps it to a spot at ``f lambda k / 2pi`` on the
camera, so the walker distribution appears as a grid of spots with pitch
``f lambda / Lambda``. This module renders such images, calibrates the grid
back from them and extracts the distribution, and models the propagation
effects that make the real set-up deviate from the ideal walk.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple

import numpy as np
from django.conf import settings
from scipy import integrate, optimize, special

from walkapp.coin_ops import as_spinor, calibration_protocol, lc_plate, walk_1d_protocol
from walkapp.exceptions import (
    CalibrationError, CombinatorialLimitError, EmptyImageError, InvalidArgumentError,
)
from walkapp.lattice_walk import Distribution, WalkerState, distribution, evolve, iterate, localized_state, similarity

logger = logging.getLogger(__name__)

BOX_FRACTION = 0.49
CLIP_WARNING = 1e-3
MAX_PATH_STEPS = 14
REPORTED_CROSSTALK = 0.008


@dataclass(frozen=True)
class OpticalConfig:
    """Set-up parameters in metres. ``setup_length`` is the total propagation inside the walk."""
    wavelength: float = 632.8e-9
    waist: float = 5e-3
    grating_period: float = 5e-3
    focal_length: float = 0.5
    plate_distance: float = 2e-2
    setup_length: float = 1.0

    def __post_init__(self):
        for name in ('wavelength', 'waist', 'grating_period', 'focal_length', 'plate_distance', 'setup_length'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgumentError(f'{name} must be positive, got {value}')
        if not self.paraxial:
            logger.warning('Rayleigh range %.3g m is not much longer than the set-up (%.3g m); '
                           'curvature and Gouy phase are no longer negligible', self.rayleigh_range, self.setup_length)

    @classmethod
    def from_settings(cls, **overrides):
        values = dict(settings.WALKAPP.get('OPTICS', {})) if settings.configured else {}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @property
    def delta_k(self):
        return 2.0 * math.pi / self.grating_period

    @property
    def rayleigh_range(self):
        return math.pi * self.waist ** 2 / self.wavelength

    @property
    def paraxial(self):
        return self.rayleigh_range >= 10.0 * self.setup_length

    @property
    def site_pitch(self):
        return self.focal_length * self.wavelength / self.grating_period

    def as_dict(self):
        return {name: getattr(self, name) for name in
                ('wavelength', 'waist', 'grating_period', 'focal_length', 'plate_distance', 'setup_length')}


@dataclass(frozen=True)
class GaussianMode:
    """The beam carrying lattice site ``m``."""
    m: Tuple[int, int]
    config: OpticalConfig

    @property
    def k_perp(self):
        return self.config.delta_k * np.asarray(self.m, dtype=float)

    def beam_radius(self, z):
        return self.config.waist * math.sqrt(1.0 + (z / self.config.rayleigh_range) ** 2)

    def curvature_radius(self, z):
        if z == 0:
            return math.inf
        return z * (1.0 + (self.config.rayleigh_range / z) ** 2)

    def gouy_phase(self, z):
        return math.atan(z / self.config.rayleigh_range)

    def field(self, x, y, z=0.0):
        """Complex envelope of the tilted beam at transverse position (x, y), distance z from the waist."""
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        w = self.beam_radius(z)
        k = 2.0 * math.pi / self.config.wavelength
        r2 = x ** 2 + y ** 2
        curvature = 0.0 if z == 0 else k * r2 / (2.0 * self.curvature_radius(z))
        kx, ky = self.k_perp
        return (self.config.waist / w) * np.exp(-r2 / w ** 2) * np.exp(
            -1j * curvature + 1j * self.gouy_phase(z) + 1j * (kx * x + ky * y))


def camera_position(k_perp, config):
    """R = f lambda k / 2pi; ``k_perp`` has its two components on the last axis."""
    return config.focal_length * config.wavelength * np.asarray(k_perp, dtype=float) / (2.0 * math.pi)


def camera_to_k(position, config):
    return 2.0 * math.pi * np.asarray(position, dtype=float) / (config.focal_length * config.wavelength)


def _rotation(tilt):
    c, s = math.cos(tilt), math.sin(tilt)
    return np.array([[c, -s], [s, c]])


def site_position(m, config, tilt=0.0):
    """Camera coordinates of lattice site(s) ``m``; ``tilt`` rotates the grating axes."""
    k = config.delta_k * np.asarray(m, dtype=float)
    return camera_position(k, config) @ _rotation(tilt).T


def spot_radius(config, waist=None):
    """f lambda / (pi w0): radius of one site's focal spot."""
    return config.focal_length * config.wavelength / (math.pi * (config.waist if waist is None else waist))


def wavepacket_sigma(beam_radius, config):
    """Envelope width sigma_G (in sites) of the packet made by a beam of radius ``beam_radius``: Lambda / (pi w)."""
    return config.grating_period / (math.pi * beam_radius)


def beam_diameter(dist, config):
    """Camera diameter of a distribution, 4 standard deviations times the site pitch, averaged over x and y."""
    dist = dist.normalized()
    xs, ys = dist.coordinates
    px, py = dist.probabilities.sum(axis=1), dist.probabilities.sum(axis=0)
    var_x = px @ xs ** 2 - (px @ xs) ** 2
    var_y = py @ ys ** 2 - (py @ ys) ** 2
    return 2.0 * (math.sqrt(var_x) + math.sqrt(var_y)) * config.site_pitch


def overlap_visibility(offset, radius):
    """Amplitude overlap of two identical Gaussians of radius ``radius`` displaced by ``offset``."""
    return np.exp(-np.asarray(offset, dtype=float) ** 2 / (2.0 * radius ** 2))


@dataclass(frozen=True)
class CrosstalkReport:
    amplitude: float
    power: float
    box_leakage: float

    @property
    def matches(self):
        """The convention closest to the ~0.8% quoted for the set-up."""
        values = {'amplitude': self.amplitude, 'power': self.power, 'box_leakage': self.box_leakage}
        return min(values, key=lambda k: abs(math.log(max(values[k], 1e-300) / REPORTED_CROSSTALK)))

    @property
    def value(self):
        return getattr(self, self.matches)


def adjacent_mode_overlap(config):
    """
    Crosstalk between neighbouring sites under three conventions.

    ``amplitude`` is the overlap integral of two unit focal-plane amplitudes one
    pitch apart, ``power`` its square, and ``box_leakage`` the fraction of a
    spot's power falling past the edge of its integration box toward one
    neighbour.
    """
    w = spot_radius(config)
    d = config.site_pitch / w
    overlap, _ = integrate.quad(lambda u: math.exp(-u * u - (u - d) ** 2), -np.inf, np.inf)
    norm, _ = integrate.quad(lambda u: math.exp(-2.0 * u * u), -np.inf, np.inf)
    amplitude = overlap / norm
    sigma = w / 2.0
    margin = config.site_pitch * BOX_FRACTION
    leakage = 0.5 * special.erfc(margin / (sigma * math.sqrt(2.0)))
    return CrosstalkReport(amplitude, amplitude ** 2, float(leakage))


@dataclass(frozen=True)
class RasterSpec:
    shape: Tuple[int, int] = (1024, 1024)
    pixel_pitch: float = 5e-6
    center: Tuple[float, float] = (0.0, 0.0)

    def coordinates(self):
        """(x of each column, y of each row)."""
        rows, cols = self.shape
        xs = self.center[0] + (np.arange(cols) - (cols - 1) / 2.0) * self.pixel_pitch
        ys = self.center[1] + (np.arange(rows) - (rows - 1) / 2.0) * self.pixel_pitch
        return xs, ys


@dataclass(frozen=True, eq=False)
class CameraImage:
    """Intensity raster; row index is y, column index is x; ``origin`` is the centre of pixel (0, 0)."""
    intensity: np.ndarray
    pixel_pitch: float
    origin: Tuple[float, float]
    clipped_fraction: float = 0.0

    def __post_init__(self):
        intensity = np.array(self.intensity, dtype=float)
        if intensity.ndim != 2 or np.any(intensity < 0) or not np.all(np.isfinite(intensity)):
            raise InvalidArgumentError('camera intensities must be a finite, non-negative 2D raster')
        object.__setattr__(self, 'intensity', intensity)

    def coordinates(self):
        rows, cols = self.intensity.shape
        return (self.origin[0] + np.arange(cols) * self.pixel_pitch,
                self.origin[1] + np.arange(rows) * self.pixel_pitch)

    @property
    def total_power(self):
        return float(self.intensity.sum())

    def to_pgm(self, target=None, metadata=None):
        """
        16-bit binary PGM (P5, big-endian). The header comments carry the pixel
        pitch, the origin and the intensity of full scale.
        """
        rows, cols = self.intensity.shape
        peak = float(self.intensity.max())
        scaled = np.zeros_like(self.intensity) if peak == 0 else self.intensity / peak * 65535.0
        data = np.round(scaled).astype('>u2').tobytes()
        comments = dict(metadata or {})
        comments.update({'pixel_pitch': repr(self.pixel_pitch), 'origin': f'{self.origin[0]!r} {self.origin[1]!r}',
                         'full_scale': repr(peak)})
        header = 'P5\n' + ''.join(f'# {k}: {v}\n' for k, v in comments.items()) + f'{cols} {rows}\n65535\n'
        payload = header.encode('ascii') + data
        if target is not None:
            Path(target).write_bytes(payload)
        return payload

    def to_png(self, target):
        from matplotlib import image as mpimg
        mpimg.imsave(target, self.intensity, cmap='gray', origin='lower')


def _profiles(centres, axis, radius, power):
    """Gaussian spot profiles along one raster axis, one row per centre."""
    return np.exp(-power * (axis[None, :] - centres[:, None]) ** 2 / radius ** 2)


def render_focal_plane(source, config, raster=None, tilt=0.0):
    """
    Synthetic camera frame of a Distribution (incoherent sum of spots) or of a
    WalkerState (coherent: fields of all sites add per coin, intensities add
    over coins).

    Each spot holds the power of its site. Power missing from the raster is
    reported in ``clipped_fraction`` and logged above 0.1%.
    """
    raster = raster or RasterSpec()
    xs, ys = raster.coordinates()
    w = spot_radius(config)
    coherent = isinstance(source, WalkerState)
    power = 1.0 if coherent else 2.0
    if coherent:
        weights = source.amplitudes
        expected = float(np.sum(np.abs(weights) ** 2))
    else:
        weights = source.probabilities
        expected = source.total

    if tilt == 0:
        mx, my = source.coordinates
        gx = _profiles(config.site_pitch * mx, xs, w, power)
        gy = _profiles(config.site_pitch * my, ys, w, power)
        if coherent:
            intensity = sum(np.abs(gy.T @ weights[:, :, c].T @ gx) ** 2 for c in range(2))
        else:
            intensity = gy.T @ weights.T @ gx
    else:
        mx, my = np.meshgrid(*source.coordinates, indexing='ij')
        flat = weights.reshape(mx.size, -1)
        keep = np.any(flat != 0, axis=1)
        positions = site_position(np.stack([mx.ravel(), my.ravel()], axis=-1)[keep], config, tilt)
        flat = flat[keep]
        gx = _profiles(positions[:, 0], xs, w, power)
        gy = _profiles(positions[:, 1], ys, w, power)
        if coherent:
            intensity = sum(np.abs((gy.T * flat[:, c]) @ gx) ** 2 for c in range(2))
        else:
            intensity = (gy.T * flat[:, 0]) @ gx
    intensity = np.asarray(intensity, dtype=float) * (2.0 / (math.pi * w ** 2) * raster.pixel_pitch ** 2)

    clipped = 0.0 if expected == 0 else max(0.0, 1.0 - float(intensity.sum()) / expected)
    if clipped > CLIP_WARNING:
        logger.warning('raster clips %.3g%% of the power; enlarge the raster', 100.0 * clipped)
    origin = (float(xs[0]), float(ys[0]))
    return CameraImage(intensity, raster.pixel_pitch, origin, clipped)


@dataclass(frozen=True, eq=False)
class SiteGrid:
    """Camera coordinates of lattice sites plus the half-width of their square integration boxes."""
    indices: np.ndarray
    positions: np.ndarray
    half_width: float
    origin: np.ndarray = field(default_factory=lambda: np.zeros(2))
    lattice: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=int).reshape(-1, 2)
        positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        if len(indices) != len(positions):
            raise InvalidArgumentError('site indices and positions differ in length')
        if len(positions) > 1:
            gaps = np.abs(positions[:, None, :] - positions[None, :, :]).max(axis=-1)
            np.fill_diagonal(gaps, np.inf)
            if gaps.min() < 2.0 * self.half_width:
                raise InvalidArgumentError('integration boxes overlap')
        object.__setattr__(self, 'indices', indices)
        object.__setattr__(self, 'positions', positions)

    @classmethod
    def nominal(cls, config, max_order, tilt=0.0):
        m = np.arange(-max_order, max_order + 1)
        mx, my = np.meshgrid(m, m, indexing='ij')
        indices = np.stack([mx.ravel(), my.ravel()], axis=-1)
        lattice = config.site_pitch * _rotation(tilt)
        return cls(indices, site_position(indices, config, tilt), BOX_FRACTION * config.site_pitch,
                   np.zeros(2), lattice)

    def to_json(self, target=None, metadata=None):
        payload = {
            'metadata': dict(metadata or {}),
            'half_width': self.half_width,
            'origin': self.origin.tolist(),
            'lattice_vectors': self.lattice.T.tolist(),
            'sites': [{'m_x': int(m[0]), 'm_y': int(m[1]), 'X': float(p[0]), 'Y': float(p[1])}
                      for m, p in zip(self.indices, self.positions)],
        }
        text = json.dumps(payload, indent=2, sort_keys=True)
        if target is not None:
            Path(target).write_text(text)
        return text


def _gaussian_spot(coords, amplitude, x0, y0, radius):
    x, y = coords
    return amplitude * np.exp(-2.0 * ((x - x0) ** 2 + (y - y0) ** 2) / radius ** 2)


def fit_spot(image, guess, half_size, radius):
    """Least-squares Gaussian fit of the spot near ``guess``; returns its centre (X, Y)."""
    xs, ys = image.coordinates()
    cols = np.flatnonzero(np.abs(xs - guess[0]) <= half_size)
    rows = np.flatnonzero(np.abs(ys - guess[1]) <= half_size)
    if cols.size < 4 or rows.size < 4:
        raise CalibrationError(f'spot near {tuple(guess)} lies outside the raster')
    patch = image.intensity[np.ix_(rows, cols)]
    if patch.max() <= 0:
        raise CalibrationError(f'no light near {tuple(guess)}')
    # fit in units of the spot radius around the guess
    u, v = np.meshgrid((xs[cols] - guess[0]) / radius, (ys[rows] - guess[1]) / radius)
    iy, ix = np.unravel_index(np.argmax(patch), patch.shape)
    p0 = (patch.max(), u[iy, ix], v[iy, ix], 1.0)
    try:
        params, _ = optimize.curve_fit(_gaussian_spot, (u.ravel(), v.ravel()), patch.ravel(), p0=p0, maxfev=5000)
    except (RuntimeError, ValueError, optimize.OptimizeWarning) as e:
        raise CalibrationError(f'spot fit near {tuple(guess)} diverged: {e}')
    x0, y0 = params[1] * radius + guess[0], params[2] * radius + guess[1]
    if abs(x0 - guess[0]) > half_size or abs(y0 - guess[1]) > half_size:
        raise CalibrationError(f'spot fit near {tuple(guess)} left its window')
    return float(x0), float(y0)


def calibrate_sites(config, max_order=5, raster=None, tilt=0.0):
    """
    Recover the site grid from synthetic calibration frames.

    For each axis, |H> at the origin is driven by ``U_axis = T_axis(pi) H_wp``;
    after t steps it sits on m = +t and -t. Both spots of every frame are
    fitted, and the origin and lattice vectors are obtained by least squares
    over all fitted centres. ``tilt`` rotates the grating axes of the
    simulated set-up.
    """
    if max_order < 1:
        raise InvalidArgumentError(f'max_order must be at least 1, got {max_order}')
    pitch, radius = config.site_pitch, spot_radius(config)
    indices, centres = [], []
    for axis in ('x', 'y'):
        protocol = calibration_protocol(axis, config.grating_period)
        frames = iterate(localized_state((0, 0), 'H'), protocol, max_order)
        for t, state in enumerate(frames):
            if t == 0:
                continue
            image = render_focal_plane(distribution(state), config, raster, tilt)
            for sign in (1, -1):
                m = (sign * t, 0) if axis == 'x' else (0, sign * t)
                centres.append(fit_spot(image, site_position(m, config), 0.5 * pitch, radius))
                indices.append(m)
    indices, centres = np.array(indices, dtype=float), np.array(centres)
    design = np.column_stack([np.ones(len(indices)), indices])
    solution, *_ = np.linalg.lstsq(design, centres, rcond=None)
    origin, lattice = solution[0], solution[1:].T
    m = np.arange(-max_order, max_order + 1)
    mx, my = np.meshgrid(m, m, indexing='ij')
    grid = np.stack([mx.ravel(), my.ravel()], axis=-1)
    positions = origin + grid @ lattice.T
    half_width = BOX_FRACTION * float(min(np.linalg.norm(lattice, axis=0)))
    logger.info('calibrated lattice vectors %s, origin %s', lattice.T.tolist(), origin.tolist())
    return SiteGrid(grid, positions, half_width, origin, lattice)


def extract_distribution(image, site_grid):
    """Integrate the intensity in each site's box and normalize the box powers to 1."""
    if image.total_power <= 0:
        raise EmptyImageError('camera image holds no light')
    xs, ys = image.coordinates()
    half_pixel = image.pixel_pitch / 2.0
    a = site_grid.half_width
    span = int(np.abs(site_grid.indices).max())
    probabilities = np.zeros((2 * span + 1, 2 * span + 1))
    for (mx, my), (x, y) in zip(site_grid.indices, site_grid.positions):
        if x - a < xs[0] - half_pixel or x + a > xs[-1] + half_pixel or \
                y - a < ys[0] - half_pixel or y + a > ys[-1] + half_pixel:
            raise InvalidArgumentError(f'box of site ({mx}, {my}) leaves the raster')
        c0, c1 = np.searchsorted(xs, [x - a, x + a])
        r0, r1 = np.searchsorted(ys, [y - a, y + a])
        probabilities[mx + span, my + span] = image.intensity[r0:r1, c0:c1].sum()
    total = probabilities.sum()
    if total <= 0:
        raise EmptyImageError('no light inside the site boxes')
    return Distribution(probabilities / total)


@dataclass
class NonIdealityResult:
    distribution: Distribution
    ideal: Distribution
    similarity: float
    steps: int
    config: OpticalConfig

    def summary(self):
        return {'steps': self.steps, 'similarity': self.similarity, **self.config.as_dict()}


def simulate_nonidealities_1d(delta, steps, config, coin='R', alpha0=0.0):
    """
    1D walk ``U = T_x W`` including free-space propagation between steps.

    Every coin history is a path; paths ending on the same (m, coin) differ by
    (1) the phase ``2pi lambda d s^2 / Lambda^2`` picked up per step while in
    order s, (2) the lateral offset ``d lambda s / Lambda`` accumulated per
    step, and (3) the optic-axis offset ``alpha0 + x pi / Lambda`` that offset
    produces at the following g-plate. The phase and the g-plate offsets enter
    the amplitudes; paths with different offsets interfere with visibility
    ``exp(-dx^2 / 2 w0^2)``. Paths are grouped by their summed order, which
    fixes the offset, so the sum is exact without enumerating 2^steps paths.
    """
    if steps > MAX_PATH_STEPS:
        raise CombinatorialLimitError(f'path sum is limited to {MAX_PATH_STEPS} steps, got {steps}')
    if steps < 0:
        raise InvalidArgumentError(f'number of steps must be non-negative, got {steps}')
    spinor = as_spinor(coin)
    Lambda, d, lam = config.grating_period, config.plate_distance, config.wavelength
    size = steps + 1
    span = steps * (steps - 1) // 2
    orders = np.arange(-size, size + 1)
    amplitudes = np.zeros((2 * size + 1, 2, 2 * span + 1), dtype=complex)
    amplitudes[size, :, span] = spinor.amplitudes

    shift = d * lam / Lambda
    offsets = shift * np.arange(-span, span + 1)
    alpha = alpha0 + offsets * math.pi / Lambda
    coin_matrix = lc_plate(math.pi / 2.0, 0.0).matrix
    c, s = math.cos(delta / 2.0), math.sin(delta / 2.0)
    propagation = np.exp(-2j * math.pi * lam * d * orders ** 2 / Lambda ** 2)

    for t in range(steps):
        amplitudes = np.einsum('ij,mjs->mis', coin_matrix, amplitudes)
        left, right = amplitudes[:, 0, :], amplitudes[:, 1, :]
        new_left = c * left + 1j * s * np.exp(-2j * alpha) * np.roll(right, -1, axis=0)
        new_right = c * right + 1j * s * np.exp(2j * alpha) * np.roll(left, 1, axis=0)
        amplitudes = np.stack([new_left, new_right], axis=1)
        if t < steps - 1:
            amplitudes = amplitudes * propagation[:, None, None]
            for i, order in enumerate(orders):
                if order:
                    amplitudes[i] = np.roll(amplitudes[i], order, axis=-1)

    visibility = overlap_visibility(offsets[:, None] - offsets[None, :], config.waist)
    weights = np.einsum('mcs,st,mct->m', amplitudes, visibility, np.conj(amplitudes)).real
    weights = np.clip(weights, 0.0, None)
    real = Distribution((weights / weights.sum())[:, None])

    ideal_state = evolve(localized_state((0, 0), spinor), walk_1d_protocol(delta, Lambda), steps)
    ideal = distribution(ideal_state)
    return NonIdealityResult(real, ideal, similarity(real, ideal), steps, config)
