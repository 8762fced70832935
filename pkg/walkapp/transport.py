"""
Wavepacket transport: group velocities, force-driven drift and the
band-averaged anomalous displacement that measures the Chern number.

A force F_x moves q_x by -F_x per step. To first order a packet in band b
then moves as ``dm/dt = v_b(q) + F_x Omega_b(q) y``; averaged over a filled
band the velocity term cancels and the y-drift per step is ``F_x nu / 2pi``.
"""
import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import integrate, stats

from walkapp.bloch import (
    band_gaps, band_projectors, band_sign, berry_curvature, bloch_hamiltonian, group_velocity,
)
from walkapp.coin_ops import bloch_matrices, protocol_U, protocol_U_inverse
from walkapp.exceptions import InvalidArgumentError
from walkapp.lattice_walk import WalkerState, center_of_mass, iterate, momentum_filter
from walkapp.parallel import ordered_map

logger = logging.getLogger(__name__)

MIN_SIGMA = 2.0
ENVELOPE_SIGMAS = 6
# step 0 runs without force, so the drift starts after it
FIT_START = 1


def bz_samples(grid):
    """q_i = -pi + 2 pi i / N, i = 1..N."""
    return -math.pi + 2.0 * math.pi * np.arange(1, grid + 1) / grid


@dataclass(frozen=True)
class WavepacketSpec:
    """
    A Gaussian packet ``exp(i q0.m - |m|^2 / sigma_G^2)`` in one band.

    With ``inverse`` the packet is meant for the inverse protocol and is
    prepared in the opposite band spinor: under U^-1 that state has the same
    group velocity as ``band`` under U and the opposite Berry curvature.
    """
    q0: Tuple[float, float]
    band: str = '-'
    sigma_G: float = 10.0
    delta: float = math.pi / 2
    inverse: bool = False

    def __post_init__(self):
        band_sign(self.band)
        q0 = (float(self.q0[0]), float(self.q0[1]))
        if not all(math.isfinite(q) for q in q0):
            raise InvalidArgumentError(f'q0 must be finite, got {self.q0}')
        if not self.sigma_G >= MIN_SIGMA:
            raise InvalidArgumentError(f'sigma_G must be at least {MIN_SIGMA}, got {self.sigma_G}')
        object.__setattr__(self, 'q0', q0)

    @property
    def protocol(self):
        return protocol_U_inverse(self.delta) if self.inverse else protocol_U(self.delta)

    @property
    def prepared_band(self):
        if not self.inverse:
            return self.band
        return '+' if band_sign(self.band) < 0 else '-'

    @property
    def window(self):
        return int(math.ceil(ENVELOPE_SIGMAS * self.sigma_G))

    def with_options(self, **changes):
        return replace(self, **changes)


def make_wavepacket(spec, half_width=None):
    """Normalized Gaussian-enveloped plane wave with the band spinor at q0 on every site."""
    sample = bloch_hamiltonian(spec.q0, spec.delta, curvature=False)
    coin = sample.spinor(spec.prepared_band).amplitudes
    width = spec.window if half_width is None else int(half_width)
    if width < math.ceil(4 * spec.sigma_G):
        raise InvalidArgumentError(f'window {width} does not hold the envelope (needs {math.ceil(4 * spec.sigma_G)})')
    m = np.arange(-width, width + 1)
    mx, my = np.meshgrid(m, m, indexing='ij')
    envelope = np.exp(-(mx ** 2 + my ** 2) / spec.sigma_G ** 2) * np.exp(1j * (spec.q0[0] * mx + spec.q0[1] * my))
    amplitudes = envelope[..., None] * coin
    return WalkerState(amplitudes / np.linalg.norm(amplitudes))


@dataclass(frozen=True)
class ForceConfig:
    """Force F_x in radians of q_x per step, with the gap it is compared against."""
    F_x: float
    gap: float = math.inf

    def __post_init__(self):
        if not math.isfinite(self.F_x):
            raise InvalidArgumentError(f'force must be finite, got {self.F_x}')

    @classmethod
    def for_delta(cls, F_x, delta):
        return cls(float(F_x), band_gaps(delta).gap_at_0)

    @property
    def ratio(self):
        return abs(self.F_x) / self.gap if self.gap > 0 else math.inf

    @property
    def adiabatic_risk(self):
        return abs(self.F_x) >= 0.5 * self.gap

    def check(self):
        if self.adiabatic_risk:
            message = f'force {self.F_x:.4g} is {self.ratio:.2f} of the gap {self.gap:.4g}; adiabaticity at risk'
            logger.warning(message)
            return [message]
        return []


def _as_force(force):
    return force if isinstance(force, ForceConfig) else ForceConfig(float(force))


class LinearFit(NamedTuple):
    slope: float
    intercept: float
    stderr: float


def linear_fit(t, values):
    result = stats.linregress(t, values)
    return LinearFit(float(result.slope), float(result.intercept), float(result.stderr))


@dataclass
class Trajectory:
    """Center of mass after each step, t = 0..T, and the fitted drift."""
    com: np.ndarray
    velocity: Tuple[float, float]
    velocity_err: Tuple[float, float]
    force: float = 0.0
    warnings: List[str] = field(default_factory=list)

    @property
    def steps(self):
        return len(self.com) - 1

    @property
    def displacement(self):
        return self.com - self.com[0]

    def to_csv(self, target=None, metadata=None):
        return _write_steps(self.displacement, target, metadata)


def _write_steps(displacement, target=None, metadata=None):
    buffer = io.StringIO()
    for key, value in (metadata or {}).items():
        buffer.write(f'# {key}: {value}\n')
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['t', 'dx', 'dy'])
    for t, (dx, dy) in enumerate(displacement):
        writer.writerow([t, f'{dx:.12g}', f'{dy:.12g}'])
    text = buffer.getvalue()
    if target is not None:
        Path(target).write_text(text)
    return text


def band_center_of_mass(state, protocol, t, force, band):
    """
    Center of mass of the part of ``state`` in ``band`` of the last step applied.

    After ``t`` steps that is the step at index ``t - 1`` (index 0 for the
    initial state), with its force shift.
    """
    index = max(t - 1, 0)

    def projector(qx, qy):
        return band_projectors(bloch_matrices(protocol, qx, qy, index, force), band)

    return center_of_mass(momentum_filter(state, projector))


def _trajectory(state, protocol, steps, force, jitter=None, band=None):
    states = iterate(state, protocol, steps, force, jitter)
    if band is None:
        com = np.array([center_of_mass(s) for s in states])
    else:
        com = np.array([band_center_of_mass(s, protocol, t, force, band) for t, s in enumerate(states)])
    t = np.arange(steps + 1)
    fx, fy = linear_fit(t, com[:, 0]), linear_fit(t, com[:, 1])
    return Trajectory(com, (fx.slope, fy.slope), (fx.stderr, fy.stderr), force)


class VelocityEstimate(NamedTuple):
    vx: float
    vy: float
    vx_err: float
    vy_err: float


def measure_group_velocity(spec, steps=5):
    """Least-squares slope of the center of mass over ``steps`` force-free steps."""
    if steps < 2:
        raise InvalidArgumentError(f'a velocity fit needs at least 2 steps, got {steps}')
    trajectory = _trajectory(make_wavepacket(spec), spec.protocol, steps, 0.0)
    return VelocityEstimate(*trajectory.velocity, *trajectory.velocity_err)


def forced_trajectory(spec, force, steps):
    """Evolve a packet under F_x (x-grating phases advance each step) and record its center of mass."""
    force = _as_force(force)
    warnings = force.check()
    trajectory = _trajectory(make_wavepacket(spec), spec.protocol, steps, force.F_x)
    trajectory.warnings.extend(warnings)
    return trajectory


def semiclassical_displacement(spec, force, steps):
    """
    Displacement predicted by the first-order equations of motion.

    Step t runs at ``q0 - t F_x x``; each step contributes the integral of
    ``v(q) + F_x Omega(q) y`` over ``tau in [t - 1/2, t + 1/2]`` along
    ``q(tau) = q0 - tau F_x x``. Returns an array of shape (steps + 1, 2).
    """
    force = _as_force(force).F_x
    state_band = spec.prepared_band
    direction = band_sign(state_band) * (-1 if spec.inverse else 1)
    qx0, qy0 = spec.q0

    def velocity(tau, component):
        q = (qx0 - force * tau, qy0)
        v = group_velocity(q, spec.delta, '+')[component] * direction
        if component == 1 and force:
            v += force * berry_curvature(q, spec.delta, state_band)
        return v

    out = np.zeros((steps + 1, 2))
    for t in range(steps):
        for component in (0, 1):
            value, _ = integrate.quad(velocity, t - 0.5, t + 0.5, args=(component,), epsabs=1e-10)
            out[t + 1, component] = out[t, component] + value
    return out


@dataclass
class AnomalousDisplacement:
    """Band-averaged center-of-mass displacement and the Chern number it implies."""
    delta: float
    band: str
    force: float
    grid: int
    steps: int
    direct: np.ndarray
    inverse: Optional[np.ndarray]
    points_direct: np.ndarray
    points_inverse: Optional[np.ndarray]
    nu_fit: float
    nu_err: float
    nu_fit_origin: float
    x_slope: float
    warnings: List[str] = field(default_factory=list)
    band_resolved: bool = True

    @property
    def combined(self):
        if self.inverse is None:
            return None
        return (self.direct - self.inverse) / 2.0

    @property
    def measured(self):
        return self.direct if self.inverse is None else self.combined

    def summary(self):
        return {
            'delta': self.delta,
            'F_x': self.force,
            'band': self.band,
            'grid': self.grid,
            'steps': self.steps,
            'combined': self.inverse is not None,
            'band_resolved': self.band_resolved,
            'nu_fit': self.nu_fit,
            'nu_err': self.nu_err,
            'nu_fit_origin': self.nu_fit_origin,
            'x_slope': self.x_slope,
        }

    def to_csv(self, target=None, metadata=None):
        return _write_steps(self.measured, target, metadata)

    def to_json(self, target=None, metadata=None):
        payload = {'metadata': dict(metadata or {}), 'summary': self.summary()}
        text = json.dumps(payload, indent=2, sort_keys=True)
        if target is not None:
            Path(target).write_text(text)
        return text


def _grid_displacements(delta, band, force, grid, steps, sigma_G, inverse, band_resolved, threads):
    q = bz_samples(grid)
    points = [(qx, qy) for qx in q for qy in q]

    def run(q0):
        spec = WavepacketSpec(q0, band, sigma_G, delta, inverse)
        readout = spec.prepared_band if band_resolved else None
        return _trajectory(make_wavepacket(spec), spec.protocol, steps, force, band=readout).displacement

    data = np.array(ordered_map(run, points, threads))
    return data.reshape(grid, grid, steps + 1, 2)


def band_averaged_displacement(delta, band='-', force=math.pi / 20, grid=11, steps=5,
                               combine_inverse=True, sigma_G=10.0, threads=None, band_resolved=True):
    """
    Average the displacement of packets centred on a uniform BZ grid.

    With ``combine_inverse`` the run is repeated with the inverse protocol and
    ``(U - U^-1) / 2`` is used: the velocity contributions cancel and the
    anomalous drift adds up. With ``band_resolved`` every center of mass is taken
    from the part of the packet still in its prepared band, which removes the
    share lost to the other band (it grows as F_x^2). ``nu_fit = 2 pi / F_x``
    times the affine slope of the y-displacement over t = 1..T; the fit
    anchored at t = 1 is reported alongside.
    """
    if grid < 1 or steps < 2:
        raise InvalidArgumentError('band average needs grid >= 1 and steps >= 2')
    warnings = ForceConfig.for_delta(force, delta).check()
    points_direct = _grid_displacements(delta, band, force, grid, steps, sigma_G, False, band_resolved, threads)
    direct = points_direct.mean(axis=(0, 1))
    points_inverse = inverse = None
    if combine_inverse:
        points_inverse = _grid_displacements(delta, band, force, grid, steps, sigma_G, True, band_resolved, threads)
        inverse = points_inverse.mean(axis=(0, 1))
    measured = direct if inverse is None else (direct - inverse) / 2.0

    t = np.arange(FIT_START, steps + 1)
    window = measured[FIT_START:]
    fit_y, fit_x = linear_fit(t, window[:, 1]), linear_fit(t, window[:, 0])
    tau = t - FIT_START
    slope_origin = float(tau @ (window[:, 1] - window[0, 1]) / (tau @ tau))
    if force:
        scale = 2.0 * math.pi / force
        nu_fit, nu_err, nu_origin = scale * fit_y.slope, abs(scale) * fit_y.stderr, scale * slope_origin
    else:
        nu_fit = nu_err = nu_origin = math.nan
    logger.info('delta=%.4g F=%.4g: nu_fit=%.4f +/- %.4f (origin fit %.4f)', delta, force, nu_fit, nu_err, nu_origin)
    return AnomalousDisplacement(delta, band, force, grid, steps, direct, inverse, points_direct, points_inverse,
                                 nu_fit, nu_err, nu_origin, fit_x.slope, warnings, band_resolved)


@dataclass
class VelocityMap:
    q: np.ndarray
    measured: np.ndarray
    analytic: np.ndarray

    @property
    def max_error(self):
        return float(np.max(np.abs(self.measured - self.analytic)))

    def to_csv(self, target=None, metadata=None):
        buffer = io.StringIO()
        for key, value in (metadata or {}).items():
            buffer.write(f'# {key}: {value}\n')
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['q_x', 'q_y', 'v_x', 'v_y', 'v_x_analytic', 'v_y_analytic'])
        for i, j in np.ndindex(self.measured.shape[:2]):
            values = (self.q[i], self.q[j], *self.measured[i, j], *self.analytic[i, j])
            writer.writerow([f'{v:.12g}' for v in values])
        text = buffer.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text


def velocity_map(delta, band='+', grid=11, steps=5, sigma_G=10.0, threads=None):
    """Measured against analytic group velocity on the transport grid."""
    q = bz_samples(grid)
    points = [(qx, qy) for qx in q for qy in q]

    def run(q0):
        estimate = measure_group_velocity(WavepacketSpec(q0, band, sigma_G, delta), steps)
        return (estimate.vx, estimate.vy), group_velocity(q0, delta, band)

    results = ordered_map(run, points, threads)
    measured = np.array([r[0] for r in results]).reshape(grid, grid, 2)
    analytic = np.array([r[1] for r in results]).reshape(grid, grid, 2)
    return VelocityMap(q, measured, analytic)


@dataclass
class MonteCarloResult:
    samples: np.ndarray
    sigma_shift: float
    seed: int

    @property
    def mean(self):
        return self.samples.mean(axis=0)

    @property
    def std(self):
        return self.samples.std(axis=0, ddof=1)

    def summary(self):
        return {
            'sigma_shift': self.sigma_shift,
            'seed': self.seed,
            'n_samples': len(self.samples),
            'final_mean': self.mean[-1].tolist(),
            'final_std': self.std[-1].tolist(),
        }

    def to_csv(self, target=None, metadata=None):
        """Per-step mean and spread of the center of mass over the samples."""
        buffer = io.StringIO()
        for key, value in (metadata or {}).items():
            buffer.write(f'# {key}: {value}\n')
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['t', 'mean_x', 'mean_y', 'std_x', 'std_y'])
        for t, (mean, std) in enumerate(zip(self.mean, self.std)):
            writer.writerow([t, *(f'{v:.12g}' for v in (*mean, *std))])
        text = buffer.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text


def misalignment_monte_carlo(delta, source, steps, sigma_shift, n_samples, seed, force=0.0, threads=None):
    """
    Center-of-mass statistics under random lateral grating shifts.

    Every grating at every step gets an independent Gaussian shift with
    standard deviation ``sigma_shift * Lambda``. Sample i draws from its own
    counter-based stream spawned from ``seed``, so the result does not depend
    on scheduling or thread count. ``source`` is a WavepacketSpec or a
    WalkerState (evolved with U(delta)).
    """
    if n_samples < 2:
        raise InvalidArgumentError(f'Monte Carlo needs at least 2 samples, got {n_samples}')
    if not sigma_shift >= 0:
        raise InvalidArgumentError(f'sigma_shift must be non-negative, got {sigma_shift}')
    if isinstance(source, WavepacketSpec):
        state, protocol = make_wavepacket(source), source.protocol
    else:
        state, protocol = source, protocol_U(delta)
    gratings = np.array([p.is_grating for p in protocol.plates], dtype=float)
    streams = np.random.SeedSequence(seed).spawn(n_samples)

    def run(stream):
        rng = np.random.Generator(np.random.Philox(stream))
        jitter = rng.normal(0.0, sigma_shift * protocol.Lambda, size=(steps, len(protocol.plates))) * gratings
        return _trajectory(state, protocol, steps, force, jitter).com

    samples = np.array(ordered_map(run, streams, threads))
    return MonteCarloResult(samples, sigma_shift, seed)
