"""
Floquet band structure of ``U = T_y T_x W``.

For every quasi-momentum ``U(q) = exp(-i eps(q) n(q).sigma)`` with the principal
branch ``eps in [0, pi]``. Band '+' carries quasi-energy +eps (eigenvector of
``n.sigma`` with eigenvalue +1), band '-' carries -eps.

Berry curvature is ``Omega_-(q) = -1/2 n.(d_x n x d_y n)`` and ``Omega_+ = -Omega_-``,
the sign under which the Chern number of the '-' band is +1 at delta = pi/2. A
force ``F_x`` moves the walk through ``q_x -> q_x - F_x t`` and adds ``F_x Omega`` to
the y-velocity, and the Chern number is ``(1/2pi) sum Omega``.
"""
import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, NamedTuple, Optional

import numpy as np
from scipy import optimize

from walkapp.coin_ops import PAULI, CoinSpinor, bloch_matrices, protocol_U
from walkapp.exceptions import (
    DegeneratePointError, InvalidArgumentError, NearCriticalError, NumericalDomainError,
)
from walkapp.parallel import ordered_map

logger = logging.getLogger(__name__)

DEGENERACY_TOLERANCE = 1e-8
CRITICAL_GAP = 1e-6
DOMAIN_TOLERANCE = 1e-9
FD_STEP = 1e-5


def band_sign(band):
    if band in ('+', 1, 'upper'):
        return 1
    if band in ('-', -1, 'lower'):
        return -1
    raise InvalidArgumentError(f"band must be '+' or '-', got {band!r}")


def _coefficients(delta):
    return math.cos(delta / 2.0), math.sin(delta / 2.0)


def cos_quasi_energy(qx, qy, delta):
    """Closed form of cos(eps): (A^2 - AB(cos qx + cos qy) - B^2 cos(qx - qy)) / sqrt 2."""
    a, b = _coefficients(delta)
    return (a * a - a * b * (np.cos(qx) + np.cos(qy)) - b * b * np.cos(qx - qy)) / math.sqrt(2.0)


def quasi_energy(q, delta):
    """
    Quasi-energy eps(q) in [0, pi]; the two bands sit at +eps and -eps.

    ``q`` is a pair ``(q_x, q_y)`` of floats or of equally shaped arrays.
    """
    qx, qy = np.asarray(q[0], dtype=float), np.asarray(q[1], dtype=float)
    cos_eps = cos_quasi_energy(qx, qy, delta)
    excess = np.max(np.abs(cos_eps)) - 1.0
    if excess > DOMAIN_TOLERANCE:
        raise NumericalDomainError(f'|cos eps| exceeds 1 by {excess:.3g} at delta={delta}')
    eps = np.arccos(np.clip(cos_eps, -1.0, 1.0))
    return float(eps) if eps.ndim == 0 else eps


def n_vector(q, delta):
    """
    Unit vector n(q) of ``U(q) = cos eps - i sin eps n.sigma``, in closed form.

    Returns NaN components where ``sin eps < 1e-8``. Works on arrays; the
    components are stacked on the last axis.
    """
    qx, qy = np.asarray(q[0], dtype=float), np.asarray(q[1], dtype=float)
    a, b = _coefficients(delta)
    sin_eps = np.sin(quasi_energy((qx, qy), delta))
    with np.errstate(divide='ignore', invalid='ignore'):
        scale = np.where(sin_eps < DEGENERACY_TOLERANCE, np.nan, 1.0 / (math.sqrt(2.0) * sin_eps))
    sum_sin = a * b * (np.sin(qx) + np.sin(qy))
    diff_sin = b * b * np.sin(qx - qy)
    nx = -(a * a + a * b * (np.cos(qx) + np.cos(qy)) - b * b * np.cos(qx - qy)) * scale
    ny = (sum_sin + diff_sin) * scale
    nz = (sum_sin - diff_sin) * scale
    return np.stack([nx, ny, nz], axis=-1)


def _curvature_from_n(qx, qy, delta, h):
    """1/2 n.(d_x n x d_y n) by central differences; Omega of the '+' band."""
    n = n_vector((qx, qy), delta)
    dx = (n_vector((qx + h, qy), delta) - n_vector((qx - h, qy), delta)) / (2.0 * h)
    dy = (n_vector((qx, qy + h), delta) - n_vector((qx, qy - h), delta)) / (2.0 * h)
    return 0.5 * np.einsum('...i,...i->...', n, np.cross(dx, dy))


def _band_states(qx, qy, delta, band):
    """
    Band eigenvectors from ``K = i(U - U^dag)/2 = sin(eps) n.sigma``.

    ``eigh`` sorts ascending, so column 0 is the '-' band.
    """
    u = bloch_matrices(protocol_U(delta), qx, qy)
    k = 0.5j * (u - np.conj(np.swapaxes(u, -1, -2)))
    _, vectors = np.linalg.eigh(k)
    return vectors[..., :, 0 if band_sign(band) < 0 else 1]


def band_projectors(matrices, band):
    """
    ``(1 + b n.sigma) / 2`` onto ``band`` for every Bloch matrix in ``matrices``.

    ``K = i(M - M^dag)/2 = sin(eps) n.sigma`` holds for the step of U and for
    ``-U^dag`` alike, so the matrices may come from either protocol, forced or not.
    """
    k = 0.5j * (matrices - np.conj(np.swapaxes(matrices, -1, -2)))
    sin_eps = np.sqrt(k[..., 0, 0].real ** 2 + np.abs(k[..., 0, 1]) ** 2)
    if sin_eps.min() < DEGENERACY_TOLERANCE:
        raise NearCriticalError('bands touch on the projection grid; the band is not defined there', min_gap=0.0)
    return 0.5 * (np.eye(2) + band_sign(band) * k / sin_eps[..., None, None])


def _require_gapped(q, delta):
    eps = quasi_energy(q, delta)
    if math.sin(eps) < DEGENERACY_TOLERANCE:
        raise DegeneratePointError(f'bands touch at q={tuple(q)} for delta={delta}', q=tuple(q))
    return eps


@dataclass(frozen=True, eq=False)
class BlochSample:
    q: tuple
    delta: float
    epsilon: float
    n: np.ndarray
    phi_plus: CoinSpinor
    phi_minus: CoinSpinor
    omega: Optional[float] = None

    def spinor(self, band):
        return self.phi_plus if band_sign(band) > 0 else self.phi_minus

    def hamiltonian(self):
        return self.epsilon * np.einsum('i,ijk->jk', self.n, np.array(PAULI))

    def reconstruct(self):
        """exp(-i eps n.sigma) = cos eps - i sin eps n.sigma."""
        n_sigma = np.einsum('i,ijk->jk', self.n, np.array(PAULI))
        return math.cos(self.epsilon) * np.eye(2) - 1j * math.sin(self.epsilon) * n_sigma

    def residual(self, band):
        """|H_eff phi - (+/-eps) phi| for one band."""
        phi = self.spinor(band).amplitudes
        return float(np.linalg.norm(self.hamiltonian() @ phi - band_sign(band) * self.epsilon * phi))


def bloch_hamiltonian(q, delta, curvature=True):
    """
    Effective Hamiltonian ``H_eff = eps n.sigma`` at one quasi-momentum.

    Raises DegeneratePointError at a gap closing (sin eps < 1e-8).
    """
    q = (float(q[0]), float(q[1]))
    eps = _require_gapped(q, delta)
    n = n_vector(q, delta)
    _, vectors = np.linalg.eigh(np.einsum('i,ijk->jk', n, np.array(PAULI)))
    omega = berry_curvature(q, delta, '-') if curvature else None
    return BlochSample(q=q, delta=delta, epsilon=eps, n=n, phi_plus=CoinSpinor(vectors[:, 1]),
                       phi_minus=CoinSpinor(vectors[:, 0]), omega=omega)


def gradient_grid(qx, qy, delta, h=FD_STEP):
    """Central-difference gradient of eps on arrays of quasi-momenta."""
    gx = (quasi_energy((qx + h, qy), delta) - quasi_energy((qx - h, qy), delta)) / (2.0 * h)
    gy = (quasi_energy((qx, qy + h), delta) - quasi_energy((qx, qy - h), delta)) / (2.0 * h)
    return gx, gy


def group_velocity(q, delta, band, h=FD_STEP):
    """v(+/-) = +/- grad eps, by central differences with step ``h``."""
    sign = band_sign(band)
    _require_gapped(q, delta)
    gx, gy = gradient_grid(float(q[0]), float(q[1]), delta, h)
    return sign * float(gx), sign * float(gy)


def berry_curvature(q, delta, band, h=FD_STEP):
    """Omega of ``band`` at ``q`` from the n-vector form."""
    sign = band_sign(band)
    _require_gapped(q, delta)
    return sign * float(_curvature_from_n(float(q[0]), float(q[1]), delta, h))


def berry_curvature_plaquette(q, delta, band, h=1e-4):
    """
    Eigenstate cross-check: Berry phase of a small square around ``q`` divided by its area.
    """
    _require_gapped(q, delta)
    qx, qy = float(q[0]), float(q[1])
    xs = np.array([qx - h / 2, qx + h / 2, qx + h / 2, qx - h / 2])
    ys = np.array([qy - h / 2, qy - h / 2, qy + h / 2, qy + h / 2])
    states = _band_states(xs, ys, delta, band)
    loop = 1.0 + 0j
    for i in range(4):
        loop *= np.vdot(states[i], states[(i + 1) % 4])
    return float(np.angle(loop)) / (h * h)


def periodic_grid(grid_n):
    """q_i = -pi + 2 pi i / n, i = 0..n-1, as an ij-indexed mesh."""
    k = -math.pi + 2.0 * math.pi * np.arange(grid_n) / grid_n
    return np.meshgrid(k, k, indexing='ij')


class ChernResult(NamedTuple):
    nu: int
    flux: float


def chern_number(delta, band='-', grid_n=24):
    """
    Chern number of ``band`` by the gauge-invariant plaquette method.

    Link variables between neighbouring grid points are multiplied around each
    plaquette; the phases add up to ``2 pi nu``. Returns the integer together
    with the raw flux sum.
    """
    if grid_n < 3:
        raise InvalidArgumentError(f'grid_n must be at least 3, got {grid_n}')
    qx, qy = periodic_grid(grid_n)
    eps = quasi_energy((qx, qy), delta)
    min_gap = float(2.0 * np.minimum(eps, math.pi - eps).min())
    if min_gap < CRITICAL_GAP:
        raise NearCriticalError(f'gap {min_gap:.3g} on the {grid_n}x{grid_n} grid at delta={delta:.6g}; '
                                f'move delta away from the transition', delta=delta, min_gap=min_gap)
    states = _band_states(qx, qy, delta, band)
    link_x = np.sum(np.conj(states) * np.roll(states, -1, axis=0), axis=-1)
    link_y = np.sum(np.conj(states) * np.roll(states, -1, axis=1), axis=-1)
    link_x /= np.abs(link_x)
    link_y /= np.abs(link_y)
    plaquette = link_x * np.roll(link_y, -1, axis=0) * np.conj(np.roll(link_x, -1, axis=1)) * np.conj(link_y)
    flux = float(np.angle(plaquette).sum()) / (2.0 * math.pi)
    return ChernResult(int(round(flux)), flux)


def integrate_curvature(delta, band='-', grid_n=64, h=FD_STEP):
    """(1/2pi) sum Omega dq^2 on a periodic grid; spectrally accurate for gapped bands."""
    qx, qy = periodic_grid(grid_n)
    omega = band_sign(band) * _curvature_from_n(qx, qy, delta, h)
    if not np.all(np.isfinite(omega)):
        raise NearCriticalError(f'curvature undefined on the grid at delta={delta:.6g}', delta=delta, min_gap=0.0)
    cell = (2.0 * math.pi / grid_n) ** 2
    return float(omega.sum() * cell / (2.0 * math.pi))


class BandGaps(NamedTuple):
    gap_at_0: float
    gap_at_pi: float


def _refine(delta, start, spacing, sense):
    """Polish a grid extremum of cos(eps): ``sense=+1`` maximizes, ``-1`` minimizes."""
    bounds = [(start[0] - 2 * spacing, start[0] + 2 * spacing), (start[1] - 2 * spacing, start[1] + 2 * spacing)]
    result = optimize.minimize(lambda q: -sense * cos_quasi_energy(q[0], q[1], delta), np.asarray(start),
                               method='L-BFGS-B', bounds=bounds, options={'ftol': 1e-15, 'gtol': 1e-12})
    return -sense * float(result.fun)


def band_gaps(delta, grid_n=101):
    """
    Gaps around quasi-energy 0 and pi: ``2 min eps`` and ``2 (pi - max eps)``.

    Extremes are taken on an endpoint-inclusive grid and polished by one local
    optimization around the best grid point.
    """
    k = np.linspace(-math.pi, math.pi, grid_n)
    qx, qy = np.meshgrid(k, k, indexing='ij')
    cos_eps = cos_quasi_energy(qx, qy, delta)
    spacing = k[1] - k[0]
    i_hi = np.unravel_index(np.argmax(cos_eps), cos_eps.shape)
    i_lo = np.unravel_index(np.argmin(cos_eps), cos_eps.shape)
    cos_hi = max(float(cos_eps[i_hi]), _refine(delta, (qx[i_hi], qy[i_hi]), spacing, +1))
    cos_lo = min(float(cos_eps[i_lo]), _refine(delta, (qx[i_lo], qy[i_lo]), spacing, -1))
    eps_min = math.acos(min(max(cos_hi, -1.0), 1.0))
    eps_max = math.acos(min(max(cos_lo, -1.0), 1.0))
    return BandGaps(2.0 * eps_min, 2.0 * (math.pi - eps_max))


@dataclass
class PhaseRow:
    delta: float
    chern_minus: Optional[int]
    gap0: float
    gappi: float
    note: str = ''

    @property
    def near_critical(self):
        return self.chern_minus is None


@dataclass
class Transition:
    delta: float
    gap: str
    residual_gap: float
    bracket: tuple


@dataclass
class PhaseDiagram:
    rows: List[PhaseRow]
    transitions: List[Transition] = field(default_factory=list)

    def to_csv(self, target=None, metadata=None):
        buffer = io.StringIO()
        for key, value in (metadata or {}).items():
            buffer.write(f'# {key}: {value}\n')
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['delta', 'chern_minus', 'gap0', 'gappi'])
        for row in self.rows:
            chern = 'near-critical' if row.near_critical else row.chern_minus
            writer.writerow([f'{row.delta:.12g}', chern, f'{row.gap0:.12g}', f'{row.gappi:.12g}'])
        text = buffer.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text


def _phase_row(delta, grid_n, gap_grid):
    gaps = band_gaps(delta, gap_grid)
    try:
        nu = chern_number(delta, '-', grid_n).nu
        note = ''
    except NearCriticalError as e:
        logger.warning('phase diagram row delta=%.6g marked near-critical: %s', delta, e)
        nu, note = None, str(e)
    return PhaseRow(delta, nu, gaps.gap_at_0, gaps.gap_at_pi, note)


def locate_transition(lower, upper, gap_grid=101):
    """Bracket a gap closing between two deltas by minimizing both gaps over the interval."""
    best = None
    for name, index in (('0', 0), ('pi', 1)):
        result = optimize.minimize_scalar(lambda d: band_gaps(d, gap_grid)[index], bounds=(lower, upper),
                                          method='bounded', options={'xatol': 1e-7})
        if best is None or result.fun < best.residual_gap:
            best = Transition(float(result.x), name, float(result.fun), (lower, upper))
    return best


def phase_diagram(delta_samples, grid_n=24, gap_grid=101, threads=None):
    """
    Lower-band Chern number and both gaps over a sweep of delta.

    Rows where the gap is too small for a reliable integer are kept and marked.
    Wherever the Chern number changes between valid rows, the closing is
    located by minimizing the gaps inside the bracket.
    """
    deltas = [float(d) for d in delta_samples]
    if not deltas:
        raise InvalidArgumentError('phase diagram needs at least one delta')
    rows = ordered_map(lambda d: _phase_row(d, grid_n, gap_grid), deltas, threads)
    valid = [row for row in rows if not row.near_critical]
    transitions = []
    for left, right in zip(valid, valid[1:]):
        if left.chern_minus != right.chern_minus:
            transition = locate_transition(left.delta, right.delta, gap_grid)
            logger.info('transition at delta=%.6f (gap %s closes, residual %.2g)',
                        transition.delta, transition.gap, transition.residual_gap)
            transitions.append(transition)
    return PhaseDiagram(rows, transitions)


@dataclass(frozen=True, eq=False)
class BZGrid:
    """Uniform samples of the band structure over [-pi, pi)^2."""
    delta: float
    qx: np.ndarray
    qy: np.ndarray
    epsilon: np.ndarray
    n: np.ndarray
    omega_minus: np.ndarray
    periodic: bool = True

    def to_csv(self, target=None, metadata=None):
        buffer = io.StringIO()
        for key, value in (metadata or {}).items():
            buffer.write(f'# {key}: {value}\n')
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['q_x', 'q_y', 'epsilon', 'n_x', 'n_y', 'n_z', 'omega_minus'])
        for i, j in np.ndindex(self.qx.shape):
            values = (self.qx[i, j], self.qy[i, j], self.epsilon[i, j], *self.n[i, j], self.omega_minus[i, j])
            writer.writerow([f'{v:.12g}' for v in values])
        text = buffer.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text


def bz_grid(delta, grid_n=64, h=FD_STEP):
    qx, qy = periodic_grid(grid_n)
    eps = quasi_energy((qx, qy), delta)
    n = n_vector((qx, qy), delta)
    omega = -_curvature_from_n(qx, qy, delta, h)
    if not np.all(np.isfinite(n)):
        logger.warning('delta=%.6g: gap closes on the grid; n and Omega are NaN there', delta)
    return BZGrid(delta, qx, qy, eps, n, omega)
