"""
Exact position-space evolution of a walker on the 2D integer lattice.

A ``WalkerState`` stores a dense window ``[-Mx, Mx] x [-My, My]`` with the coin
index innermost, shape ``(2Mx+1, 2My+1, 2)``. Every grating application grows
the window by one site along its axis, so no amplitude is ever lost.
"""
import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from walkapp.coin_ops import (
    DEFAULT_GRATING_PERIOD, NORM_TOLERANCE, as_spinor, bloch_matrices, lc_plate,
)
from walkapp.exceptions import InvalidArgumentError, WindowOverflowError

logger = logging.getLogger(__name__)

EDGE_TOLERANCE = 1e-12


def _pad_to(array, half_width, target):
    """Zero-pad the two lattice axes of ``array`` from ``half_width`` to ``target``."""
    (mx, my), (tx, ty) = half_width, target
    if tx < mx or ty < my:
        raise InvalidArgumentError(f'cannot shrink window {half_width} to {target}')
    widths = [(tx - mx, tx - mx), (ty - my, ty - my)] + [(0, 0)] * (array.ndim - 2)
    return np.pad(array, widths)


def _half_width(shape):
    nx, ny = shape[:2]
    if nx % 2 == 0 or ny % 2 == 0:
        raise InvalidArgumentError(f'lattice window must have odd extent, got {shape[:2]}')
    return (nx - 1) // 2, (ny - 1) // 2


@dataclass(frozen=True, eq=False)
class WalkerState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex)
        if amplitudes.ndim != 3 or amplitudes.shape[2] != 2:
            raise InvalidArgumentError(f'walker amplitudes must have shape (nx, ny, 2), got {amplitudes.shape}')
        _half_width(amplitudes.shape)
        amplitudes.flags.writeable = False
        object.__setattr__(self, 'amplitudes', amplitudes)

    @property
    def half_width(self):
        return _half_width(self.amplitudes.shape)

    @property
    def coordinates(self):
        mx, my = self.half_width
        return np.arange(-mx, mx + 1), np.arange(-my, my + 1)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def amplitude(self, m, coin):
        mx, my = self.half_width
        if abs(m[0]) > mx or abs(m[1]) > my:
            return 0j
        return complex(self.amplitudes[m[0] + mx, m[1] + my, coin])

    def padded(self, half_width):
        return WalkerState(_pad_to(self.amplitudes, self.half_width, half_width))

    def boundary_weight(self):
        """Largest amplitude magnitude on the outermost ring of the window."""
        a = np.abs(self.amplitudes)
        return float(max(a[0].max(), a[-1].max(), a[:, 0].max(), a[:, -1].max()))


@dataclass(frozen=True, eq=False)
class Distribution:
    """Site probabilities over the same kind of window as a WalkerState."""
    probabilities: np.ndarray

    def __post_init__(self):
        probabilities = np.array(self.probabilities, dtype=float)
        if probabilities.ndim != 2:
            raise InvalidArgumentError(f'distribution must be 2D, got shape {probabilities.shape}')
        _half_width(probabilities.shape)
        if np.any(probabilities < 0) or not np.all(np.isfinite(probabilities)):
            raise InvalidArgumentError('probabilities must be finite and non-negative')
        probabilities.flags.writeable = False
        object.__setattr__(self, 'probabilities', probabilities)

    @property
    def half_width(self):
        return _half_width(self.probabilities.shape)

    @property
    def total(self):
        return float(self.probabilities.sum())

    @property
    def coordinates(self):
        mx, my = self.half_width
        return np.arange(-mx, mx + 1), np.arange(-my, my + 1)

    def at(self, m):
        mx, my = self.half_width
        if abs(m[0]) > mx or abs(m[1]) > my:
            return 0.0
        return float(self.probabilities[m[0] + mx, m[1] + my])

    def padded(self, half_width):
        return Distribution(_pad_to(self.probabilities, self.half_width, half_width))

    def normalized(self):
        total = self.total
        if total <= 0:
            raise InvalidArgumentError('cannot normalize an all-zero distribution')
        return Distribution(self.probabilities / total)

    def support_radius(self, tol=1e-14):
        """(max |m_x|, max |m_y|) over sites with probability above ``tol``."""
        xs, ys = self.coordinates
        ix, iy = np.nonzero(self.probabilities > tol)
        if ix.size == 0:
            return 0, 0
        return int(np.abs(xs[ix]).max()), int(np.abs(ys[iy]).max())

    def diagonal_weight(self, anti=True):
        """Total probability on the line m_x = -m_y (or m_x = m_y)."""
        xs, ys = self.coordinates
        mask = (xs[:, None] == -ys[None, :]) if anti else (xs[:, None] == ys[None, :])
        return float(self.probabilities[mask].sum())

    def rows(self):
        xs, ys = self.coordinates
        for i, mx in enumerate(xs):
            for j, my in enumerate(ys):
                yield int(mx), int(my), float(self.probabilities[i, j])

    def to_csv(self, target=None, metadata=None):
        """Write ``m_x,m_y,p`` rows (row-major, ascending); metadata goes in ``#`` comments."""
        buffer = io.StringIO()
        for key, value in (metadata or {}).items():
            buffer.write(f'# {key}: {value}\n')
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['m_x', 'm_y', 'p'])
        for mx, my, p in self.rows():
            writer.writerow([mx, my, f'{p:.17g}'])
        text = buffer.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text

    def to_json(self, target=None, metadata=None):
        payload = {
            'metadata': dict(metadata or {}),
            'half_width': list(self.half_width),
            'sites': [{'m_x': mx, 'm_y': my, 'p': p} for mx, my, p in self.rows()],
        }
        text = json.dumps(payload, indent=2, sort_keys=True)
        if target is not None:
            Path(target).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source):
        """Read a file written by ``to_csv``; ``source`` is a path or an open text file."""
        if isinstance(source, (str, Path)):
            lines = Path(source).read_text().splitlines()
        else:
            lines = source.read().splitlines()
        rows = list(csv.DictReader(line for line in lines if line.strip() and not line.startswith('#')))
        if not rows:
            raise InvalidArgumentError('distribution file has no rows')
        mx = np.array([int(row['m_x']) for row in rows])
        my = np.array([int(row['m_y']) for row in rows])
        wx, wy = int(np.abs(mx).max()), int(np.abs(my).max())
        probabilities = np.zeros((2 * wx + 1, 2 * wy + 1))
        probabilities[mx + wx, my + wy] = [float(row['p']) for row in rows]
        return cls(probabilities)


def localized_state(m, coin, margin=1):
    """
    Walker on the single site ``m`` with coin state ``coin``.

    ``coin`` may be a CoinSpinor, a polarization name (H, V, D, A, L, R) or
    two amplitudes; it must be normalized. The window keeps ``margin`` empty
    sites around the occupied one.
    """
    spinor = as_spinor(coin)
    if not spinor.is_normalized(NORM_TOLERANCE):
        raise InvalidArgumentError(f'coin state must be normalized, |c| = {spinor.norm:.15g}')
    mx, my = int(m[0]), int(m[1])
    wx, wy = abs(mx) + margin, abs(my) + margin
    amplitudes = np.zeros((2 * wx + 1, 2 * wy + 1, 2), dtype=complex)
    amplitudes[mx + wx, my + wy] = spinor.amplitudes
    return WalkerState(amplitudes)


def apply_plate(state, plate, Lambda=DEFAULT_GRATING_PERIOD, auto_grow=True):
    """
    Act with one plate on the whole lattice.

    A uniform plate rotates the coin on every site. A grating along x keeps
    ``cos(delta/2)`` of each component and converts the rest with a one-site
    shift: ``L(m) <- i s e^{-2i a} R(m + x)`` and ``R(m) <- i s e^{2i a} L(m - x)``,
    where ``a`` is the effective optic-axis offset of the (possibly shifted)
    plate. With ``auto_grow`` the window grows by one site along the axis.
    """
    amplitudes = state.amplitudes
    if not plate.is_grating:
        matrix = lc_plate(plate.delta, plate.alpha0).matrix
        return WalkerState(amplitudes @ matrix.T)

    axis = 0 if plate.axis == 'x' else 1
    if auto_grow:
        widths = [(0, 0)] * 3
        widths[axis] = (1, 1)
        amplitudes = np.pad(amplitudes, widths)
    else:
        edge = max(np.abs(np.take(amplitudes, 0, axis=axis)).max(),
                   np.abs(np.take(amplitudes, -1, axis=axis)).max())
        if edge > EDGE_TOLERANCE:
            raise WindowOverflowError(f'amplitude {edge:.3g} on the {plate.axis} boundary; enable auto_grow')

    c, s = math.cos(plate.delta / 2.0), math.sin(plate.delta / 2.0)
    alpha = plate.effective_alpha0(Lambda)
    left, right = amplitudes[..., 0], amplitudes[..., 1]
    out = np.empty_like(amplitudes)
    # padding (or an empty edge) guarantees the wrapped row is zero
    out[..., 0] = c * left + 1j * s * np.exp(-2j * alpha) * np.roll(right, -1, axis=axis)
    out[..., 1] = c * right + 1j * s * np.exp(2j * alpha) * np.roll(left, 1, axis=axis)
    return WalkerState(out)


def iterate(state, protocol, steps, force=0.0, jitter=None, auto_grow=True):
    """
    Yield the state after 0, 1, ..., ``steps`` applications of ``protocol``.

    ``jitter`` optionally holds per-step, per-plate lateral shifts with shape
    ``(steps, len(protocol.plates))``.
    """
    if steps < 0:
        raise InvalidArgumentError(f'number of steps must be non-negative, got {steps}')
    if jitter is not None:
        jitter = np.asarray(jitter, dtype=float)
        if jitter.shape != (steps, len(protocol.plates)):
            raise InvalidArgumentError(f'jitter must have shape {(steps, len(protocol.plates))}, got {jitter.shape}')
    yield state
    for t in range(steps):
        plates = protocol.at_step(t, force, None if jitter is None else jitter[t])
        for plate in plates:
            state = apply_plate(state, plate, protocol.Lambda, auto_grow)
        yield state


def evolve(state, protocol, steps, force=0.0, jitter=None, auto_grow=True):
    """|psi(t)> = U^t |psi(0)>, with the force entering through the x-grating phases."""
    for state in iterate(state, protocol, steps, force, jitter, auto_grow):
        pass
    return state


def evolve_momentum(state, protocol, steps, force=0.0):
    """
    Reference evolution in quasi-momentum space.

    The state is embedded in a periodic box large enough that nothing wraps,
    Fourier transformed, multiplied plane wave by plane wave with the Bloch
    matrices of ``protocol`` and transformed back. The result lives on the
    same window that ``evolve`` would produce.
    """
    gratings_x = sum(1 for p in protocol.plates if p.is_grating and p.axis == 'x')
    gratings_y = sum(1 for p in protocol.plates if p.is_grating and p.axis == 'y')
    mx, my = state.half_width
    target = (mx + steps * gratings_x, my + steps * gratings_y)
    amplitudes = state.padded(target).amplitudes
    nx, ny = amplitudes.shape[:2]

    qx = 2.0 * math.pi * np.fft.fftfreq(nx)
    qy = 2.0 * math.pi * np.fft.fftfreq(ny)
    QX, QY = np.meshgrid(qx, qy, indexing='ij')
    spectrum = np.fft.fft2(np.fft.ifftshift(amplitudes, axes=(0, 1)), axes=(0, 1))

    if force == 0.0:
        propagator = np.linalg.matrix_power(bloch_matrices(protocol, QX, QY), steps)
        spectrum = np.einsum('...ij,...j->...i', propagator, spectrum)
    else:
        for t in range(steps):
            spectrum = np.einsum('...ij,...j->...i', bloch_matrices(protocol, QX, QY, t, force), spectrum)

    amplitudes = np.fft.fftshift(np.fft.ifft2(spectrum, axes=(0, 1)), axes=(0, 1))
    return WalkerState(amplitudes)


def momentum_filter(state, operator):
    """
    Apply a 2x2 matrix per quasi-momentum to ``state`` on its own window.

    ``operator(QX, QY)`` returns matrices of shape ``(nx, ny, 2, 2)``. The window
    is treated as periodic, so the state has to sit well inside it.
    """
    amplitudes = state.amplitudes
    nx, ny = amplitudes.shape[:2]
    QX, QY = np.meshgrid(2.0 * math.pi * np.fft.fftfreq(nx), 2.0 * math.pi * np.fft.fftfreq(ny), indexing='ij')
    spectrum = np.fft.fft2(np.fft.ifftshift(amplitudes, axes=(0, 1)), axes=(0, 1))
    spectrum = np.einsum('...ij,...j->...i', operator(QX, QY), spectrum)
    return WalkerState(np.fft.fftshift(np.fft.ifft2(spectrum, axes=(0, 1)), axes=(0, 1)))


def fidelity(a, b):
    """|<a|b>|^2 after padding both states to a common window."""
    target = tuple(max(u, v) for u, v in zip(a.half_width, b.half_width))
    return float(abs(np.vdot(a.padded(target).amplitudes, b.padded(target).amplitudes)) ** 2)


def distribution(state, analyzer=None):
    """
    Site probabilities ``p(m) = sum_c |psi(m, c)|^2``.

    With ``analyzer`` (a polarization), the state is first projected on it, as
    a polarizer in front of the camera would do; the result is then not
    normalized.
    """
    if analyzer is None:
        return Distribution(np.sum(np.abs(state.amplitudes) ** 2, axis=2))
    spinor = as_spinor(analyzer).normalized()
    projected = state.amplitudes @ np.conj(spinor.amplitudes)
    return Distribution(np.abs(projected) ** 2)


def similarity(p_e, p_s):
    """
    S = (sum sqrt(P_e P_s))^2 / (sum P_e * sum P_s), in [0, 1].

    Distributions on different windows are zero-padded to a common one.
    """
    target = tuple(max(u, v) for u, v in zip(p_e.half_width, p_s.half_width))
    a, b = p_e.padded(target).probabilities, p_s.padded(target).probabilities
    norm = a.sum() * b.sum()
    if norm <= 0:
        raise InvalidArgumentError('similarity is undefined for an all-zero distribution')
    return float(min(np.sum(np.sqrt(a * b)) ** 2 / norm, 1.0))


def center_of_mass(obj):
    """<m> = sum m p(m) / sum p(m) of a WalkerState or a Distribution."""
    dist = distribution(obj) if isinstance(obj, WalkerState) else obj
    total = dist.total
    if total <= 0:
        raise InvalidArgumentError('center of mass of an all-zero distribution')
    xs, ys = dist.coordinates
    p = dist.probabilities
    return float(xs @ p.sum(axis=1) / total), float(ys @ p.sum(axis=0) / total)
