"""
Strip (cylinder) spectra and the edge-mode invariants W_0 and W_pi.

The strip is open along x with sites m = -N..N and periodic along y with
quasi-momentum q_y. Basis index of (m, coin) is ``2 (m + N) + coin``.
"""
import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
from scipy import linalg

from walkapp.bloch import band_gaps, chern_number
from walkapp.coin_ops import g_plate_momentum, lc_plate
from walkapp.exceptions import EdgeTrackingError, InvalidArgumentError, NearCriticalError
from walkapp.parallel import ordered_map

logger = logging.getLogger(__name__)

MIN_WIDTH = 8
LAMBDA_FLOOR = -12.0
DEGENERATE_SPLITTING = 1e-8
BOUNDARIES = ('reflecting', 'truncated')


def _open_grating(delta, size, boundary):
    """
    A grating along the open axis on ``size`` sites.

    Couples (L_m, R_{m+1}) through ``[[c, i s], [i s, c]]``. L at the last
    site and R at the first have no partner: 'truncated' keeps only their
    ``c`` part, 'reflecting' gives them unit amplitude. Both completions are
    real, so the strip spectrum stays symmetric under eps -> -eps.
    """
    c, s = math.cos(delta / 2.0), math.sin(delta / 2.0)
    dim = 2 * size
    matrix = np.zeros((dim, dim), dtype=complex)
    for m in range(size - 1):
        left, right = 2 * m, 2 * (m + 1) + 1
        matrix[left, left] = c
        matrix[left, right] = 1j * s
        matrix[right, left] = 1j * s
        matrix[right, right] = c
    edge = 1.0 if boundary == 'reflecting' else c
    matrix[2 * (size - 1), 2 * (size - 1)] = edge
    matrix[1, 1] = edge
    return matrix


def strip_operator(delta, q_y, N, open_axis='x', boundary='reflecting'):
    """
    One step ``T_y T_x W`` on a strip of 2N+1 sites, open along ``open_axis``.

    ``q_y`` is the quasi-momentum along the periodic direction. The default
    reflecting boundary keeps the operator exactly unitary; 'truncated'
    deletes the off-strip amplitudes and is sub-unitary at the edges.
    """
    if N < MIN_WIDTH:
        raise InvalidArgumentError(f'strip half-width must be at least {MIN_WIDTH}, got {N}')
    if open_axis not in ('x', 'y'):
        raise InvalidArgumentError(f'open axis must be x or y, got {open_axis!r}')
    if boundary not in BOUNDARIES:
        raise InvalidArgumentError(f'boundary must be one of {BOUNDARIES}, got {boundary!r}')
    size = 2 * N + 1
    eye = np.eye(size)
    coin = np.kron(eye, lc_plate(math.pi / 2.0, 0.0).matrix)
    periodic_axis = 'y' if open_axis == 'x' else 'x'
    periodic = np.kron(eye, g_plate_momentum(periodic_axis, delta, 0.0, float(q_y)).matrix)
    opened = _open_grating(delta, size, boundary)
    t_x, t_y = (opened, periodic) if open_axis == 'x' else (periodic, opened)
    return t_y @ t_x @ coin


def localization(vectors, N):
    """lambda = log10(1 - <|x|>/N) per column of ``vectors``, floored at -12."""
    size = 2 * N + 1
    weights = np.abs(vectors.reshape(size, 2, -1)) ** 2
    site = weights.sum(axis=1)
    site = site / site.sum(axis=0)
    mean_abs = np.abs(np.arange(-N, N + 1)) @ site
    remainder = 1.0 - mean_abs / N
    with np.errstate(divide='ignore'):
        values = np.log10(np.maximum(remainder, 0.0))
    return np.maximum(values, LAMBDA_FLOOR), np.arange(-N, N + 1) @ site


def _separate_degenerate(values, vectors, N):
    """Rotate near-degenerate eigenvectors into position eigenstates so edges do not mix."""
    position = np.repeat(np.arange(-N, N + 1), 2).astype(float)
    order = np.argsort(values)
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and abs(values[order[j]] - values[order[i]]) < DEGENERATE_SPLITTING:
            j += 1
        if j - i > 1:
            block = vectors[:, order[i:j]]
            _, rotation = np.linalg.eigh(block.conj().T @ (position[:, None] * block))
            vectors[:, order[i:j]] = block @ rotation
        i = j
    return vectors


def _wrap(angle):
    """Map to (-pi, pi]."""
    wrapped = np.mod(angle + math.pi, 2.0 * math.pi) - math.pi
    return np.where(wrapped <= -math.pi, wrapped + 2.0 * math.pi, wrapped)


def _diagonalize(delta, q_y, N, open_axis, boundary):
    operator = strip_operator(delta, q_y, N, open_axis, boundary)
    if boundary == 'reflecting':
        schur_form, vectors = linalg.schur(operator, output='complex')
        eigenvalues = np.diag(schur_form)
    else:
        eigenvalues, vectors = linalg.eig(operator)
        vectors = vectors / np.linalg.norm(vectors, axis=0)
    energies = _wrap(-np.angle(eigenvalues))
    if boundary == 'reflecting':
        vectors = _separate_degenerate(energies, vectors.copy(), N)
    order = np.argsort(energies, kind='stable')
    energies, vectors = energies[order], vectors[:, order]
    lam, mean_x = localization(vectors, N)
    return energies, lam, mean_x, vectors


@dataclass(frozen=True, eq=False)
class StripSpectrum:
    delta: float
    N: int
    q_y: np.ndarray
    epsilon: np.ndarray
    lam: np.ndarray
    mean_x: np.ndarray
    vectors: np.ndarray
    boundary: str = 'reflecting'

    def symmetry_defect(self):
        """Largest mismatch between the sorted spectrum and its mirror -eps, over q_y."""
        worst = 0.0
        for row in self.epsilon:
            mirrored = np.sort(_wrap(-row))
            worst = max(worst, float(np.max(np.abs(_wrap(np.sort(row) - mirrored)))))
        return worst

    def to_csv(self, target=None, metadata=None):
        buffer = io.StringIO()
        for key, value in (metadata or {}).items():
            buffer.write(f'# {key}: {value}\n')
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['q_y', 'epsilon', 'lambda'])
        for k, q in enumerate(self.q_y):
            for eps, lam in zip(self.epsilon[k], self.lam[k]):
                writer.writerow([f'{q:.12g}', f'{eps:.12g}', f'{lam:.6g}'])
        text = buffer.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text


def strip_spectrum(delta, N=30, q_y_count=201, open_axis='x', boundary='reflecting', threads=None):
    """
    Quasi-energies ``-arg(eigenvalue)`` and localization for each q_y.

    q_y is sampled at ``-pi + 2 pi (k + 1/2) / q_y_count``.
    """
    if q_y_count < 4:
        raise InvalidArgumentError(f'need at least 4 q_y samples, got {q_y_count}')
    q_y = -math.pi + 2.0 * math.pi * (np.arange(q_y_count) + 0.5) / q_y_count
    results = ordered_map(lambda q: _diagonalize(delta, q, N, open_axis, boundary), q_y, threads)
    return StripSpectrum(
        delta=delta,
        N=N,
        q_y=q_y,
        epsilon=np.array([r[0] for r in results]),
        lam=np.array([r[1] for r in results]),
        mean_x=np.array([r[2] for r in results]),
        vectors=np.array([r[3] for r in results]),
        boundary=boundary,
    )


@dataclass
class EdgeCount:
    chirality: int
    crossings: List[tuple] = field(default_factory=list)

    @property
    def modes(self):
        return abs(self.chirality)


def count_edge_modes(spectrum, gap, edge, lambda_edge=-1.0, window=0.5, min_overlap=0.5):
    """
    Net chirality of the edge branches crossing the middle of one gap.

    Only states inside ``window`` times the half-gap around the gap center,
    sitting on ``edge`` and with ``lambda < lambda_edge`` are followed. Each is
    matched to its continuation at the next q_y by maximal overlap, and every
    pass through the gap center counts ``sign(d eps / d q_y)``.
    """
    if gap in (0, '0'):
        center, index = 0.0, 0
    elif gap in ('pi', math.pi):
        center, index = math.pi, 1
    else:
        raise InvalidArgumentError(f"gap must be 0 or 'pi', got {gap!r}")
    if edge not in ('left', 'right'):
        raise InvalidArgumentError(f"edge must be 'left' or 'right', got {edge!r}")
    bulk_gap = band_gaps(spectrum.delta)[index]
    if bulk_gap <= 1e-3:
        raise NearCriticalError(f'bulk gap at {gap} is {bulk_gap:.3g} for delta={spectrum.delta:.6g}',
                                delta=spectrum.delta, min_gap=bulk_gap)
    half_window = window * bulk_gap / 2.0
    offset = _wrap(spectrum.epsilon - center)
    side = spectrum.mean_x < 0 if edge == 'left' else spectrum.mean_x > 0
    selected = (np.abs(offset) < half_window) & side & (spectrum.lam < lambda_edge)

    count = EdgeCount(0)
    samples = len(spectrum.q_y)
    for k in range(samples):
        nxt = (k + 1) % samples
        states = np.flatnonzero(selected[k])
        if states.size == 0:
            continue
        overlaps = np.abs(spectrum.vectors[k][:, states].conj().T @ spectrum.vectors[nxt])
        partners = np.argmax(overlaps, axis=1)
        best = overlaps[np.arange(states.size), partners]
        if np.any(best < min_overlap) or len(set(partners.tolist())) < partners.size:
            raise EdgeTrackingError(f'ambiguous edge branch between q_y={spectrum.q_y[k]:.4f} and '
                                    f'q_y={spectrum.q_y[nxt]:.4f}; increase q_y_count')
        for state, partner in zip(states, partners):
            if not selected[nxt, partner]:
                continue
            before, after = offset[k, state], offset[nxt, partner]
            if before < 0 <= after:
                count.chirality += 1
                count.crossings.append((float(spectrum.q_y[k]), +1))
            elif before >= 0 > after:
                count.chirality -= 1
                count.crossings.append((float(spectrum.q_y[k]), -1))
    return count


@dataclass
class EdgeInvariants:
    W0: int
    Wpi: int
    left: tuple
    right: tuple


@dataclass
class BulkEdgeReport:
    delta: float
    chern_minus: int
    invariants: EdgeInvariants
    holds: bool
    N: int
    boundary: str
    note: Optional[str] = None

    def summary(self):
        return {
            'delta': self.delta,
            'chern_minus': self.chern_minus,
            'W0': self.invariants.W0,
            'Wpi': self.invariants.Wpi,
            'left_chirality': list(self.invariants.left),
            'right_chirality': list(self.invariants.right),
            'holds': self.holds,
            'N': self.N,
            'boundary': self.boundary,
        }


def edge_invariants(spectrum, **options):
    left = tuple(count_edge_modes(spectrum, gap, 'left', **options).chirality for gap in (0, 'pi'))
    right = tuple(count_edge_modes(spectrum, gap, 'right', **options).chirality for gap in (0, 'pi'))
    return EdgeInvariants(abs(left[0]), abs(left[1]), left, right)


def bulk_edge_check(delta, N=30, q_y_count=201, grid_n=24, boundary='reflecting', threads=None, spectrum=None,
                    **options):
    """
    Compare the bulk Chern number with the edge-mode count ``W_0 - W_pi``.

    W are the mode counts in each gap and the relation is checked with signs,
    ``nu = W_0 - W_pi``. Pass ``spectrum`` to reuse a strip spectrum computed before.
    """
    gaps = band_gaps(delta)
    if min(gaps) <= 1e-3:
        raise NearCriticalError(f'delta={delta:.6g} is at a gap closing (gap_0={gaps.gap_at_0:.3g}, '
                                f'gap_pi={gaps.gap_at_pi:.3g}); the phase boundaries are at pi/4 and 3pi/4',
                                delta=delta, min_gap=min(gaps))
    nu = chern_number(delta, '-', grid_n).nu
    if spectrum is None:
        spectrum = strip_spectrum(delta, N, q_y_count, boundary=boundary, threads=threads)
    invariants = edge_invariants(spectrum, **options)
    holds = nu == invariants.W0 - invariants.Wpi
    if not holds:
        logger.error('bulk-edge mismatch at delta=%.6g: nu=%d, left chiralities %s', delta, nu, invariants.left)
    return BulkEdgeReport(delta, nu, invariants, holds, spectrum.N, spectrum.boundary)
