"""
Coin-space and lattice operators realized by liquid-crystal plates.

Conventions used throughout walkapp:

* Coin basis is circular polarization, ``L = (1, 0)`` and ``R = (0, 1)``.
* Operator products read right-to-left: the first plate a beam meets is the
  rightmost factor, so ``U = T_y T_x W`` means W acts first. A
  ``StepProtocol`` lists its plates in the physical (left-to-right) order.
* Plane waves are ``e^{i q.m}``; a grating translation multiplies the
  off-diagonal coupling by ``e^{+iq}`` (L row) and ``e^{-iq}`` (R row). The
  quasi-momentum is tied to the beam coordinate by ``q = -2 pi x / Lambda``.
* Global phases are kept. Comparisons use ``phase_invariant_distance``.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from walkapp.exceptions import InvalidArgumentError

__all__ = [
    'PAULI', 'IDENTITY', 'CoinSpinor', 'CoinOperator', 'PlateDescriptor', 'StepProtocol',
    'DEFAULT_GRATING_PERIOD', 'lc_plate', 'g_plate_momentum', 'half_wave_plate',
    'protocol_U', 'protocol_U_inverse', 'calibration_protocol', 'walk_1d_protocol',
    'plate_matrix', 'step_matrix', 'bloch_matrices', 'phase_invariant_distance',
]

TWO_PI = 2.0 * math.pi
UNITARITY_TOLERANCE = 1e-10
NORM_TOLERANCE = 1e-12
DEFAULT_GRATING_PERIOD = 5e-3

IDENTITY = np.eye(2, dtype=complex)
PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

_SQRT_HALF = 1.0 / math.sqrt(2.0)
NAMED_COINS = {
    'L': (1.0, 0.0),
    'R': (0.0, 1.0),
    'H': (_SQRT_HALF, _SQRT_HALF),
    'V': (_SQRT_HALF, -_SQRT_HALF),
    'D': (_SQRT_HALF, 1j * _SQRT_HALF),
    'A': (_SQRT_HALF, -1j * _SQRT_HALF),
}


def _finite(*values):
    return all(np.all(np.isfinite(v)) for v in values)


@dataclass(frozen=True, eq=False)
class CoinSpinor:
    """Two complex amplitudes in the {L, R} basis."""
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.shape != (2,):
            raise InvalidArgumentError(f'coin spinor needs 2 amplitudes, got {amplitudes.shape}')
        if not _finite(amplitudes):
            raise InvalidArgumentError('coin spinor amplitudes must be finite')
        amplitudes.flags.writeable = False
        object.__setattr__(self, 'amplitudes', amplitudes)

    @classmethod
    def named(cls, name):
        """H, V, D, A, L or R."""
        try:
            return cls(NAMED_COINS[name.upper()])
        except KeyError:
            raise InvalidArgumentError(f'unknown polarization {name!r}; use one of {sorted(NAMED_COINS)}')

    @property
    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol=NORM_TOLERANCE):
        return abs(self.norm - 1.0) <= tol

    def normalized(self):
        norm = self.norm
        if norm == 0.0:
            raise InvalidArgumentError('cannot normalize a zero spinor')
        return CoinSpinor(self.amplitudes / norm)

    def overlap(self, other):
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class CoinOperator:
    """A 2x2 unitary on the coin space."""
    matrix: np.ndarray
    label: str = ''

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.shape != (2, 2):
            raise InvalidArgumentError(f'coin operator must be 2x2, got {matrix.shape}')
        if not _finite(matrix):
            raise InvalidArgumentError('coin operator entries must be finite')
        matrix.flags.writeable = False
        object.__setattr__(self, 'matrix', matrix)
        if self.unitarity_error() > UNITARITY_TOLERANCE:
            raise InvalidArgumentError(f'{self.label or "operator"} is not unitary '
                                       f'(|U^dag U - 1| = {self.unitarity_error():.3g})')

    def unitarity_error(self):
        return float(np.max(np.abs(self.matrix.conj().T @ self.matrix - IDENTITY)))

    def dagger(self):
        return CoinOperator(self.matrix.conj().T, label=f'({self.label})^dag')

    def apply(self, spinor):
        return CoinSpinor(self.matrix @ spinor.amplitudes)

    def __matmul__(self, other):
        return CoinOperator(self.matrix @ other.matrix, label=f'{self.label} {other.label}'.strip())


@dataclass(frozen=True)
class PlateDescriptor:
    """
    One liquid-crystal plate.

    ``kind`` is 'uniform' (a waveplate with fixed optic axis ``alpha0``) or
    'grating' (a g-plate whose optic axis rotates along ``axis`` with period
    Lambda). ``delta`` is stored mod 2 pi. ``shift`` is the lateral
    displacement of a grating, in the same length unit as Lambda.
    """
    kind: str
    delta: float
    alpha0: float = 0.0
    axis: Optional[str] = None
    shift: float = 0.0

    def __post_init__(self):
        if self.kind not in ('uniform', 'grating'):
            raise InvalidArgumentError(f'plate kind must be uniform or grating, got {self.kind!r}')
        if self.kind == 'grating' and self.axis not in ('x', 'y'):
            raise InvalidArgumentError(f'grating axis must be x or y, got {self.axis!r}')
        if self.kind == 'uniform' and (self.axis is not None or self.shift != 0.0):
            raise InvalidArgumentError('uniform plates take neither an axis nor a shift')
        if not _finite(self.delta, self.alpha0, self.shift):
            raise InvalidArgumentError('plate parameters must be finite')
        object.__setattr__(self, 'delta', float(self.delta) % TWO_PI)
        object.__setattr__(self, 'alpha0', float(self.alpha0))
        object.__setattr__(self, 'shift', float(self.shift))

    @property
    def is_grating(self):
        return self.kind == 'grating'

    def effective_alpha0(self, Lambda):
        """Optic-axis offset seen by the beam after shifting the plate by ``shift``."""
        return self.alpha0 + math.pi * self.shift / Lambda

    def shifted(self, extra):
        return replace(self, shift=self.shift + extra)


@dataclass(frozen=True)
class StepProtocol:
    """Plates of one time step in physical order, plus the grating period."""
    plates: Tuple[PlateDescriptor, ...]
    Lambda: float = DEFAULT_GRATING_PERIOD
    label: str = ''
    inverse: bool = False
    grating_indices: Tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        plates = tuple(self.plates)
        if not plates:
            raise InvalidArgumentError('a step protocol needs at least one plate')
        if not (math.isfinite(self.Lambda) and self.Lambda > 0):
            raise InvalidArgumentError(f'grating period must be positive, got {self.Lambda}')
        object.__setattr__(self, 'plates', plates)
        object.__setattr__(self, 'grating_indices', tuple(i for i, p in enumerate(plates) if p.is_grating))

    def at_step(self, t, force=0.0, jitter=None):
        """
        Concrete plates used at step ``t``.

        A force F_x shifts every x-grating by ``t F_x Lambda / 2 pi``, i.e.
        ``alpha0 -> alpha0 + t F_x / 2``. ``jitter`` holds extra lateral shifts,
        one per plate (entries on uniform plates are ignored).
        """
        if t < 0:
            raise InvalidArgumentError(f'step index must be non-negative, got {t}')
        force_shift = t * force * self.Lambda / TWO_PI
        plates = []
        for i, plate in enumerate(self.plates):
            if plate.is_grating:
                extra = force_shift if plate.axis == 'x' else 0.0
                if jitter is not None:
                    extra += float(jitter[i])
                if extra:
                    plate = plate.shifted(extra)
            plates.append(plate)
        return tuple(plates)


def lc_plate(delta, alpha):
    """
    Liquid-crystal plate with retardation ``delta`` and optic axis ``alpha``.

    Returns
    -------
    CoinOperator
        ``[[c, i s e^{-2i alpha}], [i s e^{2i alpha}, c]]`` with
        ``c = cos(delta/2)``, ``s = sin(delta/2)``.
    """
    if not _finite(delta, alpha):
        raise InvalidArgumentError('lc_plate needs finite delta and alpha')
    c, s = math.cos(delta / 2.0), math.sin(delta / 2.0)
    phase = np.exp(-2j * alpha)
    matrix = np.array([[c, 1j * s * phase], [1j * s * np.conj(phase), c]], dtype=complex)
    return CoinOperator(matrix, label=f'L({delta:.4g},{alpha:.4g})')


def g_plate_momentum(axis, delta, alpha0, q):
    """
    A g-plate seen by a plane wave of quasi-momentum ``q`` along ``axis``.

    ``[[c, i e^{iq} s e^{-2i alpha0}], [i e^{-iq} s e^{2i alpha0}, c]]``; the
    grating phase enters exactly like a rotation of the optic axis by -q/2.
    """
    if axis not in ('x', 'y'):
        raise InvalidArgumentError(f'grating axis must be x or y, got {axis!r}')
    if not _finite(delta, alpha0, q):
        raise InvalidArgumentError('g_plate_momentum needs finite arguments')
    if abs(q) > math.pi + 1e-12:
        raise InvalidArgumentError(f'quasi-momentum must lie in [-pi, pi], got {q}')
    operator = lc_plate(delta, alpha0 - q / 2.0)
    return CoinOperator(operator.matrix, label=f'T_{axis}({delta:.4g};q={q:.4g})')


def half_wave_plate():
    return CoinOperator(lc_plate(math.pi, 0.0).matrix, label='H_wp')


def protocol_U(delta, Lambda=DEFAULT_GRATING_PERIOD):
    """U = T_y(delta) T_x(delta) W, listed as [W, T_x, T_y]."""
    return StepProtocol(
        plates=(
            PlateDescriptor('uniform', math.pi / 2.0, 0.0),
            PlateDescriptor('grating', delta, 0.0, axis='x'),
            PlateDescriptor('grating', delta, 0.0, axis='y'),
        ),
        Lambda=Lambda,
        label=f'U({delta:.6g})',
    )


def protocol_U_inverse(delta, Lambda=DEFAULT_GRATING_PERIOD):
    """
    U^-1 built from physical retardations only.

    Uses L(delta)^-1 = L(2 pi - delta): plates [T_y(2pi-delta), T_x(2pi-delta),
    L(3pi/2, 0)] in physical order. Its matrix equals -U(q)^dag.
    """
    if not 0.0 < delta < TWO_PI:
        raise InvalidArgumentError(f'inverse protocol needs delta in (0, 2 pi), got {delta}')
    return StepProtocol(
        plates=(
            PlateDescriptor('grating', TWO_PI - delta, 0.0, axis='y'),
            PlateDescriptor('grating', TWO_PI - delta, 0.0, axis='x'),
            PlateDescriptor('uniform', 1.5 * math.pi, 0.0),
        ),
        Lambda=Lambda,
        label=f'U^-1({delta:.6g})',
        inverse=True,
    )


def calibration_protocol(axis, Lambda=DEFAULT_GRATING_PERIOD):
    """U_axis = T_axis(pi) H_wp: |H> splits into two spots moving one site per step."""
    return StepProtocol(
        plates=(
            PlateDescriptor('uniform', math.pi, 0.0),
            PlateDescriptor('grating', math.pi, 0.0, axis=axis),
        ),
        Lambda=Lambda,
        label=f'U_{axis}',
    )


def walk_1d_protocol(delta, Lambda=DEFAULT_GRATING_PERIOD):
    """U = T_x(delta) W."""
    return StepProtocol(
        plates=(
            PlateDescriptor('uniform', math.pi / 2.0, 0.0),
            PlateDescriptor('grating', delta, 0.0, axis='x'),
        ),
        Lambda=Lambda,
        label=f'U1d({delta:.6g})',
    )


def _plate_array(plate, qx, qy, Lambda):
    """Vectorized 2x2 matrices of one plate, shape ``qx.shape + (2, 2)``."""
    c, s = math.cos(plate.delta / 2.0), math.sin(plate.delta / 2.0)
    shape = np.broadcast(qx, qy).shape
    if plate.is_grating:
        q = np.broadcast_to(qx if plate.axis == 'x' else qy, shape)
        alpha = plate.effective_alpha0(Lambda)
        upper = 1j * s * np.exp(1j * (q - 2.0 * alpha))
        lower = 1j * s * np.exp(-1j * (q - 2.0 * alpha))
    else:
        upper = np.full(shape, 1j * s * np.exp(-2j * plate.alpha0))
        lower = np.full(shape, 1j * s * np.exp(2j * plate.alpha0))
    out = np.empty(shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 1, 1] = c
    out[..., 0, 1] = upper
    out[..., 1, 0] = lower
    return out


def plate_matrix(plate, q, Lambda=DEFAULT_GRATING_PERIOD):
    """Bloch matrix of a single (possibly shifted) plate at ``q = (q_x, q_y)``."""
    return CoinOperator(_plate_array(plate, np.asarray(q[0]), np.asarray(q[1]), Lambda))


def bloch_matrices(protocol, qx, qy, t=0, force=0.0, jitter=None):
    """
    Step matrices on arbitrary arrays of quasi-momenta.

    Returns an array of shape ``broadcast(qx, qy).shape + (2, 2)``.
    """
    qx, qy = np.asarray(qx, dtype=float), np.asarray(qy, dtype=float)
    result = None
    for plate in protocol.at_step(t, force, jitter):
        matrix = _plate_array(plate, qx, qy, protocol.Lambda)
        result = matrix if result is None else matrix @ result
    return result


def step_matrix(protocol, q, t=0, force=0.0):
    """
    Full Bloch matrix of the step at time ``t`` with force ``F_x``.

    Equals ``U(q_x - F_x t, q_y)``: the x-grating uses ``alpha0 + t F_x / 2``.
    """
    qx, qy = q
    if not _finite(qx, qy, force):
        raise InvalidArgumentError('step_matrix needs finite q and force')
    matrix = bloch_matrices(protocol, qx, qy, t, force)
    return CoinOperator(matrix, label=f'{protocol.label}(t={t})')


def phase_invariant_distance(a, b):
    """
    ``min_phi || A - e^{i phi} B ||`` in the Frobenius norm.

    Accepts CoinOperators or arrays of equal shape.
    """
    a = a.matrix if isinstance(a, CoinOperator) else np.asarray(a, dtype=complex)
    b = b.matrix if isinstance(b, CoinOperator) else np.asarray(b, dtype=complex)
    gap = np.vdot(a, a).real + np.vdot(b, b).real - 2.0 * abs(np.vdot(b, a))
    return math.sqrt(max(gap, 0.0))


def as_spinor(coin):
    """Accept a CoinSpinor, a polarization name or a 2-sequence."""
    if isinstance(coin, CoinSpinor):
        return coin
    if isinstance(coin, str):
        return CoinSpinor.named(coin)
    return CoinSpinor(coin)
