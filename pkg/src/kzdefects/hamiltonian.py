"""Drive protocols and the matrix-free time-dependent Rydberg Hamiltonian.

All frequencies are angular, in rad/us; times are in us; lengths in um.
Use :meth:`RydbergParams.from_linear` to enter values quoted as X/2pi MHz.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._validation import check_state_vector
from .basis import ConstrainedBasis
from .exceptions import InvalidProtocolError
from .geometry import AtomGeometry

TWO_PI = 2.0 * np.pi
_T_EPS = 1e-12


@dataclass(frozen=True)
class Waveform:
    """Piecewise-linear waveform through ``(time, value)`` breakpoints."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise InvalidProtocolError("waveform needs >= 2 matching breakpoints")
        if np.any(np.diff(t) <= 0):
            raise InvalidProtocolError("breakpoint times must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_breakpoints(cls, points):
        t, v = zip(*points)
        return cls(np.array(t), np.array(v))

    @property
    def start(self):
        return float(self.times[0])

    @property
    def stop(self):
        return float(self.times[-1])

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.start - _T_EPS) or np.any(t_arr > self.stop + _T_EPS):
            raise InvalidProtocolError(
                f"t={t} outside waveform domain [{self.start}, {self.stop}]")
        out = np.interp(t_arr, self.times, self.values)
        return float(out) if out.ndim == 0 else out

    def slope_on(self, t0, t1):
        """Constant slope on [t0, t1]; the interval must not straddle a breakpoint."""
        return (self(t1) - self(t0)) / (t1 - t0)


@dataclass(frozen=True)
class DriveProtocol:
    omega: Waveform
    delta: Waveform
    markers: dict = field(default_factory=dict)

    def __post_init__(self):
        if abs(self.omega.start) > _T_EPS or abs(self.delta.start) > _T_EPS:
            raise InvalidProtocolError("waveforms must start at t=0")
        if abs(self.omega.stop - self.delta.stop) > 1e-9:
            raise InvalidProtocolError("omega and delta must cover the same duration")

    @property
    def duration(self) -> float:
        return self.omega.stop

    def breakpoints(self) -> np.ndarray:
        """Union of both waveforms' breakpoint times."""
        t = np.union1d(self.omega.times, self.delta.times)
        # merge near-duplicates from floating point segment arithmetic
        keep = np.concatenate([[True], np.diff(t) > 1e-12])
        return t[keep]


@dataclass(frozen=True)
class RydbergParams:
    """Interaction and drive amplitudes, angular units (rad/us, rad/us*um^6)."""

    C6: float = TWO_PI * 862690.0
    omega_max: float = TWO_PI * 2.5
    delta_min: float = TWO_PI * -2.5
    delta_max: float = TWO_PI * 4.0

    def __post_init__(self):
        if not self.C6 > 0:
            raise ValueError("C6 must be positive")
        if not self.delta_max > self.delta_min:
            raise ValueError("delta_max must exceed delta_min")

    @classmethod
    def from_linear(cls, C6_over_2pi=862690.0, omega_max_over_2pi=2.5,
                    delta_min_over_2pi=-2.5, delta_max_over_2pi=4.0):
        """Build from values quoted as X/2pi in MHz (and MHz*um^6 for C6)."""
        return cls(TWO_PI * C6_over_2pi, TWO_PI * omega_max_over_2pi,
                   TWO_PI * delta_min_over_2pi, TWO_PI * delta_max_over_2pi)


def build_kz_protocol(t_delta, params: RydbergParams, t_edge=0.5) -> DriveProtocol:
    """Ramp-up of Omega, linear detuning sweep over ``t_delta``, ramp-down of Omega."""
    return build_hold_protocol(t_delta, 0.0, params, t_edge)


def build_hold_protocol(t_delta, t_hold, params: RydbergParams, t_edge=0.5) -> DriveProtocol:
    """KZ ramp with a constant (Omega_max, Delta_max) segment of ``t_hold`` before ramp-down."""
    if not t_delta > 0:
        raise InvalidProtocolError(f"t_delta must be positive, got {t_delta}")
    if not t_hold >= 0:
        raise InvalidProtocolError(f"t_hold must be non-negative, got {t_hold}")
    if not t_edge > 0:
        raise InvalidProtocolError(f"t_edge must be positive, got {t_edge}")
    t1 = t_edge
    t2 = t1 + t_delta
    t3 = t2 + t_hold
    t4 = t3 + t_edge
    om, dmin, dmax = params.omega_max, params.delta_min, params.delta_max
    if t_hold > 0:
        omega = Waveform(np.array([0, t1, t3, t4]), np.array([0, om, om, 0]))
        delta = Waveform(np.array([0, t1, t2, t3, t4]), np.array([dmin, dmin, dmax, dmax, dmax]))
    else:
        omega = Waveform(np.array([0, t1, t2, t4]), np.array([0, om, om, 0]))
        delta = Waveform(np.array([0, t1, t2, t4]), np.array([dmin, dmin, dmax, dmax]))
    markers = {"ramp_start": t1, "ramp_end": t2}
    if t_hold > 0:
        markers["hold_end"] = t3
    return DriveProtocol(omega, delta, markers)


def gamma_rate(t_delta, params: RydbergParams) -> float:
    """Sweep rate Gamma/2pi in MHz/us."""
    if not t_delta > 0:
        raise InvalidProtocolError(f"t_delta must be positive, got {t_delta}")
    return (params.delta_max - params.delta_min) / (TWO_PI * t_delta)


def t_delta_for_rate(gamma_over_2pi, params: RydbergParams) -> float:
    """Inverse of :func:`gamma_rate`."""
    return (params.delta_max - params.delta_min) / (TWO_PI * gamma_over_2pi)


def blockade_radius(C6, omega) -> float:
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    return (C6 / omega) ** (1.0 / 6.0)


def interaction_diagonal(basis: ConstrainedBasis, geometry: AtomGeometry, C6, cutoff=None):
    """sum_{j<k} C6 n_j n_k / r_jk^6 for every basis state."""
    L = basis.n_sites
    r = geometry.distances()
    occ = basis.occupations().astype(float)
    coupling = np.zeros((L, L))
    iu = np.triu_indices(L, 1)
    coupling[iu] = C6 / r[iu] ** 6
    if cutoff is not None:
        coupling[r > cutoff] = 0.0
    # row-wise quadratic form n^T J n with J strictly upper triangular
    return np.einsum("sj,jk,sk->s", occ, coupling, occ)


@dataclass(frozen=True, eq=False)
class RydbergHamiltonian:
    """H(t)/hbar = Omega/2 sum_j X_j - Delta sum_j n_j + V, restricted to ``basis``.

    The off-diagonal part is applied from a table of in-basis bit-flip
    targets; no matrix is ever formed.
    """

    basis: ConstrainedBasis
    geometry: AtomGeometry
    params: RydbergParams
    protocol: DriveProtocol | None
    diag_interaction: np.ndarray = field(repr=False)
    diag_occupation: np.ndarray = field(repr=False)
    flips: np.ndarray = field(repr=False)
    _adjacency: tuple = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_adjacency", _kernels.compress_flips(self.flips))

    @property
    def dim(self):
        return self.basis.dim

    def coefficients(self, t):
        """(Omega(t), Delta(t)) in rad/us."""
        if self.protocol is None:
            raise InvalidProtocolError("Hamiltonian has no protocol attached")
        return self.protocol.omega(t), self.protocol.delta(t)

    def apply_combination(self, cx, cn, cv, psi, out=None):
        """(cx * X + cn * N + cv * V) psi with X the flip sum and N the occupation count."""
        if out is None:
            out = np.empty_like(psi)
        indptr, targets = self._adjacency
        return _kernels.apply_combination(indptr, targets, self.diag_occupation,
                                          self.diag_interaction,
                                          complex(cx), complex(cn), complex(cv), psi, out)

    def apply_static(self, omega, delta, psi, out=None):
        return self.apply_combination(0.5 * omega, -delta, 1.0, psi, out)

    def diagonal(self, delta):
        return -delta * self.diag_occupation + self.diag_interaction

    def with_protocol(self, protocol):
        return RydbergHamiltonian(self.basis, self.geometry, self.params, protocol,
                                  self.diag_interaction, self.diag_occupation, self.flips)

    def to_dense(self, omega, delta) -> np.ndarray:
        """Materialise H at fixed (Omega, Delta). Testing and small systems only."""
        h = np.diag(self.diagonal(delta)).astype(complex)
        rows, cols = np.nonzero(self.flips >= 0)
        h[rows, self.flips[rows, cols]] += 0.5 * omega
        return h


def build_hamiltonian(basis: ConstrainedBasis, geometry: AtomGeometry, params: RydbergParams,
                      protocol: DriveProtocol | None = None, cutoff=None) -> RydbergHamiltonian:
    if basis.n_sites != geometry.n_sites:
        raise ValueError(
            f"basis has {basis.n_sites} sites but geometry has {geometry.n_sites} atoms")
    L = basis.n_sites
    flips = np.empty((basis.dim, L), dtype=np.int32)
    for j in range(L):
        flips[:, j] = basis.indices(basis.states ^ np.int64(1 << j))
    occ = basis.occupations().sum(axis=1).astype(float)
    vint = interaction_diagonal(basis, geometry, params.C6, cutoff)
    for arr in (flips, occ, vint):
        arr.setflags(write=False)
    return RydbergHamiltonian(basis, geometry, params, protocol, vint, occ, flips)


def apply_h(H: RydbergHamiltonian, t, psi) -> np.ndarray:
    """(H(t)/hbar) psi in rad/us."""
    psi = check_state_vector(psi, H.dim, normalized=False)
    omega, delta = H.coefficients(t)
    return H.apply_static(omega, delta, psi)
