"""Domain-wall statistics, connected correlators and bitstring sampling.

A domain wall sits on every bond (i, i+1) whose two atoms agree ('00' or
'11'). Periodic chains wrap the bond (L-1, 0); open chains have L-1 bonds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import ConstrainedBasis


@dataclass(frozen=True, eq=False)
class QuantumState:
    amplitudes: np.ndarray
    basis: ConstrainedBasis

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def _popcount(x):
    x = np.asarray(x, dtype=np.uint64)
    # np.bitwise_count arrived in numpy 2.0
    return np.bitwise_count(x).astype(np.int64)


def domain_wall_counts(states, L, boundary="periodic") -> np.ndarray:
    """Vectorised domain-wall count D(s) for an array of bitmasks."""
    s = np.asarray(states, dtype=np.int64)
    if boundary == "periodic":
        if L == 1:
            return np.ones_like(s)
        mask = np.int64((1 << L) - 1)
        rot = ((s >> 1) | ((s & 1) << (L - 1))) & mask
        return L - _popcount(s ^ rot)
    if L == 1:
        return np.zeros_like(s)
    mask = np.int64((1 << (L - 1)) - 1)
    return (L - 1) - _popcount((s ^ (s >> 1)) & mask)


def domain_wall_count(s: int, L: int, boundary: str = "periodic") -> int:
    return int(domain_wall_counts(np.array([s]), L, boundary)[0])


def _probs(state):
    if isinstance(state, QuantumState):
        return state.probabilities(), state.basis
    raise TypeError("expected a QuantumState")


def defect_moments(state: QuantumState):
    """Exact (mean, variance) of the domain-wall number D."""
    p, basis = _probs(state)
    d = domain_wall_counts(basis.states, basis.n_sites, basis.boundary).astype(float)
    mean = float(p @ d)
    var = float(p @ d**2 - mean**2)
    return mean, max(var, 0.0)


@dataclass(frozen=True)
class DefectDistribution:
    """Probability mass over domain-wall counts ``k = 0..max``."""

    probabilities: np.ndarray
    mean: float = field(init=False)
    variance: float = field(init=False)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        object.__setattr__(self, "probabilities", p)
        k = np.arange(p.size)
        mean = float(k @ p)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", max(float(k**2 @ p - mean**2), 0.0))

    @property
    def pmf(self) -> dict:
        return {int(k): float(v) for k, v in enumerate(self.probabilities) if v > 0}

    def odd_mass(self) -> float:
        return float(self.probabilities[1::2].sum())

    @classmethod
    def from_pmf(cls, pmf: dict):
        kmax = max(pmf) if pmf else 0
        p = np.zeros(kmax + 1)
        for k, v in pmf.items():
            p[int(k)] = v
        return cls(p)


def defect_distribution(state: QuantumState) -> DefectDistribution:
    p, basis = _probs(state)
    d = domain_wall_counts(basis.states, basis.n_sites, basis.boundary)
    n_bonds = basis.n_sites if basis.boundary == "periodic" else basis.n_sites - 1
    pmf = np.bincount(d, weights=p, minlength=n_bonds + 1)
    return DefectDistribution(pmf)


def _spins(basis):
    """(dim, L) array of shifted Ising variables 2 n - 1 in {-1, +1}."""
    return 2.0 * basis.occupations() - 1.0


def _bond_spins(basis):
    """(dim, n_bonds) array of 2 D_i - 1, which equals the product of the two site spins."""
    s = _spins(basis)
    if basis.boundary == "periodic":
        return s * np.roll(s, -1, axis=1)
    return s[:, :-1] * s[:, 1:]


def _connected(p, x, max_l, periodic):
    """Site-averaged <x_i x_{i+l}> - <x_i><x_{i+l}> for l = 0..max_l."""
    n = x.shape[1]
    first = p @ x
    out = np.empty(max_l + 1)
    for l in range(max_l + 1):
        if periodic:
            second = p @ (x * np.roll(x, -l, axis=1))
            out[l] = np.mean(second - first * np.roll(first, -l))
        else:
            second = p @ (x[:, : n - l] * x[:, l:])
            out[l] = np.mean(second - first[: n - l] * first[l:])
    return out


def _max_displacement(n, periodic):
    return n // 2 if periodic else n - 1


def _check_l(l, n, periodic):
    lmax = _max_displacement(n, periodic)
    if not 0 <= l <= lmax:
        raise ValueError(f"displacement l={l} outside [0, {lmax}]")


def density_correlations(state: QuantumState, max_l=None) -> np.ndarray:
    """Connected density correlator of 2(n - 1/2) for l = 0..max_l (signed)."""
    p, basis = _probs(state)
    periodic = basis.boundary == "periodic"
    n = basis.n_sites
    max_l = _max_displacement(n, periodic) if max_l is None else max_l
    _check_l(max_l, n, periodic)
    return _connected(p, _spins(basis), max_l, periodic)


def defect_correlations(state: QuantumState, max_l=None) -> np.ndarray:
    """Connected bond correlator of 2(D_i - 1/2) for l = 0..max_l (signed)."""
    p, basis = _probs(state)
    periodic = basis.boundary == "periodic"
    n = basis.n_sites if periodic else basis.n_sites - 1
    max_l = _max_displacement(n, periodic) if max_l is None else max_l
    _check_l(max_l, n, periodic)
    return _connected(p, _bond_spins(basis), max_l, periodic)


def connected_density_correlator(state: QuantumState, l: int) -> float:
    p, basis = _probs(state)
    periodic = basis.boundary == "periodic"
    _check_l(l, basis.n_sites, periodic)
    x = _spins(basis)
    return float(_connected(p, x, l, periodic)[l])


def connected_defect_correlator(state: QuantumState, l: int) -> float:
    p, basis = _probs(state)
    periodic = basis.boundary == "periodic"
    x = _bond_spins(basis)
    _check_l(l, x.shape[1], periodic)
    return float(_connected(p, x, l, periodic)[l])


@dataclass(frozen=True)
class BitstringSample:
    """Aggregated measurement shots: unique bitmasks (sorted) with their counts."""

    states: np.ndarray
    counts: np.ndarray
    n_sites: int
    boundary: str = "periodic"

    def __post_init__(self):
        s = np.asarray(self.states, dtype=np.int64)
        c = np.asarray(self.counts, dtype=np.int64)
        if s.shape != c.shape or s.ndim != 1:
            raise ValueError("states and counts must be matching 1-D arrays")
        if np.any(c < 1):
            raise ValueError("shot counts must be >= 1")
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "counts", c)

    @property
    def total_shots(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_shots(cls, shots, n_sites, boundary="periodic"):
        """Aggregate a flat array of per-shot bitmasks."""
        states, counts = np.unique(np.asarray(shots, dtype=np.int64), return_counts=True)
        return cls(states, counts, n_sites, boundary)

    def expand(self) -> np.ndarray:
        """Per-shot bitmasks, in sorted order."""
        return np.repeat(self.states, self.counts)

    def bits(self) -> np.ndarray:
        """(total_shots, L) uint8 occupation matrix."""
        shots = self.expand()
        return ((shots[:, None] >> np.arange(self.n_sites, dtype=np.int64)) & 1).astype(np.uint8)

    def wall_counts(self) -> np.ndarray:
        """Domain-wall number of each unique state."""
        return domain_wall_counts(self.states, self.n_sites, self.boundary)


def sample_bitstrings(state: QuantumState, n_shots: int, seed) -> BitstringSample:
    """Draw ``n_shots`` i.i.d. projective measurements of ``state``."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    p, basis = _probs(state)
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n_shots, p)
    hit = np.nonzero(counts)[0]
    return BitstringSample(basis.states[hit], counts[hit], basis.n_sites, basis.boundary)


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    var: float
    se_mean: float
    se_var: float
    n_shots: int


def weighted_moments(values, counts) -> MomentEstimate:
    """Sample mean / unbiased variance of ``values`` repeated ``counts`` times, with standard errors."""
    x = np.asarray(values, dtype=float)
    w = np.asarray(counts, dtype=float)
    n = w.sum()
    if n < 2:
        raise ValueError(f"need at least 2 shots, got {int(n)}")
    mean = float(w @ x / n)
    dev = x - mean
    m2 = float(w @ dev**2 / n)
    m4 = float(w @ dev**4 / n)
    var = m2 * n / (n - 1)
    se_mean = np.sqrt(var / n)
    # large-sample variance of the sample variance
    var_of_var = max((m4 - m2**2 * (n - 3) / (n - 1)) / n, 0.0)
    return MomentEstimate(mean, var, float(se_mean), float(np.sqrt(var_of_var)), int(n))


def estimate_moments(sample: BitstringSample, boundary=None) -> MomentEstimate:
    """Shot-based estimate of the domain-wall mean and variance."""
    boundary = sample.boundary if boundary is None else boundary
    d = domain_wall_counts(sample.states, sample.n_sites, boundary)
    return weighted_moments(d, sample.counts)
