"""Enumeration of the (blockade-constrained) computational basis.

Bit ``j`` of a state bitmask is the occupation ``n_j`` of atom ``j``
(1 = Rydberg). States are kept in increasing bitmask order so lookup is
a binary search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import CapacityError, NotInBasisError
from .geometry import _check_boundary

#: bitmasks are stored as int64
MAX_SITES = 62
#: refuse to enumerate more states than this by default (~1 GiB of complex128)
MAX_DIM = 1 << 26


def _open_constrained(L):
    """Sorted bitmasks over L bits with no two adjacent ones (no wrap)."""
    prev2 = np.array([0], dtype=np.int64)  # zero bits
    prev1 = np.array([0, 1], dtype=np.int64)  # one bit
    if L == 0:
        return prev2
    for k in range(2, L + 1):
        cur = np.concatenate([prev1, prev2 | np.int64(1 << (k - 1))])
        prev2, prev1 = prev1, cur
    return prev1


def _fibonacci(n):
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


def basis_dimension(L, boundary="periodic", constrained=True):
    """Closed-form dimension: Fibonacci (open), Lucas (periodic), or 2^L."""
    if not constrained:
        return 1 << L
    if boundary == "open" or L < 3:
        # L=1,2 periodic rings have no wrap bond distinct from the chain bond
        if boundary == "periodic" and L == 2:
            return 3
        return _fibonacci(L + 2)
    return _fibonacci(L - 1) + _fibonacci(L + 1)


@dataclass(frozen=True)
class ConstrainedBasis:
    n_sites: int
    boundary: str
    constrained: bool
    states: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return int(self.states.shape[0])

    def __len__(self):
        return self.dim

    def contains(self, s) -> bool:
        i = int(np.searchsorted(self.states, s))
        return i < self.dim and int(self.states[i]) == int(s)

    def index(self, s) -> int:
        """Ordinal of bitmask ``s``; raises NotInBasisError if it is illegal."""
        s = int(s)
        i = int(np.searchsorted(self.states, s))
        if i >= self.dim or int(self.states[i]) != s:
            raise NotInBasisError(f"bitmask {s:#0{self.n_sites + 2}b} is not in the basis")
        return i

    def indices(self, states) -> np.ndarray:
        """Vectorised lookup; illegal entries map to -1."""
        states = np.asarray(states, dtype=np.int64)
        idx = np.searchsorted(self.states, states)
        idx = np.minimum(idx, self.dim - 1)
        hit = self.states[idx] == states
        return np.where(hit, idx, -1)

    def occupations(self) -> np.ndarray:
        """(dim, L) uint8 array of n_j per state."""
        bits = (self.states[:, None] >> np.arange(self.n_sites, dtype=np.int64)) & 1
        return bits.astype(np.uint8)

    def bitstring(self, s) -> str:
        """Atom 0 leftmost."""
        return "".join(str((int(s) >> j) & 1) for j in range(self.n_sites))


def enumerate_basis(L: int, boundary: str = "periodic", constrained: bool = True,
                    max_dim: int = MAX_DIM) -> ConstrainedBasis:
    """All legal bitmasks of an L-site chain, sorted ascending."""
    _check_boundary(boundary)
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    if L > MAX_SITES:
        raise CapacityError(f"L={L} exceeds the {MAX_SITES}-bit state word")
    dim = basis_dimension(L, boundary, constrained)
    if dim > max_dim:
        raise CapacityError(f"basis dimension {dim} exceeds limit {max_dim}")

    if not constrained:
        states = np.arange(1 << L, dtype=np.int64)
    else:
        states = _open_constrained(L)
        if boundary == "periodic" and L > 1:
            wrap = (states & 1) & (states >> (L - 1)) & 1
            states = states[wrap == 0]
    states = np.ascontiguousarray(states)
    states.setflags(write=False)
    return ConstrainedBasis(L, boundary, bool(constrained), states)


def state_index(basis: ConstrainedBasis, s: int) -> int:
    return basis.index(s)


def cyclic_shift(states, L, k=1):
    """Translate bitmasks by ``k`` sites around the ring (site j -> j+k)."""
    states = np.asarray(states, dtype=np.int64)
    k %= L
    mask = np.int64((1 << L) - 1)
    return ((states << k) | (states >> (L - k))) & mask


def reflect(states, L):
    """Mirror bitmasks (site j -> L-1-j)."""
    states = np.asarray(states, dtype=np.int64)
    out = np.zeros_like(states)
    for j in range(L):
        out |= ((states >> j) & 1) << (L - 1 - j)
    return out
